//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{CcaError, Result};

/// Relative eigenvalue floor for inverse square roots.
pub const EIGEN_FLOOR: f64 = 1e-10;

pub fn column_means(m: &DMatrix<f64>) -> DVector<f64> {
    let n = m.nrows() as f64;
    DVector::from_iterator(m.ncols(), m.column_iter().map(|c| c.sum() / n))
}

pub fn center_columns(m: &DMatrix<f64>) -> DMatrix<f64> {
    let means = column_means(m);
    let mut out = m.clone();
    for (j, mut col) in out.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    out
}

/// `aᵀb / (n-1)` for already-centered inputs.
pub fn cross_covariance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    (a.transpose() * b) / (a.nrows() as f64 - 1.0)
}

/// Symmetric inverse square root `C^(-1/2)` by eigendecomposition.
///
/// Fails with [`CcaError::IllConditioned`] when the smallest eigenvalue falls
/// below `EIGEN_FLOOR` times the largest.
pub fn inv_sqrt_sym(c: &DMatrix<f64>, which: &'static str) -> Result<DMatrix<f64>> {
    let sym = (c + c.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.max();
    let min = eig.eigenvalues.min();
    if !(max > 0.0) || min < EIGEN_FLOOR * max {
        return Err(CcaError::IllConditioned {
            which,
            ratio: if max > 0.0 { min / max } else { 0.0 },
        });
    }
    let d = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    Ok(&eig.eigenvectors * d * eig.eigenvectors.transpose())
}

/// Thin SVD with singular values sorted descending.
pub struct SortedSvd {
    pub u: DMatrix<f64>,
    pub singular: Vec<f64>,
    pub v: DMatrix<f64>,
}

pub fn sorted_svd(m: &DMatrix<f64>) -> Result<SortedSvd> {
    let svd = m.clone().svd(true, true);
    let u = svd.u.ok_or_else(|| CcaError::Numerical("SVD failed to produce U".into()))?;
    let v_t = svd
        .v_t
        .ok_or_else(|| CcaError::Numerical("SVD failed to produce V".into()))?;
    let s = svd.singular_values;
    if s.iter().any(|x| !x.is_finite()) {
        return Err(CcaError::Numerical("SVD produced non-finite singular values".into()));
    }
    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));
    Ok(SortedSvd {
        u: u.select_columns(&order),
        singular: order.iter().map(|&i| s[i]).collect(),
        v: v_t.transpose().select_columns(&order),
    })
}

/// Index of the largest-magnitude entry; ties resolve to the lowest index.
pub fn argmax_abs<'a, I: IntoIterator<Item = &'a f64>>(v: I) -> usize {
    let mut best = 0;
    let mut best_abs = f64::NEG_INFINITY;
    for (i, x) in v.into_iter().enumerate() {
        if x.abs() > best_abs {
            best = i;
            best_abs = x.abs();
        }
    }
    best
}

/// Sign (+1/-1) that makes the largest-magnitude entry of `v` positive.
pub fn orientation<'a, I: IntoIterator<Item = &'a f64>>(v: I) -> f64 {
    let v: Vec<f64> = v.into_iter().copied().collect();
    if v[argmax_abs(&v)] < 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Pearson correlations between every column of `a` and every column of `b`.
/// Zero-variance columns yield `NaN` entries.
pub fn column_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let ac = center_columns(a);
    let bc = center_columns(b);
    let na: Vec<f64> = ac.column_iter().map(|c| c.norm()).collect();
    let nb: Vec<f64> = bc.column_iter().map(|c| c.norm()).collect();
    let mut out = ac.transpose() * &bc;
    for i in 0..out.nrows() {
        for j in 0..out.ncols() {
            let d = na[i] * nb[j];
            out[(i, j)] = if d > 0.0 { (out[(i, j)] / d).clamp(-1.0, 1.0) } else { f64::NAN };
        }
    }
    out
}

/// Pearson correlation of matching columns of `a` and `b`.
pub fn paired_correlations(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Vec<f64> {
    (0..a.ncols().min(b.ncols()))
        .map(|j| crate::stats::pearson(a.column(j).iter(), b.column(j).iter()))
        .collect()
}

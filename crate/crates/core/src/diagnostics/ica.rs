use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cca::Variates;
use crate::error::{CcaError, Result};
use crate::linalg::{self, EIGEN_FLOOR};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IcaOptions {
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IcaOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcaComponents {
    /// n × r, unit sample variance per column.
    #[serde(with = "crate::serde_matrix")]
    pub sources: DMatrix<f64>,
    /// 2k × r; centered `[U | V]` is approximately `sources · mixingᵀ`.
    #[serde(with = "crate::serde_matrix")]
    pub mixing: DMatrix<f64>,
    pub converged: bool,
    pub iterations: usize,
}

/// `W ← (W Wᵀ)^{-1/2} W`.
fn symmetric_decorrelation(w: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(w * w.transpose());
    let d = eig.eigenvalues.map(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt());
    &eig.eigenvectors * DMatrix::from_diagonal(&d) * eig.eigenvectors.transpose() * w
}

/// FastICA on the concatenated variates `[U | V]` (n × 2k).
///
/// The data are centered and whitened onto their top `r` principal axes,
/// then a fixed-point iteration with the `tanh` contrast and symmetric
/// decorrelation estimates the unmixing matrix. Reaching `max_iter` sets
/// `converged = false` rather than failing: Gaussian variates have no
/// identifiable rotation, but the sources are still white.
pub fn ica_postprocess(variates: &Variates, r: usize, seed: u64, opts: IcaOptions) -> Result<IcaComponents> {
    let n = variates.u.nrows();
    let k2 = variates.u.ncols() + variates.v.ncols();
    if r == 0 || r > k2 {
        return Err(CcaError::Dimension(format!("ICA component count {r} must lie in 1..={k2}")));
    }
    if n <= k2 {
        return Err(CcaError::Dimension(format!(
            "ICA needs more observations ({n}) than concatenated variates ({k2})"
        )));
    }
    let mut joined = DMatrix::zeros(n, k2);
    joined.columns_mut(0, variates.u.ncols()).copy_from(&variates.u);
    joined.columns_mut(variates.u.ncols(), variates.v.ncols()).copy_from(&variates.v);
    let centered = linalg::center_columns(&joined);
    let cov = centered.tr_mul(&centered) / (n - 1) as f64;
    let eig = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..k2).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let top = eig.eigenvalues[order[0]];
    if !(top > 0.0) || eig.eigenvalues[order[r - 1]] <= EIGEN_FLOOR * top {
        return Err(CcaError::Numerical(format!(
            "concatenated variates have fewer than {r} nondegenerate directions; cannot whiten"
        )));
    }
    let e = DMatrix::from_fn(k2, r, |i, j| eig.eigenvectors[(i, order[j])]);
    let d: Vec<f64> = order[..r].iter().map(|&i| eig.eigenvalues[i]).collect();
    // r × n whitened data with identity sample covariance.
    let mut z = e.transpose() * centered.transpose();
    for (i, row_scale) in d.iter().enumerate() {
        z.row_mut(i).scale_mut(1.0 / row_scale.sqrt());
    }

    let mut rng = rng::stream(seed, Purpose::Ica, 0);
    let mut w = symmetric_decorrelation(&DMatrix::from_fn(r, r, |_, _| rng.sample::<f64, _>(StandardNormal)));
    let nf = n as f64;
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        iterations += 1;
        let wz = &w * &z;
        let g = wz.map(f64::tanh);
        let g_prime_mean: Vec<f64> = g
            .row_iter()
            .map(|row| row.iter().map(|t| 1.0 - t * t).sum::<f64>() / nf)
            .collect();
        let mut next = (&g * z.transpose()) / nf;
        for (i, gp) in g_prime_mean.iter().enumerate() {
            let wi = w.row(i).into_owned();
            let mut row = next.row_mut(i);
            row -= wi * *gp;
        }
        let next = symmetric_decorrelation(&next);
        let lim = (&next * w.transpose())
            .diagonal()
            .iter()
            .map(|v| (1.0 - v.abs()).abs())
            .fold(0.0, f64::max);
        w = next;
        if lim < opts.tol {
            converged = true;
            break;
        }
    }

    // Rescale by the sample std so sources have unit variance exactly.
    let mut sources = (&w * &z).transpose();
    let mut mixing = e * DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(r, d.iter().map(|v| v.sqrt())))
        * w.transpose();
    for j in 0..r {
        let sd = crate::stats::sample_std(sources.column(j).as_slice());
        let sign = linalg::orientation(mixing.column(j).iter());
        sources.column_mut(j).scale_mut(sign / sd);
        mixing.column_mut(j).scale_mut(sign * sd);
    }
    Ok(IcaComponents {
        sources,
        mixing,
        converged,
        iterations,
    })
}

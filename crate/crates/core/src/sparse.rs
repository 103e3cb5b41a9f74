//! Sparse CCA by penalized matrix decomposition.
//!
//! Within-set covariances are replaced by the identity, so each mode is a
//! rank-one approximation of the cross-product `Z = XᵀY` under unit-ℓ2 and
//! ℓ1-budget constraints on both factors:
//!
//! ```text
//! maximize uᵀZv  s.t. ‖u‖₂ ≤ 1, ‖u‖₁ ≤ c1, ‖v‖₂ ≤ 1, ‖v‖₁ ≤ c2
//! ```
//!
//! solved by alternating soft-thresholded power steps. After each mode the
//! rank-one piece `d·u·vᵀ` is subtracted from `Z`. With inactive budgets
//! (`c1 = √p`, `c2 = √q`) the modes are the singular vectors of `XᵀY`, which
//! is *not* classical CCA.
//!
//! Modes are reported in extraction order. Their correlations need not
//! decrease and their variates may correlate across modes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cca::{check_k, check_pair, CcaModel, Variant};
use crate::data::Dataset;
use crate::error::{CcaError, Result};
use crate::linalg;
use crate::rng::{self, Purpose};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SparseInit {
    /// Leading right singular vector of the current cross-product.
    Svd,
    /// Seeded random unit vector.
    Random { seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SparseParams {
    pub c1: f64,
    pub c2: f64,
    pub k: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_init")]
    pub init: SparseInit,
}

fn default_max_iter() -> usize {
    200
}

fn default_tol() -> f64 {
    1e-6
}

fn default_init() -> SparseInit {
    SparseInit::Svd
}

impl SparseParams {
    pub fn new(c1: f64, c2: f64, k: usize) -> Self {
        Self {
            c1,
            c2,
            k,
            max_iter: default_max_iter(),
            tol: default_tol(),
            init: default_init(),
        }
    }

    pub fn validate(&self, p: usize, q: usize) -> Result<()> {
        let feasible = |c: f64, d: usize| c >= 1.0 && c <= (d as f64).sqrt() + 1e-12;
        if !feasible(self.c1, p) {
            return Err(CcaError::Parameter(format!(
                "c1 = {} outside the feasible range [1, √p = {:.6}]",
                self.c1,
                (p as f64).sqrt()
            )));
        }
        if !feasible(self.c2, q) {
            return Err(CcaError::Parameter(format!(
                "c2 = {} outside the feasible range [1, √q = {:.6}]",
                self.c2,
                (q as f64).sqrt()
            )));
        }
        if self.k == 0 {
            return Err(CcaError::Parameter("sparse CCA needs k >= 1".into()));
        }
        if self.max_iter == 0 || !(self.tol > 0.0) {
            return Err(CcaError::Parameter("max_iter and tol must be positive".into()));
        }
        Ok(())
    }
}

/// Per-mode solver record attached to sparse models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseModeInfo {
    pub nonzero_x: usize,
    pub nonzero_y: usize,
    pub iterations: usize,
    pub converged: bool,
    /// Deflation scale `uᵀZv` on the (deflated) cross-product.
    pub d: f64,
    /// Objective after every half-step; kept for diagnostics, not serialized.
    #[serde(skip)]
    pub objective_trace: Vec<f64>,
}

/// `sign(v)·max(|v| - delta, 0)` elementwise.
pub fn soft_threshold(v: &[f64], delta: f64) -> Vec<f64> {
    v.iter()
        .map(|&x| x.signum() * (x.abs() - delta).max(0.0))
        .collect()
}

fn l1(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalized(v: Vec<f64>) -> Vec<f64> {
    let n = l2(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Unit-ℓ2 vector maximizing `uᵀa` subject to `‖u‖₁ ≤ c`.
///
/// Returns `S(a, δ)/‖S(a, δ)‖₂` with `δ = 0` when that already meets the
/// budget, otherwise `δ` is found by bisection on `[0, max|a_i|]`.
pub fn l1_project(a: &[f64], c: f64) -> Result<(Vec<f64>, f64)> {
    let amax = a.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(amax > 0.0) {
        return Err(CcaError::Numerical("cannot project an all-zero vector".into()));
    }
    let unit = normalized(a.to_vec());
    if l1(&unit) <= c {
        return Ok((unit, 0.0));
    }
    let (mut lo, mut hi) = (0.0, amax);
    // 1e-10 absolute, tightened for small-magnitude inputs.
    let width = 1e-10f64.min(1e-12 * amax);
    let mut iter = 0;
    while hi - lo > width && iter < 200 {
        let mid = 0.5 * (lo + hi);
        let s = soft_threshold(a, mid);
        if l2(&s) == 0.0 || l1(&normalized(s)) < c {
            hi = mid;
        } else {
            lo = mid;
        }
        iter += 1;
    }
    // `lo` keeps at least one entry alive and sits within the bracket of the root.
    let s = soft_threshold(a, lo);
    Ok((normalized(s), lo))
}

fn mat_vec(z: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (z * DVector::from_column_slice(v)).iter().copied().collect()
}

fn mat_t_vec(z: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (z.tr_mul(&DVector::from_column_slice(u))).iter().copied().collect()
}

fn bilinear(z: &DMatrix<f64>, u: &[f64], v: &[f64]) -> f64 {
    mat_vec(z, v).iter().zip(u).map(|(a, b)| a * b).sum()
}

/// Starting `v`, projected onto the constraint set so every iterate is feasible
/// and the objective trace is monotone from the first step.
fn initial_v(z: &DMatrix<f64>, params: &SparseParams, mode: usize) -> Result<Vec<f64>> {
    let v: Vec<f64> = match params.init {
        SparseInit::Svd => linalg::sorted_svd(z)?.v.column(0).iter().copied().collect(),
        SparseInit::Random { seed } => {
            let mut rng = rng::stream(seed, Purpose::SparseInit, mode as u64);
            (0..z.ncols()).map(|_| rng.sample(StandardNormal)).collect()
        }
    };
    Ok(l1_project(&v, params.c2)?.0)
}

struct ModeFit {
    u: Vec<f64>,
    v: Vec<f64>,
    info: SparseModeInfo,
}

fn fit_mode(z: &DMatrix<f64>, params: &SparseParams, mode: usize) -> Result<ModeFit> {
    let mut v = initial_v(z, params, mode)?;
    let mut u = vec![0.0; z.nrows()];
    let mut trace = Vec::new();
    let mut converged = false;
    let mut iterations = 0;
    for it in 1..=params.max_iter {
        iterations = it;
        let zv = mat_vec(z, &v);
        let (u_new, _) = match l1_project(&zv, params.c1) {
            Ok(r) => r,
            // Fully deflated direction; nothing left to extract.
            Err(_) => return Err(CcaError::Numerical(format!("sparse mode {} is degenerate (Zv = 0)", mode + 1))),
        };
        trace.push(bilinear(z, &u_new, &v));
        let ztu = mat_t_vec(z, &u_new);
        let (v_new, _) = l1_project(&ztu, params.c2)
            .map_err(|_| CcaError::Numerical(format!("sparse mode {} is degenerate (Zᵀu = 0)", mode + 1)))?;
        trace.push(bilinear(z, &u_new, &v_new));
        let change = u_new
            .iter()
            .zip(&u)
            .chain(v_new.iter().zip(&v))
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        u = u_new;
        v = v_new;
        if change < params.tol {
            converged = true;
            break;
        }
    }
    let d = bilinear(z, &u, &v);
    Ok(ModeFit {
        info: SparseModeInfo {
            nonzero_x: u.iter().filter(|x| **x != 0.0).count(),
            nonzero_y: v.iter().filter(|x| **x != 0.0).count(),
            iterations,
            converged,
            d,
            objective_trace: trace,
        },
        u,
        v,
    })
}

/// Fits `params.k` sparse modes by alternating projections with deflation.
///
/// Non-convergence is not an error: the mode's `converged` flag is cleared.
pub fn scca_fit(x: &Dataset, y: &Dataset, params: &SparseParams) -> Result<CcaModel> {
    check_pair(x, y, "sparse CCA fitting")?;
    let (p, q) = (x.n_cols(), y.n_cols());
    params.validate(p, q)?;
    check_k(params.k, p, q)?;
    let xc = linalg::center_columns(x.values());
    let yc = linalg::center_columns(y.values());
    let mut z = xc.transpose() * &yc;

    let mut x_weights = DMatrix::zeros(p, params.k);
    let mut y_weights = DMatrix::zeros(q, params.k);
    let mut correlations = Vec::with_capacity(params.k);
    let mut infos = Vec::with_capacity(params.k);
    for mode in 0..params.k {
        let ModeFit { mut u, mut v, info } = fit_mode(&z, params, mode)?;
        z -= DMatrix::from_column_slice(p, 1, &u) * DMatrix::from_row_slice(1, q, &v) * info.d;
        let s = linalg::orientation(&u);
        u.iter_mut().for_each(|e| *e *= s);
        v.iter_mut().for_each(|e| *e *= s);
        let xu = x.values() * DVector::from_column_slice(&u);
        let yv = y.values() * DVector::from_column_slice(&v);
        let r = stats::pearson(xu.iter(), yv.iter());
        if r.is_nan() {
            return Err(CcaError::Numerical(format!(
                "sparse mode {} produced a constant variate",
                mode + 1
            )));
        }
        x_weights.column_mut(mode).copy_from_slice(&u);
        y_weights.column_mut(mode).copy_from_slice(&v);
        correlations.push(r);
        infos.push(info);
    }

    Ok(CcaModel {
        format_version: crate::FORMAT_VERSION.to_string(),
        variant: Variant::Sparse {
            c1: params.c1,
            c2: params.c2,
        },
        left_columns: x.names().to_vec(),
        right_columns: y.names().to_vec(),
        n_observations: x.n_rows(),
        p,
        q,
        x_weights,
        y_weights,
        correlations,
        sparse_modes: Some(infos),
        preprocessing: None,
    })
}

/// First-mode training correlation, the statistic used for permutation tests.
pub fn scca_permutation_objective(x: &Dataset, y: &Dataset, params: &SparseParams) -> Result<f64> {
    Ok(scca_fit(x, y, params)?.correlations[0])
}

//! Classical and ridge-regularized canonical correlation analysis.
//!
//! With `Cxx = XᵀX/(n-1) + λx·I`, `Cyy` likewise and `Cxy = XᵀY/(n-1)`, the
//! canonical vectors come from the SVD of `Cxx^(-1/2)·Cxy·Cyy^(-1/2)`: the
//! singular values are the canonical correlations and the singular vectors,
//! mapped back through the inverse square roots, are the weights. Inputs are
//! centered and scaled to unit variance internally (weights are mapped back
//! to the input units), so the covariances above are correlation matrices and
//! the ridge penalties act on that scale.
//!
//! Sign convention: every mode is flipped so the largest-magnitude entry of
//! its x-weight vector is positive (ties go to the lowest index). Modes with
//! equal correlations are ordered by the lexicographic order of their
//! sign-normalized x-weights.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CcaError, Result};
use crate::linalg;
use crate::pipeline::FittedPipeline;
use crate::sparse::SparseModeInfo;

/// Ridge penalties added to the diagonal of the within-set correlation matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    pub lambda_x: f64,
    pub lambda_y: f64,
}

impl Ridge {
    pub fn new(lambda_x: f64, lambda_y: f64) -> Self {
        Self { lambda_x, lambda_y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Variant {
    Classical,
    Ridge { lambda_x: f64, lambda_y: f64 },
    Sparse { c1: f64, c2: f64 },
}

/// A fitted CCA model. Immutable after fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcaModel {
    pub format_version: String,
    pub variant: Variant,
    pub left_columns: Vec<String>,
    pub right_columns: Vec<String>,
    pub n_observations: usize,
    pub p: usize,
    pub q: usize,
    /// p × k canonical vectors of the left set.
    #[serde(with = "crate::serde_matrix")]
    pub x_weights: DMatrix<f64>,
    /// q × k canonical vectors of the right set.
    #[serde(with = "crate::serde_matrix")]
    pub y_weights: DMatrix<f64>,
    /// Training-data canonical correlations. These are optimistic; out-of-sample
    /// figures come from [`crate::inference::holdout_validate`].
    #[serde(rename = "in_sample_correlations")]
    pub correlations: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sparse_modes: Option<Vec<SparseModeInfo>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub preprocessing: Option<FittedPipeline>,
}

impl CcaModel {
    pub fn k(&self) -> usize {
        self.correlations.len()
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| CcaError::Numerical(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| CcaError::Schema(e.to_string()))
    }

    /// Attaches the preprocessing parameters that produced the design matrices.
    pub fn with_preprocessing(mut self, pipeline: FittedPipeline) -> Self {
        self.preprocessing = Some(pipeline);
        self
    }
}

/// Canonical variates; column `i` of `u` pairs with column `i` of `v`.
#[derive(Debug, Clone, PartialEq)]
pub struct Variates {
    pub u: DMatrix<f64>,
    pub v: DMatrix<f64>,
}

impl Variates {
    pub fn n_modes(&self) -> usize {
        self.u.ncols()
    }

    /// Per-mode Pearson correlation between `u` and `v`.
    pub fn correlations(&self) -> Vec<f64> {
        linalg::paired_correlations(&self.u, &self.v)
    }
}

pub(crate) fn check_pair(x: &Dataset, y: &Dataset, stage: &'static str) -> Result<()> {
    x.require_complete(stage)?;
    y.require_complete(stage)?;
    if x.n_rows() != y.n_rows() {
        return Err(CcaError::Schema(format!(
            "left set has {} rows but right set has {}",
            x.n_rows(),
            y.n_rows()
        )));
    }
    if x.n_rows() < 3 {
        return Err(CcaError::Dimension("at least three observations are required".into()));
    }
    Ok(())
}

pub(crate) fn check_k(k: usize, p: usize, q: usize) -> Result<()> {
    if k == 0 || k > p.min(q) {
        return Err(CcaError::Dimension(format!(
            "mode count k = {k} must lie in 1..=min(p, q) = {}",
            p.min(q)
        )));
    }
    Ok(())
}

/// Fits classical CCA (`ridge = None`) or ridge CCA.
///
/// Classical CCA requires `n > max(p, q)`; the ridge variant accepts any `n`
/// as long as the penalized covariances are well conditioned.
pub fn cca_fit(x: &Dataset, y: &Dataset, k: usize, ridge: Option<Ridge>) -> Result<CcaModel> {
    check_pair(x, y, "CCA fitting")?;
    let (n, p, q) = (x.n_rows(), x.n_cols(), y.n_cols());
    check_k(k, p, q)?;
    let (lx, ly) = match ridge {
        None => {
            if n <= p.max(q) {
                return Err(CcaError::TooFewObservations { n, p, q });
            }
            (0.0, 0.0)
        }
        Some(r) => {
            if !(r.lambda_x >= 0.0 && r.lambda_y >= 0.0 && r.lambda_x.is_finite() && r.lambda_y.is_finite()) {
                return Err(CcaError::Parameter(format!(
                    "ridge penalties must be finite and nonnegative, got ({}, {})",
                    r.lambda_x, r.lambda_y
                )));
            }
            (r.lambda_x, r.lambda_y)
        }
    };

    // Whitening runs on unit-variance columns so the conditioning floor and the
    // ridge penalties do not depend on measurement units.
    let (xc, sx) = scaled_columns(x)?;
    let (yc, sy) = scaled_columns(y)?;
    let mut cxx = linalg::cross_covariance(&xc, &xc);
    let mut cyy = linalg::cross_covariance(&yc, &yc);
    for i in 0..cxx.nrows() {
        cxx[(i, i)] += lx;
    }
    for i in 0..cyy.nrows() {
        cyy[(i, i)] += ly;
    }
    let cxy = linalg::cross_covariance(&xc, &yc);
    let rx = linalg::inv_sqrt_sym(&cxx, "left-set")?;
    let ry = linalg::inv_sqrt_sym(&cyy, "right-set")?;
    let svd = linalg::sorted_svd(&(&rx * cxy * &ry))?;
    if svd.singular[0] > 1.0 + 1e-8 {
        return Err(CcaError::Numerical(format!(
            "canonical correlation {} exceeds 1 beyond rounding",
            svd.singular[0]
        )));
    }

    let full = p.min(q);
    let mut modes: Vec<(f64, Vec<f64>, Vec<f64>)> = (0..full)
        .map(|i| {
            let wx = (&rx * svd.u.column(i)).component_div(&sx);
            let wy = (&ry * svd.v.column(i)).component_div(&sy);
            let s = linalg::orientation(wx.iter());
            (
                svd.singular[i].clamp(0.0, 1.0),
                (wx * s).iter().copied().collect(),
                (wy * s).iter().copied().collect(),
            )
        })
        .collect();
    order_ties(&mut modes);
    modes.truncate(k);

    let mut x_weights = DMatrix::zeros(p, k);
    let mut y_weights = DMatrix::zeros(q, k);
    for (i, (_, wx, wy)) in modes.iter().enumerate() {
        x_weights.column_mut(i).copy_from_slice(wx);
        y_weights.column_mut(i).copy_from_slice(wy);
    }
    Ok(CcaModel {
        format_version: crate::FORMAT_VERSION.to_string(),
        variant: match ridge {
            None => Variant::Classical,
            Some(r) => Variant::Ridge {
                lambda_x: r.lambda_x,
                lambda_y: r.lambda_y,
            },
        },
        left_columns: x.names().to_vec(),
        right_columns: y.names().to_vec(),
        n_observations: n,
        p,
        q,
        x_weights,
        y_weights,
        correlations: modes.iter().map(|m| m.0).collect(),
        sparse_modes: None,
        preprocessing: None,
    })
}

/// Centered columns divided by their sample standard deviations, and the deviations.
fn scaled_columns(ds: &Dataset) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let mut c = linalg::center_columns(ds.values());
    let denom = (ds.n_rows() - 1) as f64;
    let mut sd = DVector::zeros(c.ncols());
    for (j, mut col) in c.column_iter_mut().enumerate() {
        let s = (col.norm_squared() / denom).sqrt();
        if !(s > 0.0 && s.is_finite()) {
            return Err(CcaError::DegenerateColumn(ds.names()[j].clone()));
        }
        col /= s;
        sd[j] = s;
    }
    Ok((c, sd))
}

/// Reorders runs of (numerically) equal correlations by x-weight lexicographic order.
fn order_ties(modes: &mut [(f64, Vec<f64>, Vec<f64>)]) {
    let mut start = 0;
    while start < modes.len() {
        let mut end = start + 1;
        while end < modes.len() && (modes[start].0 - modes[end].0).abs() <= 1e-12 {
            end += 1;
        }
        if end - start > 1 {
            modes[start..end].sort_by(|a, b| {
                a.1.iter()
                    .zip(&b.1)
                    .map(|(u, v)| u.total_cmp(v))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        }
        start = end;
    }
}

fn check_model_columns(model: &CcaModel, x: &Dataset, y: &Dataset) -> Result<()> {
    if x.names() != model.left_columns.as_slice() {
        return Err(CcaError::ColumnMismatch(format!(
            "model left set is {:?}, data has {:?}",
            model.left_columns,
            x.names()
        )));
    }
    if y.names() != model.right_columns.as_slice() {
        return Err(CcaError::ColumnMismatch(format!(
            "model right set is {:?}, data has {:?}",
            model.right_columns,
            y.names()
        )));
    }
    Ok(())
}

/// Canonical variates `U = X·x_weights`, `V = Y·y_weights`.
///
/// The data must already be preprocessed with the model's stored parameters.
pub fn project(model: &CcaModel, x: &Dataset, y: &Dataset) -> Result<Variates> {
    check_model_columns(model, x, y)?;
    x.require_complete("projection")?;
    y.require_complete("projection")?;
    if x.n_rows() != y.n_rows() {
        return Err(CcaError::Schema("left and right sets differ in row count".into()));
    }
    Ok(Variates {
        u: x.values() * &model.x_weights,
        v: y.values() * &model.y_weights,
    })
}

/// Structure correlations: same-set loadings and cross-loadings per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Loadings {
    pub left_columns: Vec<String>,
    pub right_columns: Vec<String>,
    /// corr(X_j, U_m), p × k.
    #[serde(with = "crate::serde_matrix")]
    pub left_same: DMatrix<f64>,
    /// corr(X_j, V_m), p × k.
    #[serde(with = "crate::serde_matrix")]
    pub left_cross: DMatrix<f64>,
    /// corr(Y_j, V_m), q × k.
    #[serde(with = "crate::serde_matrix")]
    pub right_same: DMatrix<f64>,
    /// corr(Y_j, U_m), q × k.
    #[serde(with = "crate::serde_matrix")]
    pub right_cross: DMatrix<f64>,
}

fn undefined_loading(names: &[String], m: &DMatrix<f64>, variate: &str) -> Result<()> {
    for (j, row) in m.row_iter().enumerate() {
        if row.iter().any(|v| v.is_nan()) {
            return Err(CcaError::DegenerateColumn(format!(
                "{} (loading on {variate} undefined)",
                names[j]
            )));
        }
    }
    Ok(())
}

pub fn structure_correlations(model: &CcaModel, x: &Dataset, y: &Dataset) -> Result<Loadings> {
    let var = project(model, x, y)?;
    let left_same = linalg::column_correlations(x.values(), &var.u);
    let left_cross = linalg::column_correlations(x.values(), &var.v);
    let right_same = linalg::column_correlations(y.values(), &var.v);
    let right_cross = linalg::column_correlations(y.values(), &var.u);
    undefined_loading(x.names(), &left_same, "left variates")?;
    undefined_loading(x.names(), &left_cross, "right variates")?;
    undefined_loading(y.names(), &right_same, "right variates")?;
    undefined_loading(y.names(), &right_cross, "left variates")?;
    Ok(Loadings {
        left_columns: x.names().to_vec(),
        right_columns: y.names().to_vec(),
        left_same,
        left_cross,
        right_same,
        right_cross,
    })
}

/// Per-mode redundancy: mean squared cross-loading, per side.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Redundancy {
    /// Mean over left variables of corr(X_j, V_m)².
    pub left: Vec<f64>,
    /// Mean over right variables of corr(Y_j, U_m)².
    pub right: Vec<f64>,
}

impl Redundancy {
    /// Average of the two sides, the curve used for mode selection.
    pub fn combined(&self) -> Vec<f64> {
        self.left.iter().zip(&self.right).map(|(a, b)| 0.5 * (a + b)).collect()
    }
}

pub fn redundancy(model: &CcaModel, x: &Dataset, y: &Dataset, m: usize) -> Result<Redundancy> {
    if m == 0 || m > model.k() {
        return Err(CcaError::Dimension(format!(
            "redundancy requested for {m} modes but the model has {}",
            model.k()
        )));
    }
    let l = structure_correlations(model, x, y)?;
    let mean_sq = |mat: &DMatrix<f64>, i: usize| {
        mat.column(i).iter().map(|v| v * v).sum::<f64>() / mat.nrows() as f64
    };
    Ok(Redundancy {
        left: (0..m).map(|i| mean_sq(&l.left_cross, i)).collect(),
        right: (0..m).map(|i| mean_sq(&l.right_cross, i)).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use crate::synth::{generate, SynthSpec};
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, p: usize, seed: u64) -> DMatrix<f64> {
        let mut rng = stream(seed, Purpose::Synth, 99);
        DMatrix::from_fn(n, p, |_, _| StandardNormal.sample(&mut rng))
    }

    fn col(name: &str, v: &[f64]) -> Dataset {
        Dataset::from_columns(vec![(name, v.to_vec())]).unwrap()
    }

    #[test]
    fn perfectly_linear_single_columns() {
        let x = col("x", &[1.0, 2.0, 3.0, 4.0]);
        let y = col("y", &[2.0, 4.0, 6.0, 8.0]);
        let m = cca_fit(&x, &y, 1, None).unwrap();
        assert!((m.correlations[0] - 1.0).abs() < 1e-12);
        assert!(m.x_weights[(0, 0)] > 0.0 && m.y_weights[(0, 0)] > 0.0);
    }

    #[test]
    fn reversed_column_gets_negative_weight() {
        let x = col("x", &[1.0, 2.0, 3.0, 4.0]);
        let y = col("y", &[8.0, 6.0, 4.0, 2.0]);
        let m = cca_fit(&x, &y, 1, None).unwrap();
        assert!((m.correlations[0] - 1.0).abs() < 1e-12);
        assert!(m.x_weights[(0, 0)] > 0.0);
        assert!(m.y_weights[(0, 0)] < 0.0);
    }

    #[test]
    fn too_few_observations_suggests_remedies() {
        let x = Dataset::from_matrix("x", gaussian(10, 12, 1)).unwrap();
        let y = Dataset::from_matrix("y", gaussian(10, 2, 2)).unwrap();
        let err = cca_fit(&x, &y, 1, None).unwrap_err();
        assert!(matches!(err, CcaError::TooFewObservations { n: 10, p: 12, q: 2 }));
        let msg = err.to_string();
        assert!(msg.contains("--pca") && msg.contains("--ridge") && msg.contains("sparse"));
        assert!(cca_fit(&x, &y, 1, Some(Ridge::new(0.1, 0.1))).is_ok());
    }

    #[test]
    fn singular_covariance_is_conditioning_error() {
        let base = gaussian(30, 2, 3);
        let mut xm = DMatrix::zeros(30, 3);
        xm.columns_mut(0, 2).copy_from(&base);
        xm.set_column(2, &base.column(0));
        let x = Dataset::from_matrix("x", xm).unwrap();
        let y = Dataset::from_matrix("y", gaussian(30, 2, 4)).unwrap();
        assert!(matches!(cca_fit(&x, &y, 1, None), Err(CcaError::IllConditioned { .. })));
    }

    #[test]
    fn k_out_of_range() {
        let x = Dataset::from_matrix("x", gaussian(30, 3, 5)).unwrap();
        let y = Dataset::from_matrix("y", gaussian(30, 2, 6)).unwrap();
        assert!(matches!(cca_fit(&x, &y, 3, None), Err(CcaError::Dimension(_))));
        assert!(matches!(cca_fit(&x, &y, 0, None), Err(CcaError::Dimension(_))));
    }

    #[test]
    fn training_projection_reproduces_correlations() {
        let x = Dataset::from_matrix("x", gaussian(80, 4, 7)).unwrap();
        let ym = gaussian(80, 3, 8) + x.values().columns(0, 3) * 0.5;
        let y = Dataset::from_matrix("y", ym).unwrap();
        let m = cca_fit(&x, &y, 3, None).unwrap();
        let v = project(&m, &x, &y).unwrap();
        for (a, b) in v.correlations().iter().zip(&m.correlations) {
            assert!((a - b).abs() < 1e-10);
        }
        // Duplicate rows project to identical variates.
        let idx: Vec<usize> = (0..80).chain(0..80).collect();
        let v2 = project(&m, &x.select_rows(&idx), &y.select_rows(&idx)).unwrap();
        assert_eq!(v2.u.rows(80, 80), v.u.rows(0, 80));
    }

    #[test]
    fn projection_rejects_wrong_columns() {
        let x = Dataset::from_matrix("x", gaussian(30, 2, 9)).unwrap();
        let y = Dataset::from_matrix("y", gaussian(30, 2, 10)).unwrap();
        let m = cca_fit(&x, &y, 1, None).unwrap();
        assert!(matches!(project(&m, &y, &x), Err(CcaError::ColumnMismatch(_))));
    }

    #[test]
    fn single_column_same_set_loading_is_unit() {
        let x = Dataset::from_matrix("x", gaussian(50, 1, 11)).unwrap();
        let y = Dataset::from_matrix("y", gaussian(50, 3, 12)).unwrap();
        let m = cca_fit(&x, &y, 1, None).unwrap();
        let l = structure_correlations(&m, &x, &y).unwrap();
        assert!((l.left_same[(0, 0)].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_pair_has_unit_redundancy() {
        let x = col("x", &[1.0, 3.0, 2.0, 5.0, 4.0]);
        let y = col("y", &[2.0, 6.0, 4.0, 10.0, 8.0]);
        let m = cca_fit(&x, &y, 1, None).unwrap();
        let r = redundancy(&m, &x, &y, 1).unwrap();
        assert!((r.left[0] - 1.0).abs() < 1e-12 && (r.right[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_sets_have_small_redundancy() {
        let x = Dataset::from_matrix("x", gaussian(2000, 5, 13)).unwrap();
        let y = Dataset::from_matrix("y", gaussian(2000, 5, 14)).unwrap();
        let m = cca_fit(&x, &y, 5, None).unwrap();
        let r = redundancy(&m, &x, &y, 5).unwrap();
        assert!(r.left.iter().chain(&r.right).all(|v| *v < 0.05));
    }

    #[test]
    fn planted_modes_redundancy_ordering_and_noise_loading() {
        let spec = SynthSpec::new(2000, 6, 6, vec![0.8, 0.5], false, 5).unwrap();
        let d = generate(&spec).unwrap();
        let m = cca_fit(&d.x, &d.y, 4, None).unwrap();
        let r = redundancy(&m, &d.x, &d.y, 4).unwrap();
        assert!(r.left[0] > r.left[2] && r.right[0] > r.right[2]);
        let l = structure_correlations(&m, &d.x, &d.y).unwrap();
        // Columns 2.. are pure noise on the left.
        assert!(l.left_same[(5, 0)].abs() < 0.15);
    }

    #[test]
    fn duplicated_signal_column_has_equal_loadings() {
        let spec = SynthSpec::new(500, 3, 3, vec![0.7], false, 8).unwrap();
        let d = generate(&spec).unwrap();
        let x = d.x.hconcat(&Dataset::from_columns(vec![("dup", d.x.column(0))]).unwrap()).unwrap();
        let m = cca_fit(&x, &d.y, 1, Some(Ridge::new(0.01, 0.01))).unwrap();
        let l = structure_correlations(&m, &x, &d.y).unwrap();
        assert!((l.left_same[(0, 0)] - l.left_same[(3, 0)]).abs() < 1e-8);
        assert!((l.left_cross[(0, 0)] - l.left_cross[(3, 0)]).abs() < 1e-8);
    }

    #[test]
    fn model_json_round_trip() {
        let x = Dataset::from_matrix("x", gaussian(40, 3, 15)).unwrap();
        let y = Dataset::from_matrix("y", gaussian(40, 2, 16)).unwrap();
        let m = cca_fit(&x, &y, 2, Some(Ridge::new(0.5, 0.0))).unwrap();
        let text = m.to_json().unwrap();
        assert!(text.contains("in_sample_correlations"));
        assert_eq!(CcaModel::from_json(&text).unwrap(), m);
    }

    #[test]
    fn tie_ordering_is_lexicographic() {
        let mut modes = vec![
            (0.5, vec![0.9, 0.1], vec![]),
            (0.5, vec![0.2, 0.8], vec![]),
            (0.3, vec![0.0, 1.0], vec![]),
        ];
        order_ties(&mut modes);
        assert_eq!(modes[0].1, vec![0.2, 0.8]);
        assert_eq!(modes[2].0, 0.3);
    }
}

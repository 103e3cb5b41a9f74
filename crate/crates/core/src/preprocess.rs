//! Column-wise preprocessing: missing data, winsorizing, Box-Cox, confound
//! regression and z-scoring.
//!
//! Each transform is split into a `*_fit` step that estimates parameters and an
//! `*_apply` step that reuses them, so held-out rows can be transformed with
//! parameters learned on the training rows only.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CcaError, Result};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub columns: Vec<String>,
    pub mean: Vec<f64>,
    /// Sample standard deviation (n-1 denominator).
    pub std: Vec<f64>,
}

/// Nuisance regression coefficients. `coefficients[t]` holds the intercept
/// followed by one slope per confound, for target column `targets[t]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfoundModel {
    pub confounds: Vec<String>,
    pub targets: Vec<String>,
    pub coefficients: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WinsorSpec {
    pub lower: f64,
    pub upper: f64,
}

impl Default for WinsorSpec {
    fn default() -> Self {
        Self { lower: 5.0, upper: 95.0 }
    }
}

impl WinsorSpec {
    pub fn new(lower: f64, upper: f64) -> Result<Self> {
        let spec = Self { lower, upper };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lower && self.lower < self.upper && self.upper <= 100.0) {
            return Err(CcaError::Parameter(format!(
                "winsor percentiles must satisfy 0 <= lower < upper <= 100, got ({}, {})",
                self.lower, self.upper
            )));
        }
        Ok(())
    }
}

/// Per-column clamp values resolved from a [`WinsorSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WinsorBounds {
    pub columns: Vec<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImputeStrategy {
    #[default]
    Mean,
    Median,
}

/// Result of [`handle_missing`].
#[derive(Debug, Clone)]
pub struct MissingOutcome {
    pub data: Dataset,
    /// Indices (into the input) of the rows that were kept.
    pub retained_rows: Vec<usize>,
    /// Per-column fill value used for imputation.
    pub fill: Vec<f64>,
}

fn check_columns(ds: &Dataset, expected: &[String], what: &str) -> Result<()> {
    if ds.names() != expected {
        return Err(CcaError::ColumnMismatch(format!(
            "{what} was fitted on columns {:?} but got {:?}",
            expected,
            ds.names()
        )));
    }
    Ok(())
}

pub fn zscore_fit(x: &Dataset) -> Result<StandardizationParams> {
    x.require_complete("z-scoring")?;
    let mut mean = Vec::with_capacity(x.n_cols());
    let mut std = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let col = x.column(j);
        let s = if col.len() > 1 { stats::sample_std(&col) } else { 0.0 };
        if !(s > 0.0) {
            return Err(CcaError::DegenerateColumn(x.names()[j].clone()));
        }
        mean.push(stats::mean(&col));
        std.push(s);
    }
    Ok(StandardizationParams {
        columns: x.names().to_vec(),
        mean,
        std,
    })
}

pub fn zscore_apply(x: &Dataset, params: &StandardizationParams) -> Result<Dataset> {
    check_columns(x, &params.columns, "standardization")?;
    let mut v = x.values().clone();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        for e in col.iter_mut() {
            *e = (*e - params.mean[j]) / params.std[j];
        }
    }
    x.replace_values(v)
}

pub fn winsor_fit(x: &Dataset, spec: &WinsorSpec) -> Result<WinsorBounds> {
    spec.validate()?;
    x.require_complete("winsorizing")?;
    let mut lower = Vec::with_capacity(x.n_cols());
    let mut upper = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let mut col = x.column(j);
        col.sort_by(f64::total_cmp);
        lower.push(stats::percentile_sorted(&col, spec.lower));
        upper.push(stats::percentile_sorted(&col, spec.upper));
    }
    Ok(WinsorBounds {
        columns: x.names().to_vec(),
        lower,
        upper,
    })
}

pub fn winsor_apply(x: &Dataset, bounds: &WinsorBounds) -> Result<Dataset> {
    check_columns(x, &bounds.columns, "winsorizing")?;
    let mut v = x.values().clone();
    for (j, mut col) in v.column_iter_mut().enumerate() {
        for e in col.iter_mut() {
            *e = e.clamp(bounds.lower[j], bounds.upper[j]);
        }
    }
    x.replace_values(v)
}

/// Clamps every column to its own percentile range.
pub fn winsorize(x: &Dataset, spec: &WinsorSpec) -> Result<Dataset> {
    winsor_apply(x, &winsor_fit(x, spec)?)
}

/// Indices of rows whose missing fraction does not exceed `row_drop_fraction`.
pub fn retained_rows(x: &Dataset, row_drop_fraction: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&row_drop_fraction) {
        return Err(CcaError::Parameter(format!(
            "row drop fraction must lie in [0, 1], got {row_drop_fraction}"
        )));
    }
    let p = x.n_cols() as f64;
    Ok((0..x.n_rows())
        .filter(|&i| {
            let m = x.missing_mask().row(i).iter().filter(|b| **b).count() as f64;
            m / p <= row_drop_fraction
        })
        .collect())
}

/// Fill values from the non-missing entries of each column.
pub fn impute_fit(x: &Dataset, strategy: ImputeStrategy) -> Result<Vec<f64>> {
    (0..x.n_cols())
        .map(|j| {
            let observed: Vec<f64> = (0..x.n_rows())
                .filter(|&i| !x.is_missing(i, j))
                .map(|i| x.values()[(i, j)])
                .collect();
            if observed.is_empty() {
                return Err(CcaError::UnimputableColumn(x.names()[j].clone()));
            }
            Ok(match strategy {
                ImputeStrategy::Mean => stats::mean(&observed),
                ImputeStrategy::Median => stats::median(&observed),
            })
        })
        .collect()
}

/// Replaces missing cells with `fill`; observed cells are copied bit for bit.
pub fn impute_apply(x: &Dataset, fill: &[f64]) -> Result<Dataset> {
    if fill.len() != x.n_cols() {
        return Err(CcaError::ColumnMismatch(format!(
            "{} fill values for {} columns",
            fill.len(),
            x.n_cols()
        )));
    }
    let mut v = x.values().clone();
    for j in 0..x.n_cols() {
        for i in 0..x.n_rows() {
            if x.is_missing(i, j) {
                v[(i, j)] = fill[j];
            }
        }
    }
    Dataset::new(x.names().to_vec(), v)
}

/// Drops rows with too many missing cells, then imputes the remainder.
pub fn handle_missing(
    x: &Dataset,
    row_drop_fraction: f64,
    strategy: ImputeStrategy,
) -> Result<MissingOutcome> {
    let rows = retained_rows(x, row_drop_fraction)?;
    if rows.is_empty() {
        return Err(CcaError::Dimension("every row exceeds the missing-data threshold".into()));
    }
    let kept = x.select_rows(&rows);
    let fill = impute_fit(&kept, strategy)?;
    Ok(MissingOutcome {
        data: impute_apply(&kept, &fill)?,
        retained_rows: rows,
        fill,
    })
}

fn boxcox_transform(x: f64, lambda: f64) -> f64 {
    if lambda == 0.0 {
        x.ln()
    } else {
        (x.powf(lambda) - 1.0) / lambda
    }
}

/// Profile log-likelihood of the Box-Cox model at `lambda` (constants dropped).
pub fn boxcox_log_likelihood(x: &[f64], lambda: f64) -> f64 {
    let n = x.len() as f64;
    let y: Vec<f64> = x.iter().map(|&v| boxcox_transform(v, lambda)).collect();
    let m = stats::mean(&y);
    let var = y.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n;
    let log_sum: f64 = x.iter().map(|v| v.ln()).sum();
    -0.5 * n * var.ln() + (lambda - 1.0) * log_sum
}

/// Candidate exponents -2.0, -1.9, ..., 2.0.
pub fn boxcox_grid() -> impl Iterator<Item = f64> {
    (-20..=20).map(|i| i as f64 / 10.0)
}

/// Box-Cox transform of one column. When `lambda` is `None` the exponent
/// maximizing the log-likelihood over [`boxcox_grid`] is chosen.
pub fn boxcox(column: &[f64], lambda: Option<f64>) -> Result<(Vec<f64>, f64)> {
    boxcox_named(column, lambda, "<column>")
}

fn boxcox_named(column: &[f64], lambda: Option<f64>, name: &str) -> Result<(Vec<f64>, f64)> {
    if let Some((row, &value)) = column.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(CcaError::BoxCoxDomain {
            column: name.to_string(),
            row: row + 1,
            value,
        });
    }
    let lambda = match lambda {
        Some(l) => l,
        None => {
            let mut best = (f64::NEG_INFINITY, 0.0);
            for l in boxcox_grid() {
                let ll = boxcox_log_likelihood(column, l);
                if ll > best.0 {
                    best = (ll, l);
                }
            }
            best.1
        }
    };
    Ok((column.iter().map(|&v| boxcox_transform(v, lambda)).collect(), lambda))
}

/// Box-Cox every column; `lambdas` fixes the exponents (held-out data).
pub fn boxcox_dataset(x: &Dataset, lambdas: Option<&[f64]>) -> Result<(Dataset, Vec<f64>)> {
    x.require_complete("Box-Cox")?;
    if let Some(l) = lambdas {
        if l.len() != x.n_cols() {
            return Err(CcaError::ColumnMismatch(format!(
                "{} Box-Cox exponents for {} columns",
                l.len(),
                x.n_cols()
            )));
        }
    }
    let mut v = x.values().clone();
    let mut chosen = Vec::with_capacity(x.n_cols());
    for j in 0..x.n_cols() {
        let (out, l) = boxcox_named(&x.column(j), lambdas.map(|l| l[j]), &x.names()[j])?;
        v.column_mut(j).copy_from_slice(&out);
        chosen.push(l);
    }
    Ok((x.replace_values(v)?, chosen))
}

fn design_with_intercept(confounds: &Dataset) -> DMatrix<f64> {
    let n = confounds.n_rows();
    let c = confounds.n_cols();
    let mut d = DMatrix::from_element(n, c + 1, 1.0);
    d.columns_mut(1, c).copy_from(confounds.values());
    d
}

/// Ordinary least squares of every column of `x` on `[1 | confounds]`.
pub fn deconfound_fit(x: &Dataset, confounds: &Dataset) -> Result<ConfoundModel> {
    x.require_complete("deconfounding")?;
    confounds.require_complete("deconfounding")?;
    if x.n_rows() != confounds.n_rows() {
        return Err(CcaError::Schema(format!(
            "targets have {} rows but confounds have {}",
            x.n_rows(),
            confounds.n_rows()
        )));
    }
    let design = design_with_intercept(confounds);
    let names = confounds.names().join(", ");
    if design.nrows() < design.ncols() {
        return Err(CcaError::Collinearity(names));
    }
    let svd = design.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smax > 0.0) || smin <= 1e-10 * smax {
        return Err(CcaError::Collinearity(names));
    }
    let beta = svd
        .solve(x.values(), 0.0)
        .map_err(|e| CcaError::Numerical(e.to_string()))?;
    Ok(ConfoundModel {
        confounds: confounds.names().to_vec(),
        targets: x.names().to_vec(),
        coefficients: beta
            .column_iter()
            .map(|c| c.iter().copied().collect())
            .collect(),
    })
}

/// Residuals `x - [1 | confounds]·betas` using previously fitted betas.
pub fn deconfound_apply(x: &Dataset, confounds: &Dataset, model: &ConfoundModel) -> Result<Dataset> {
    check_columns(x, &model.targets, "deconfounding")?;
    check_columns(confounds, &model.confounds, "deconfounding (confounds)")?;
    let design = design_with_intercept(confounds);
    let c = design.ncols();
    let mut beta = DMatrix::zeros(c, model.targets.len());
    for (t, coef) in model.coefficients.iter().enumerate() {
        if coef.len() != c {
            return Err(CcaError::ColumnMismatch(format!(
                "confound model for {:?} has {} coefficients, expected {c}",
                model.targets[t],
                coef.len()
            )));
        }
        beta.column_mut(t).copy_from_slice(coef);
    }
    Dataset::new(x.names().to_vec(), x.values() - design * beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Purpose};
    use proptest::prelude::*;
    use rand_distr::{Distribution, StandardNormal};

    fn gaussian(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = stream(seed, Purpose::Synth, 0);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn zscore_consecutive_integers() {
        let ds = Dataset::from_columns(vec![("a", vec![1.0, 2.0, 3.0])]).unwrap();
        let p = zscore_fit(&ds).unwrap();
        assert_eq!(p.mean, vec![2.0]);
        assert_eq!(p.std, vec![1.0]);
        let out = zscore_apply(&ds, &p).unwrap();
        assert_eq!(out.column(0), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn zscore_constant_column_is_degenerate() {
        let ds = Dataset::from_columns(vec![("a", vec![1.0, 2.0, 3.0]), ("k", vec![5.0; 3])]).unwrap();
        match zscore_fit(&ds) {
            Err(CcaError::DegenerateColumn(c)) => assert_eq!(c, "k"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zscore_gaussian_moments() {
        let col: Vec<f64> = gaussian(1000, 11).iter().map(|v| 3.0 * v + 7.0).collect();
        let ds = Dataset::from_columns(vec![("g", col)]).unwrap();
        let out = zscore_apply(&ds, &zscore_fit(&ds).unwrap()).unwrap().column(0);
        // Moments recomputed directly, independent of the params.
        let n = out.len() as f64;
        let m = out.iter().sum::<f64>() / n;
        let s = (out.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!(m.abs() < 1e-12);
        assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zscore_apply_on_train_matches_fit_and_column_mismatch() {
        let ds = Dataset::from_columns(vec![("a", vec![1.0, 4.0, 2.0])]).unwrap();
        let p = zscore_fit(&ds).unwrap();
        assert_eq!(zscore_apply(&ds, &p).unwrap(), zscore_apply(&ds, &zscore_fit(&ds).unwrap()).unwrap());
        let other = Dataset::from_columns(vec![("b", vec![1.0, 4.0, 2.0])]).unwrap();
        assert!(matches!(zscore_apply(&other, &p), Err(CcaError::ColumnMismatch(_))));
    }

    #[test]
    fn winsorize_hand_interpolated() {
        let ds = Dataset::from_columns(vec![("a", (0..21).map(f64::from).collect())]).unwrap();
        let b = winsor_fit(&ds, &WinsorSpec::default()).unwrap();
        assert_eq!((b.lower[0], b.upper[0]), (1.0, 19.0));
        let out = winsor_apply(&ds, &b).unwrap().column(0);
        assert_eq!(out[0], 1.0);
        assert_eq!(out[20], 19.0);
        assert_eq!(out[10], 10.0);
    }

    #[test]
    fn winsorize_full_range_is_identity() {
        let ds = Dataset::from_columns(vec![("a", gaussian(50, 3))]).unwrap();
        assert_eq!(winsorize(&ds, &WinsorSpec::new(0.0, 100.0).unwrap()).unwrap(), ds);
    }

    #[test]
    fn winsor_spec_validation() {
        assert!(WinsorSpec::new(10.0, 10.0).is_err());
        assert!(WinsorSpec::new(-1.0, 50.0).is_err());
        assert!(WinsorSpec::new(0.0, 101.0).is_err());
    }

    proptest! {
        #[test]
        fn winsorize_bounded_monotone_idempotent(
            col in proptest::collection::vec(-100.0f64..100.0, 2..40),
            lo in 0.0f64..40.0,
            width in 1.0f64..60.0,
        ) {
            let spec = WinsorSpec::new(lo, lo + width).unwrap();
            let ds = Dataset::from_columns(vec![("a", col.clone())]).unwrap();
            let b = winsor_fit(&ds, &spec).unwrap();
            let once = winsorize(&ds, &spec).unwrap();
            let twice = winsor_apply(&once, &b).unwrap();
            prop_assert_eq!(&once, &twice);
            let out = once.column(0);
            for (i, &v) in out.iter().enumerate() {
                prop_assert!(v >= b.lower[0] && v <= b.upper[0]);
                for (k, &w) in out.iter().enumerate() {
                    if col[i] <= col[k] {
                        prop_assert!(v <= w);
                    }
                }
            }
        }
    }

    fn with_gaps(cols: Vec<(&str, Vec<Option<f64>>)>) -> Dataset {
        let n = cols[0].1.len();
        let p = cols.len();
        let mut v = DMatrix::zeros(n, p);
        let mut m = DMatrix::from_element(n, p, false);
        let mut names = Vec::new();
        for (j, (name, c)) in cols.into_iter().enumerate() {
            names.push(name.to_string());
            for (i, e) in c.into_iter().enumerate() {
                match e {
                    Some(x) => v[(i, j)] = x,
                    None => m[(i, j)] = true,
                }
            }
        }
        Dataset::with_missing(names, v, m).unwrap()
    }

    #[test]
    fn impute_mean() {
        let ds = with_gaps(vec![("a", vec![Some(1.0), None, Some(3.0)])]);
        let out = handle_missing(&ds, 1.0, ImputeStrategy::Mean).unwrap();
        assert_eq!(out.data.column(0), vec![1.0, 2.0, 3.0]);
        assert_eq!(out.retained_rows, vec![0, 1, 2]);
    }

    #[test]
    fn impute_median() {
        let ds = with_gaps(vec![("a", vec![Some(1.0), Some(2.0), None, Some(100.0)])]);
        let out = handle_missing(&ds, 1.0, ImputeStrategy::Median).unwrap();
        assert_eq!(out.data.column(0)[2], 2.0);
    }

    #[test]
    fn fully_missing_row_dropped() {
        let ds = with_gaps(vec![
            ("a", vec![Some(1.0), None, Some(3.0)]),
            ("b", vec![Some(4.0), None, Some(6.0)]),
        ]);
        let out = handle_missing(&ds, 0.5, ImputeStrategy::Mean).unwrap();
        assert_eq!(out.retained_rows, vec![0, 2]);
        assert!(out.data.is_complete());
        assert_eq!(out.data.n_rows(), 2);
    }

    #[test]
    fn unimputable_column() {
        let ds = with_gaps(vec![("a", vec![Some(1.0), Some(2.0)]), ("b", vec![None, None])]);
        assert!(matches!(
            handle_missing(&ds, 1.0, ImputeStrategy::Mean),
            Err(CcaError::UnimputableColumn(c)) if c == "b"
        ));
    }

    #[test]
    fn observed_cells_bit_identical() {
        let ds = with_gaps(vec![("a", vec![Some(0.1), None, Some(0.30000000000000004), Some(-7.25)])]);
        let out = handle_missing(&ds, 1.0, ImputeStrategy::Mean).unwrap().data;
        for i in [0, 2, 3] {
            assert_eq!(out.values()[(i, 0)].to_bits(), ds.values()[(i, 0)].to_bits());
        }
    }

    #[test]
    fn boxcox_linear_and_log() {
        let (y, l) = boxcox(&[1.0, 2.0, 3.0], Some(1.0)).unwrap();
        assert_eq!((y, l), (vec![0.0, 1.0, 2.0], 1.0));
        let e = std::f64::consts::E;
        let (y, _) = boxcox(&[1.0, e, e * e], Some(0.0)).unwrap();
        for (a, b) in y.iter().zip([0.0, 1.0, 2.0]) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn boxcox_picks_log_for_lognormal() {
        let x: Vec<f64> = gaussian(2000, 5).iter().map(|v| v.exp()).collect();
        let (_, l) = boxcox(&x, None).unwrap();
        assert!(l.abs() <= 0.1 + 1e-12, "chose {l}");
    }

    #[test]
    fn boxcox_rejects_nonpositive() {
        match boxcox(&[1.0, 0.0, 2.0], None) {
            Err(CcaError::BoxCoxDomain { row, .. }) => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn deconfound_identical_column_vanishes() {
        let c = gaussian(40, 1);
        let x = Dataset::from_columns(vec![("t", c.clone())]).unwrap();
        let conf = Dataset::from_columns(vec![("age", c)]).unwrap();
        let m = deconfound_fit(&x, &conf).unwrap();
        assert_eq!(m.coefficients[0].len(), 2);
        let r = deconfound_apply(&x, &conf, &m).unwrap();
        assert!(r.values().abs().max() < 1e-10);
    }

    #[test]
    fn deconfound_orthogonal_confound_only_centers() {
        // Centered target, confound orthogonal to it and to the intercept.
        let t = vec![1.0, -1.0, 1.0, -1.0];
        let c = vec![1.0, 1.0, -1.0, -1.0];
        let x = Dataset::from_columns(vec![("t", t.clone())]).unwrap();
        let conf = Dataset::from_columns(vec![("c", c)]).unwrap();
        let r = deconfound_apply(&x, &conf, &deconfound_fit(&x, &conf).unwrap()).unwrap();
        for (a, b) in r.column(0).iter().zip(&t) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn deconfound_residuals_satisfy_normal_equations() {
        let n = 200;
        let c1 = gaussian(n, 21);
        let c2 = gaussian(n, 22);
        let noise = gaussian(n, 23);
        let t: Vec<f64> = (0..n).map(|i| 2.0 + 0.7 * c1[i] - 1.3 * c2[i] + noise[i]).collect();
        let x = Dataset::from_columns(vec![("t", t)]).unwrap();
        let conf = Dataset::from_columns(vec![("c1", c1.clone()), ("c2", c2.clone())]).unwrap();
        let r = deconfound_apply(&x, &conf, &deconfound_fit(&x, &conf).unwrap()).unwrap().column(0);
        let dot = |a: &[f64]| a.iter().zip(&r).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        assert!(dot(&vec![1.0; n]).abs() < 1e-8);
        assert!(dot(&c1).abs() < 1e-8);
        assert!(dot(&c2).abs() < 1e-8);
    }

    #[test]
    fn deconfound_collinear_confounds() {
        let c = gaussian(20, 2);
        let doubled: Vec<f64> = c.iter().map(|v| 2.0 * v).collect();
        let x = Dataset::from_columns(vec![("t", gaussian(20, 3))]).unwrap();
        let conf = Dataset::from_columns(vec![("a", c), ("b", doubled)]).unwrap();
        assert!(matches!(deconfound_fit(&x, &conf), Err(CcaError::Collinearity(_))));
    }

    #[test]
    fn deconfound_name_mismatch() {
        let x = Dataset::from_columns(vec![("t", gaussian(20, 3))]).unwrap();
        let conf = Dataset::from_columns(vec![("a", gaussian(20, 4))]).unwrap();
        let m = deconfound_fit(&x, &conf).unwrap();
        let other = Dataset::from_columns(vec![("b", gaussian(20, 4))]).unwrap();
        assert!(matches!(deconfound_apply(&x, &other, &m), Err(CcaError::ColumnMismatch(_))));
    }
}

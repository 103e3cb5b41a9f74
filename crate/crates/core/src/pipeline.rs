//! The fixed preprocessing pipeline applied to both variable sets.
//!
//! Stage order: row removal and imputation, dispersion filter, winsorizing,
//! Box-Cox (optional), deconfounding (optional), z-scoring, PCA (optional).
//! [`PipelineSpec::fit`] learns every parameter from the training rows and
//! returns a [`FittedPipeline`]; [`FittedPipeline::apply`] replays the same
//! stages with frozen parameters. Fitting runs each stage through the same
//! apply path, so applying a fitted pipeline to its own training data
//! reproduces the training design matrices bit for bit.
//!
//! Rows are removed jointly: a row's missing fraction is computed across the
//! left set, the right set and the confounds together, so the two sets stay
//! aligned.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CcaError, Result};
use crate::preprocess::{
    boxcox_dataset, deconfound_apply, deconfound_fit, impute_apply, impute_fit, winsor_apply,
    winsor_fit, zscore_apply, zscore_fit, ConfoundModel, ImputeStrategy, StandardizationParams,
    WinsorBounds, WinsorSpec,
};
use crate::reduce::{pca_apply, pca_fit, PcaReduction, PcaTarget};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Rows whose missing fraction exceeds this are dropped.
    pub row_drop_fraction: f64,
    pub impute: ImputeStrategy,
    pub winsorize: Option<WinsorSpec>,
    pub boxcox: bool,
    pub deconfound_left: bool,
    pub deconfound_right: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            row_drop_fraction: 1.0,
            impute: ImputeStrategy::Mean,
            winsorize: None,
            boxcox: false,
            deconfound_left: true,
            deconfound_right: true,
        }
    }
}

/// Per-side feature selection and reduction.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SideOptions {
    /// Keep only the N columns with the largest median absolute deviation.
    pub dispersion_top: Option<usize>,
    pub pca: Option<PcaTarget>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PipelineSpec {
    pub preprocess: PreprocessConfig,
    pub left: SideOptions,
    pub right: SideOptions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedSide {
    pub input_columns: Vec<String>,
    pub fill: Vec<f64>,
    /// Columns kept by the dispersion filter (all columns when it is off).
    pub selected_columns: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub winsor: Option<WinsorBounds>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub boxcox_lambdas: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confounds: Option<ConfoundModel>,
    pub standardization: StandardizationParams,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pca: Option<PcaReduction>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub spec: PipelineSpec,
    pub left: FittedSide,
    pub right: FittedSide,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub confound_fill: Option<Vec<f64>>,
}

/// Design matrices ready for fitting, plus the input rows they came from.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub x: Dataset,
    pub y: Dataset,
    pub retained_rows: Vec<usize>,
}

fn joint_retained_rows(parts: &[&Dataset], threshold: f64) -> Result<Vec<usize>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(CcaError::Parameter(format!(
            "row drop fraction must lie in [0, 1], got {threshold}"
        )));
    }
    let n = parts[0].n_rows();
    if parts.iter().any(|d| d.n_rows() != n) {
        return Err(CcaError::Schema("inputs differ in row count".into()));
    }
    let total: usize = parts.iter().map(|d| d.n_cols()).sum();
    let rows: Vec<usize> = (0..n)
        .filter(|&i| {
            let missing: usize = parts
                .iter()
                .map(|d| d.missing_mask().row(i).iter().filter(|b| **b).count())
                .sum();
            missing as f64 / total as f64 <= threshold
        })
        .collect();
    if rows.is_empty() {
        return Err(CcaError::Dimension("every row exceeds the missing-data threshold".into()));
    }
    Ok(rows)
}

/// Columns with the `top` largest median absolute deviations, in input order.
/// Ties keep the earlier column.
pub fn dispersion_filter(x: &Dataset, top: usize) -> Result<Vec<String>> {
    if top == 0 {
        return Err(CcaError::Parameter("dispersion filter must keep at least one column".into()));
    }
    let mads: Vec<f64> = (0..x.n_cols())
        .map(|j| stats::median_abs_deviation(&x.column(j)))
        .collect();
    let mut order: Vec<usize> = (0..x.n_cols()).collect();
    order.sort_by(|&a, &b| mads[b].total_cmp(&mads[a]).then(a.cmp(&b)));
    let mut keep: Vec<usize> = order.into_iter().take(top).collect();
    keep.sort_unstable();
    Ok(keep.into_iter().map(|j| x.names()[j].clone()).collect())
}

impl PipelineSpec {
    pub fn validate(&self) -> Result<()> {
        if let Some(w) = &self.preprocess.winsorize {
            w.validate()?;
        }
        Ok(())
    }

    pub fn fit(
        &self,
        x: &Dataset,
        y: &Dataset,
        confounds: Option<&Dataset>,
    ) -> Result<(FittedPipeline, Prepared)> {
        self.validate()?;
        let mut parts = vec![x, y];
        parts.extend(confounds);
        let rows = joint_retained_rows(&parts, self.preprocess.row_drop_fraction)?;

        let (confound_fill, conf) = match confounds {
            Some(c) => {
                let kept = c.select_rows(&rows);
                let fill = impute_fit(&kept, self.preprocess.impute)?;
                let filled = impute_apply(&kept, &fill)?;
                (Some(fill), Some(filled))
            }
            None => (None, None),
        };

        let left = self.fit_side(
            &x.select_rows(&rows),
            &self.left,
            conf.as_ref().filter(|_| self.preprocess.deconfound_left),
        )?;
        let right = self.fit_side(
            &y.select_rows(&rows),
            &self.right,
            conf.as_ref().filter(|_| self.preprocess.deconfound_right),
        )?;
        let fitted = FittedPipeline {
            spec: self.clone(),
            left,
            right,
            confound_fill,
        };
        let prepared = fitted.apply(x, y, confounds)?;
        Ok((fitted, prepared))
    }

    fn fit_side(&self, x: &Dataset, side: &SideOptions, conf: Option<&Dataset>) -> Result<FittedSide> {
        let fill = impute_fit(x, self.preprocess.impute)?;
        let mut cur = impute_apply(x, &fill)?;
        let selected_columns = match side.dispersion_top {
            Some(top) => dispersion_filter(&cur, top)?,
            None => cur.names().to_vec(),
        };
        cur = cur.select_columns(&selected_columns)?;

        let winsor = match &self.preprocess.winsorize {
            Some(spec) => {
                let b = winsor_fit(&cur, spec)?;
                cur = winsor_apply(&cur, &b)?;
                Some(b)
            }
            None => None,
        };
        let boxcox_lambdas = if self.preprocess.boxcox {
            let (out, l) = boxcox_dataset(&cur, None)?;
            cur = out;
            Some(l)
        } else {
            None
        };
        let confounds = match conf {
            Some(c) => {
                let m = deconfound_fit(&cur, c)?;
                cur = deconfound_apply(&cur, c, &m)?;
                Some(m)
            }
            None => None,
        };
        let standardization = zscore_fit(&cur)?;
        cur = zscore_apply(&cur, &standardization)?;
        let pca = match side.pca {
            Some(target) => Some(pca_fit(&cur, target)?),
            None => None,
        };
        Ok(FittedSide {
            input_columns: x.names().to_vec(),
            fill,
            selected_columns,
            winsor,
            boxcox_lambdas,
            confounds,
            standardization,
            pca,
        })
    }
}

impl FittedSide {
    fn apply(&self, x: &Dataset, conf: Option<&Dataset>) -> Result<Dataset> {
        if x.names() != self.input_columns.as_slice() {
            return Err(CcaError::ColumnMismatch(format!(
                "pipeline was fitted on {:?} but got {:?}",
                self.input_columns,
                x.names()
            )));
        }
        let mut cur = impute_apply(x, &self.fill)?;
        cur = cur.select_columns(&self.selected_columns)?;
        if let Some(b) = &self.winsor {
            cur = winsor_apply(&cur, b)?;
        }
        if let Some(l) = &self.boxcox_lambdas {
            cur = boxcox_dataset(&cur, Some(l))?.0;
        }
        if let Some(m) = &self.confounds {
            let c = conf.ok_or_else(|| {
                CcaError::ColumnMismatch("pipeline was fitted with confounds but none were given".into())
            })?;
            cur = deconfound_apply(&cur, c, m)?;
        }
        cur = zscore_apply(&cur, &self.standardization)?;
        if let Some(red) = &self.pca {
            cur = pca_apply(&cur, red)?;
        }
        Ok(cur)
    }
}

impl FittedPipeline {
    /// Transforms new rows with the frozen training parameters.
    pub fn apply(&self, x: &Dataset, y: &Dataset, confounds: Option<&Dataset>) -> Result<Prepared> {
        let mut parts = vec![x, y];
        parts.extend(confounds);
        let rows = joint_retained_rows(&parts, self.spec.preprocess.row_drop_fraction)?;
        let conf = match (confounds, &self.confound_fill) {
            (Some(c), Some(fill)) => Some(impute_apply(&c.select_rows(&rows), fill)?),
            (None, None) => None,
            (Some(_), None) => {
                return Err(CcaError::ColumnMismatch(
                    "confounds given but the pipeline was fitted without them".into(),
                ))
            }
            (None, Some(_)) => {
                return Err(CcaError::ColumnMismatch(
                    "pipeline was fitted with confounds but none were given".into(),
                ))
            }
        };
        Ok(Prepared {
            x: self.left.apply(&x.select_rows(&rows), conf.as_ref())?,
            y: self.right.apply(&y.select_rows(&rows), conf.as_ref())?,
            retained_rows: rows,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::{generate, SynthSpec};
    use nalgebra::DMatrix;

    fn data(n: usize, seed: u64) -> (Dataset, Dataset) {
        let d = generate(&SynthSpec::new(n, 6, 4, vec![0.6], true, seed).unwrap()).unwrap();
        (d.x, d.y)
    }

    fn shifted_positive(ds: &Dataset) -> Dataset {
        Dataset::new(ds.names().to_vec(), ds.values().map(|v| v.exp())).unwrap()
    }

    #[test]
    fn training_replay_is_bit_identical() {
        let (x, y) = data(120, 1);
        let (x, y) = (shifted_positive(&x), shifted_positive(&y));
        let conf = Dataset::from_matrix("c", DMatrix::from_fn(120, 2, |i, j| ((i * 7 + j * 3) % 11) as f64)).unwrap();
        let spec = PipelineSpec {
            preprocess: PreprocessConfig {
                winsorize: Some(WinsorSpec::default()),
                boxcox: true,
                ..Default::default()
            },
            left: SideOptions {
                dispersion_top: Some(5),
                pca: Some(PcaTarget::Components(3)),
            },
            right: SideOptions::default(),
        };
        let (fitted, prep) = spec.fit(&x, &y, Some(&conf)).unwrap();
        let again = fitted.apply(&x, &y, Some(&conf)).unwrap();
        assert_eq!(prep.x, again.x);
        assert_eq!(prep.y, again.y);
        assert_eq!(prep.x.n_cols(), 3);
        assert_eq!(fitted.left.selected_columns.len(), 5);
        // Serializable for the run report.
        let text = serde_json::to_string(&fitted).unwrap();
        let back: FittedPipeline = serde_json::from_str(&text).unwrap();
        assert_eq!(back, fitted);
    }

    #[test]
    fn standardized_output_moments() {
        let (x, y) = data(200, 2);
        let (_, prep) = PipelineSpec::default().fit(&x, &y, None).unwrap();
        for j in 0..prep.x.n_cols() {
            let c = prep.x.column(j);
            assert!(stats::mean(&c).abs() < 1e-10);
            assert!((stats::sample_std(&c) - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rows_dropped_jointly() {
        let (x, y) = data(10, 3);
        let mut mask = DMatrix::from_element(10, 4, false);
        mask.row_mut(4).fill(true);
        let y = Dataset::with_missing(y.names().to_vec(), y.values().clone(), mask).unwrap();
        let spec = PipelineSpec {
            preprocess: PreprocessConfig {
                row_drop_fraction: 0.3,
                ..Default::default()
            },
            ..Default::default()
        };
        let (_, prep) = spec.fit(&x, &y, None).unwrap();
        assert_eq!(prep.retained_rows.len(), 9);
        assert!(!prep.retained_rows.contains(&4));
        assert_eq!(prep.x.n_rows(), prep.y.n_rows());
    }

    #[test]
    fn held_out_uses_training_parameters() {
        let (x, y) = data(100, 4);
        let train: Vec<usize> = (0..70).collect();
        let test: Vec<usize> = (70..100).collect();
        let (fitted, _) = PipelineSpec::default()
            .fit(&x.select_rows(&train), &y.select_rows(&train), None)
            .unwrap();
        let out = fitted.apply(&x.select_rows(&test), &y.select_rows(&test), None).unwrap();
        let j = 0;
        let expect = (x.values()[(70, j)] - fitted.left.standardization.mean[j]) / fitted.left.standardization.std[j];
        assert_eq!(out.x.values()[(0, j)], expect);
    }

    #[test]
    fn dispersion_filter_picks_widest() {
        let ds = Dataset::from_columns(vec![
            ("narrow", vec![1.0, 1.1, 0.9, 1.0, 1.05]),
            ("wide", vec![-5.0, 5.0, 0.0, 3.0, -2.0]),
            ("mid", vec![-1.0, 1.0, 0.0, 0.5, -0.5]),
        ])
        .unwrap();
        assert_eq!(dispersion_filter(&ds, 2).unwrap(), vec!["wide".to_string(), "mid".to_string()]);
        assert!(dispersion_filter(&ds, 0).is_err());
    }

    #[test]
    fn missing_confounds_on_apply() {
        let (x, y) = data(60, 5);
        let conf = Dataset::from_matrix("c", DMatrix::from_fn(60, 1, |i, _| i as f64)).unwrap();
        let (fitted, _) = PipelineSpec::default().fit(&x, &y, Some(&conf)).unwrap();
        assert!(matches!(fitted.apply(&x, &y, None), Err(CcaError::ColumnMismatch(_))));
    }
}

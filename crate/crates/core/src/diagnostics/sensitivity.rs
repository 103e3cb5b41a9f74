use std::io::Write;

use nalgebra::DMatrix;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::matching::match_modes;
use crate::cca::{project, CcaModel, Variant, Variates};
use crate::data::{format_float, Dataset};
use crate::error::{CcaError, Result};
use crate::inference::Fitter;
use crate::rng::{self, Purpose};
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Left,
    Right,
}

/// Columns deleted together, for example all features derived from one source.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ColumnGroup {
    pub name: String,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeScore {
    /// 1-based original mode.
    pub mode: usize,
    /// Mean of `untouched` and `perturbed`.
    pub score: f64,
    /// Correlation of original and perturbed variates on the side that kept all columns.
    pub untouched: f64,
    /// Correlation of original and perturbed variates on the side that lost columns.
    pub perturbed: f64,
    /// 1-based perturbed mode aligned to this one; `None` leaves all scores at 0.
    pub matched: Option<usize>,
    pub sign: f64,
    pub ci_lower: Option<f64>,
    pub ci_upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableSensitivity {
    pub name: String,
    pub columns: Vec<String>,
    pub modes: Vec<ModeScore>,
}

/// Fraction of bootstrap fits in which each variable had a nonzero weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionFrequency {
    pub left_columns: Vec<String>,
    pub right_columns: Vec<String>,
    /// p × k.
    #[serde(with = "crate::serde_matrix")]
    pub left: DMatrix<f64>,
    /// q × k.
    #[serde(with = "crate::serde_matrix")]
    pub right: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub side: Side,
    pub n_modes: usize,
    pub variables: Vec<VariableSensitivity>,
    /// Bootstrap resamples requested; 0 for a plain scan.
    pub n_bootstrap: usize,
    /// Resamples dropped because a fit failed on them.
    pub n_dropped: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub selection_frequency: Option<SelectionFrequency>,
}

impl Side {
    pub fn as_str(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl SensitivityReport {
    /// One row per variable and mode.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_sensitivity_csv(std::slice::from_ref(self), writer)
    }
}

/// Writes several reports (typically one per side) into one table.
pub fn write_sensitivity_csv<W: Write>(reports: &[SensitivityReport], writer: W) -> Result<()> {
    let csv_err = |e: csv::Error| CcaError::Numerical(format!("writing sensitivity table: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "side",
        "variable",
        "mode",
        "score",
        "untouched_side",
        "perturbed_side",
        "matched_mode",
        "sign",
        "ci_lower",
        "ci_upper",
    ])
    .map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(format_float).unwrap_or_default();
    for report in reports {
        for var in &report.variables {
            for s in &var.modes {
                w.write_record([
                    report.side.as_str().to_string(),
                    var.name.clone(),
                    s.mode.to_string(),
                    format_float(s.score),
                    format_float(s.untouched),
                    format_float(s.perturbed),
                    s.matched.map(|m| m.to_string()).unwrap_or_default(),
                    format_float(s.sign),
                    opt(s.ci_lower),
                    opt(s.ci_upper),
                ])
                .map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|e| CcaError::Numerical(format!("writing sensitivity table: {e}")))
}

fn resolve_groups(ds: &Dataset, groups: Option<&[ColumnGroup]>) -> Result<Vec<ColumnGroup>> {
    let groups = match groups {
        Some(g) => g.to_vec(),
        None => ds
            .names()
            .iter()
            .map(|c| ColumnGroup {
                name: c.clone(),
                columns: vec![c.clone()],
            })
            .collect(),
    };
    for g in &groups {
        if g.columns.is_empty() {
            return Err(CcaError::Parameter(format!("sensitivity group '{}' has no columns", g.name)));
        }
        for c in &g.columns {
            if ds.column_index(c).is_none() {
                return Err(CcaError::UnknownColumn(c.clone()));
            }
        }
    }
    Ok(groups)
}

fn truncate(v: Variates, modes: usize) -> Variates {
    Variates {
        u: v.u.columns(0, modes).into_owned(),
        v: v.v.columns(0, modes).into_owned(),
    }
}

struct Raw {
    untouched: f64,
    perturbed: f64,
    matched: Option<usize>,
    sign: f64,
}

impl Raw {
    fn score(&self) -> f64 {
        0.5 * (self.untouched + self.perturbed)
    }
}

fn perturbed_scores<F: Fitter + ?Sized>(
    original: &Variates,
    x: &Dataset,
    y: &Dataset,
    fitter: &F,
    side: Side,
    group: &ColumnGroup,
) -> Result<Vec<Raw>> {
    let (xp, yp) = match side {
        Side::Left => (x.drop_columns(&group.columns)?, y.clone()),
        Side::Right => (x.clone(), y.drop_columns(&group.columns)?),
    };
    let model = fitter.fit(&xp, &yp)?;
    let pert = project(&model, &xp, &yp)?;
    let mm = match_modes(original, &pert);
    let corr = |a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize, s: f64| {
        let r = stats::pearson(a.column(i).iter(), b.column(j).iter());
        if r.is_finite() {
            s * r
        } else {
            0.0
        }
    };
    Ok((0..original.n_modes())
        .map(|i| match mm.assignment[i] {
            None => Raw {
                untouched: 0.0,
                perturbed: 0.0,
                matched: None,
                sign: 1.0,
            },
            Some(j) => {
                let s = mm.signs[i];
                let ru = corr(&original.u, i, &pert.u, j, s);
                let rv = corr(&original.v, i, &pert.v, j, s);
                let (untouched, perturbed) = match side {
                    Side::Left => (rv, ru),
                    Side::Right => (ru, rv),
                };
                Raw {
                    untouched,
                    perturbed,
                    matched: Some(j),
                    sign: s,
                }
            }
        })
        .collect())
}

fn check_modes(model: &CcaModel, modes: usize) -> Result<()> {
    if modes == 0 || modes > model.k() {
        return Err(CcaError::Dimension(format!(
            "sensitivity requested for {modes} modes but the fitter yields {}",
            model.k()
        )));
    }
    Ok(())
}

fn side_data<'a>(x: &'a Dataset, y: &'a Dataset, side: Side) -> &'a Dataset {
    match side {
        Side::Left => x,
        Side::Right => y,
    }
}

/// Variable-deletion sensitivity: each variable (or group) on `side` is
/// deleted in turn, the model is refitted on the same rows and its variates
/// are compared to the original ones after greedy mode alignment. The
/// headline score is the mean of the untouched-side and perturbed-side
/// correlations.
pub fn sensitivity_scan<F: Fitter + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    fitter: &F,
    side: Side,
    groups: Option<&[ColumnGroup]>,
    modes: usize,
) -> Result<SensitivityReport> {
    let groups = resolve_groups(side_data(x, y, side), groups)?;
    let model = fitter.fit(x, y)?;
    check_modes(&model, modes)?;
    let original = truncate(project(&model, x, y)?, modes);
    let raws: Vec<Vec<Raw>> = groups
        .par_iter()
        .map(|g| perturbed_scores(&original, x, y, fitter, side, g))
        .collect::<Result<_>>()?;
    let variables = groups
        .into_iter()
        .zip(raws)
        .map(|(g, raw)| VariableSensitivity {
            name: g.name,
            columns: g.columns,
            modes: raw
                .into_iter()
                .enumerate()
                .map(|(i, r)| ModeScore {
                    mode: i + 1,
                    score: r.score(),
                    untouched: r.untouched,
                    perturbed: r.perturbed,
                    matched: r.matched.map(|j| j + 1),
                    sign: r.sign,
                    ci_lower: None,
                    ci_upper: None,
                })
                .collect(),
        })
        .collect();
    Ok(SensitivityReport {
        side,
        n_modes: modes,
        variables,
        n_bootstrap: 0,
        n_dropped: 0,
        seed: None,
        selection_frequency: None,
    })
}

struct Resample {
    /// [group][mode] headline score.
    scores: Vec<Vec<f64>>,
    left_nonzero: DMatrix<f64>,
    right_nonzero: DMatrix<f64>,
}

fn one_resample<F: Fitter + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    fitter: &F,
    side: Side,
    groups: &[ColumnGroup],
    modes: usize,
    seed: u64,
    b: usize,
) -> Result<Resample> {
    let n = x.n_rows();
    let mut rng = rng::stream(seed, Purpose::Bootstrap, b as u64);
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    let xb = x.select_rows(&idx);
    let yb = y.select_rows(&idx);
    let model = fitter.fit(&xb, &yb)?;
    check_modes(&model, modes)?;
    let original = truncate(project(&model, &xb, &yb)?, modes);
    let scores = groups
        .iter()
        .map(|g| Ok(perturbed_scores(&original, &xb, &yb, fitter, side, g)?.iter().map(Raw::score).collect()))
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let nz = |w: &DMatrix<f64>| w.map(|v| if v != 0.0 { 1.0 } else { 0.0 });
    Ok(Resample {
        scores,
        left_nonzero: nz(&model.x_weights),
        right_nonzero: nz(&model.y_weights),
    })
}

/// Sensitivity scan with percentile bootstrap intervals.
///
/// Each of the `b` resamples draws rows with replacement (paired across X and
/// Y), refits the original and every perturbed model on it, and records the
/// headline scores. Resamples on which any fit fails are dropped and counted.
/// Point estimates come from the full data. Sparse fitters also report
/// per-variable selection frequencies over the retained resamples.
pub fn bootstrap_sensitivity<F: Fitter + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    fitter: &F,
    side: Side,
    groups: Option<&[ColumnGroup]>,
    modes: usize,
    b: usize,
    seed: u64,
) -> Result<SensitivityReport> {
    if b < 100 {
        return Err(CcaError::Parameter(format!("bootstrap needs at least 100 resamples, got {b}")));
    }
    let mut report = sensitivity_scan(x, y, fitter, side, groups, modes)?;
    let groups: Vec<ColumnGroup> = report
        .variables
        .iter()
        .map(|v| ColumnGroup {
            name: v.name.clone(),
            columns: v.columns.clone(),
        })
        .collect();
    let draws: Vec<Option<Resample>> = (0..b)
        .into_par_iter()
        .map(|i| one_resample(x, y, fitter, side, &groups, modes, seed, i).ok())
        .collect();
    let kept: Vec<&Resample> = draws.iter().flatten().collect();
    if kept.is_empty() {
        return Err(CcaError::TooManyFailures { failed: b, total: b });
    }
    for (g, var) in report.variables.iter_mut().enumerate() {
        for (m, s) in var.modes.iter_mut().enumerate() {
            let vals: Vec<f64> = kept.iter().map(|r| r.scores[g][m]).collect();
            s.ci_lower = Some(stats::percentile(&vals, 2.5));
            s.ci_upper = Some(stats::percentile(&vals, 97.5));
        }
    }
    let full = fitter.fit(x, y)?;
    if matches!(full.variant, Variant::Sparse { .. }) {
        let mut left = DMatrix::zeros(full.p, full.k());
        let mut right = DMatrix::zeros(full.q, full.k());
        for r in &kept {
            left += &r.left_nonzero;
            right += &r.right_nonzero;
        }
        let count = kept.len() as f64;
        report.selection_frequency = Some(SelectionFrequency {
            left_columns: full.left_columns.clone(),
            right_columns: full.right_columns.clone(),
            left: left / count,
            right: right / count,
        });
    }
    report.n_bootstrap = b;
    report.n_dropped = b - kept.len();
    report.seed = Some(seed);
    Ok(report)
}

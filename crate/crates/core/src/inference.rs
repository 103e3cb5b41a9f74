//! Permutation tests, multiple-comparison correction, hold-out validation and
//! mode-count selection.
//!
//! Permutation nulls break the pairing between the sets by shuffling whole
//! rows of Y; X is never touched. Every permuted refit contributes its
//! first-mode correlation, and that single null distribution is used against
//! every observed mode (a max-statistic style test, conservative for later
//! modes).

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cca::{cca_fit, project, redundancy, CcaModel, Ridge};
use crate::data::Dataset;
use crate::error::{CcaError, Result};
use crate::linalg;
use crate::pipeline::PipelineSpec;
use crate::rng::{self, Purpose};
use crate::sparse::{scca_fit, SparseParams};

/// A model-fitting procedure that resampling routines can call repeatedly.
pub trait Fitter: Sync {
    fn fit(&self, x: &Dataset, y: &Dataset) -> Result<CcaModel>;
}

impl<F> Fitter for F
where
    F: Fn(&Dataset, &Dataset) -> Result<CcaModel> + Sync,
{
    fn fit(&self, x: &Dataset, y: &Dataset) -> Result<CcaModel> {
        self(x, y)
    }
}

/// The built-in model variants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum FitterSpec {
    Classical { k: usize },
    Ridge { k: usize, lambda_x: f64, lambda_y: f64 },
    Sparse(SparseParams),
}

impl FitterSpec {
    pub fn k(&self) -> usize {
        match self {
            Self::Classical { k } | Self::Ridge { k, .. } => *k,
            Self::Sparse(p) => p.k,
        }
    }
}

impl Fitter for FitterSpec {
    fn fit(&self, x: &Dataset, y: &Dataset) -> Result<CcaModel> {
        match *self {
            Self::Classical { k } => cca_fit(x, y, k, None),
            Self::Ridge { k, lambda_x, lambda_y } => cca_fit(x, y, k, Some(Ridge::new(lambda_x, lambda_y))),
            Self::Sparse(ref p) => scca_fit(x, y, p),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Correction {
    Bonferroni,
    #[default]
    FdrBh,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed: Vec<f64>,
    /// First-mode statistic of every successful permuted refit, in iteration order.
    pub null_samples: Vec<f64>,
    pub p_raw: Vec<f64>,
    pub p_corrected: Vec<f64>,
    pub correction: Correction,
    pub seed: u64,
    pub n_perm: usize,
    /// Replicates whose refit failed; excluded from the null.
    pub n_failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoldoutResult {
    pub split: f64,
    pub n_train: usize,
    pub n_holdout: usize,
    pub train_model: CcaModel,
    /// Per-mode Pearson correlation of the projected hold-out variates. Sign is
    /// preserved: hold-out projections can anticorrelate.
    pub holdout_correlations: Vec<f64>,
    /// Empty when `n_perm` is zero.
    pub holdout_p_values: Vec<f64>,
    pub n_perm: usize,
    pub seed: u64,
}

/// `(1 + #{null ≥ observed}) / (1 + n_null)`, never zero.
pub fn empirical_p(null: &[f64], observed: f64) -> f64 {
    let exceed = null.iter().filter(|&&s| s >= observed).count();
    (1 + exceed) as f64 / (1 + null.len()) as f64
}

fn permuted_rows(n: usize, seed: u64, purpose: Purpose, index: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, purpose, index));
    idx
}

pub fn permutation_test<F: Fitter + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    fitter: &F,
    n_perm: usize,
    seed: u64,
    correction: Correction,
) -> Result<PermutationResult> {
    if n_perm < 99 {
        return Err(CcaError::Parameter(format!(
            "permutation test needs at least 99 permutations, got {n_perm}"
        )));
    }
    let observed = fitter.fit(x, y)?.correlations;
    let n = y.n_rows();
    let draws: Vec<Option<f64>> = (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let yp = y.select_rows(&permuted_rows(n, seed, Purpose::Permutation, i as u64));
            fitter.fit(x, &yp).ok().map(|m| m.correlations[0])
        })
        .collect();
    let null_samples: Vec<f64> = draws.iter().flatten().copied().collect();
    let n_failed = n_perm - null_samples.len();
    if n_failed * 10 > n_perm {
        return Err(CcaError::TooManyFailures {
            failed: n_failed,
            total: n_perm,
        });
    }
    let p_raw: Vec<f64> = observed.iter().map(|&o| empirical_p(&null_samples, o)).collect();
    let p_corrected = correct_pvalues(&p_raw, correction);
    Ok(PermutationResult {
        observed,
        null_samples,
        p_raw,
        p_corrected,
        correction,
        seed,
        n_perm,
        n_failed,
    })
}

/// Bonferroni (`min(1, k·p)`) or Benjamini-Hochberg step-up adjusted p-values.
pub fn correct_pvalues(p: &[f64], method: Correction) -> Vec<f64> {
    let k = p.len() as f64;
    match method {
        Correction::None => p.to_vec(),
        Correction::Bonferroni => p.iter().map(|v| (v * k).min(1.0)).collect(),
        Correction::FdrBh => {
            let mut order: Vec<usize> = (0..p.len()).collect();
            order.sort_by(|&a, &b| p[a].total_cmp(&p[b]).then(a.cmp(&b)));
            let mut adjusted = vec![0.0; p.len()];
            let mut running = 1.0f64;
            for (rank, &i) in order.iter().enumerate().rev() {
                running = running.min(p[i] * k / (rank + 1) as f64);
                adjusted[i] = running.min(1.0);
            }
            adjusted
        }
    }
}

/// Train/hold-out validation.
///
/// Rows are split at random (`split` is the training fraction), the pipeline
/// is fitted on the training rows only and frozen for the hold-out rows, the
/// model is fitted on the training design and the hold-out rows are projected
/// through the training canonical vectors. Hold-out p-values permute the
/// hold-out Y rows and recompute each mode's projected correlation.
pub fn holdout_validate<F: Fitter + ?Sized>(
    x: &Dataset,
    y: &Dataset,
    confounds: Option<&Dataset>,
    pipeline: &PipelineSpec,
    fitter: &F,
    split: f64,
    n_perm: usize,
    seed: u64,
) -> Result<HoldoutResult> {
    if !(split > 0.0 && split < 1.0) {
        return Err(CcaError::Parameter(format!("hold-out split must lie in (0, 1), got {split}")));
    }
    let n = x.n_rows();
    let n_train = (split * n as f64).round() as usize;
    if n_train < 3 || n - n_train < 3 {
        return Err(CcaError::Dimension(format!(
            "split {split} of {n} rows leaves a partition with fewer than 3 rows"
        )));
    }
    let order = permuted_rows(n, seed, Purpose::HoldoutSplit, 0);
    let mut train: Vec<usize> = order[..n_train].to_vec();
    let mut test: Vec<usize> = order[n_train..].to_vec();
    train.sort_unstable();
    test.sort_unstable();

    let conf_train = confounds.map(|c| c.select_rows(&train));
    let conf_test = confounds.map(|c| c.select_rows(&test));
    let (fitted, prep) = pipeline.fit(&x.select_rows(&train), &y.select_rows(&train), conf_train.as_ref())?;
    let model = fitter.fit(&prep.x, &prep.y)?.with_preprocessing(fitted.clone());
    let held = fitted.apply(&x.select_rows(&test), &y.select_rows(&test), conf_test.as_ref())?;
    let var = project(&model, &held.x, &held.y)?;
    let holdout_correlations = var.correlations();

    let holdout_p_values = if n_perm == 0 {
        Vec::new()
    } else {
        let m = var.v.nrows();
        let nulls: Vec<Vec<f64>> = (0..n_perm)
            .into_par_iter()
            .map(|i| {
                let idx = permuted_rows(m, seed, Purpose::HoldoutPermutation, i as u64);
                linalg::paired_correlations(&var.u, &var.v.select_rows(&idx))
            })
            .collect();
        holdout_correlations
            .iter()
            .enumerate()
            .map(|(mode, &obs)| {
                let null: Vec<f64> = nulls.iter().map(|r| r[mode]).collect();
                empirical_p(&null, obs)
            })
            .collect()
    };

    Ok(HoldoutResult {
        split,
        n_train: prep.x.n_rows(),
        n_holdout: held.x.n_rows(),
        train_model: model,
        holdout_correlations,
        holdout_p_values,
        n_perm,
        seed,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SelectionStrategy {
    Permutation {
        alpha: f64,
        n_perm: usize,
        seed: u64,
        correction: Correction,
    },
    RedundancyDrop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeSelection {
    pub strategy: SelectionStrategy,
    /// Modes passing the permutation test, or the candidate cut-off for the
    /// redundancy strategy. The redundancy cut-off is advisory only.
    pub selected: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub permutation: Option<PermutationResult>,
    /// Mean of left/right redundancy per mode.
    pub redundancy_curve: Vec<f64>,
    /// Relative drop `(R_i - R_{i+1}) / R_i` between consecutive modes.
    pub relative_drops: Vec<f64>,
    pub candidate_cutoff: usize,
}

/// Largest mode count before the maximum single-step relative drop.
pub fn redundancy_cutoff(curve: &[f64]) -> (Vec<f64>, usize) {
    let drops: Vec<f64> = curve
        .windows(2)
        .map(|w| if w[0] > 0.0 { (w[0] - w[1]) / w[0] } else { 0.0 })
        .collect();
    let mut best = 0;
    for (i, d) in drops.iter().enumerate() {
        if *d > drops[best] {
            best = i;
        }
    }
    let cutoff = if drops.is_empty() { curve.len() } else { best + 1 };
    (drops, cutoff)
}

pub fn select_modes<F: Fitter + ?Sized>(
    model: &CcaModel,
    x: &Dataset,
    y: &Dataset,
    fitter: &F,
    strategy: SelectionStrategy,
) -> Result<ModeSelection> {
    let curve = redundancy(model, x, y, model.k())?.combined();
    let (relative_drops, candidate_cutoff) = redundancy_cutoff(&curve);
    let (selected, permutation) = match strategy {
        SelectionStrategy::RedundancyDrop => (candidate_cutoff, None),
        SelectionStrategy::Permutation {
            alpha,
            n_perm,
            seed,
            correction,
        } => {
            let res = permutation_test(x, y, fitter, n_perm, seed, correction)?;
            let count = res.p_corrected.iter().filter(|&&p| p < alpha).count();
            (count, Some(res))
        }
    };
    Ok(ModeSelection {
        strategy,
        selected,
        permutation,
        redundancy_curve: curve,
        relative_drops,
        candidate_cutoff,
    })
}

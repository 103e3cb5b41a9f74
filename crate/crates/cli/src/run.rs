use std::path::{Path, PathBuf};
use std::time::Instant;

use ccakit::cca::{Loadings, Redundancy};
use ccakit::data::{format_float, load_csv};
use ccakit::diagnostics::{
    bootstrap_sensitivity, ica_postprocess, sensitivity_scan, ColumnGroup, IcaOptions, SensitivityReport, Side,
};
use ccakit::inference::{holdout_validate, permutation_test, redundancy_cutoff, PermutationResult};
use ccakit::pipeline::{FittedPipeline, Prepared};
use ccakit::synth::{generate, SynthSpec};
use ccakit::{
    project, redundancy, split, structure_correlations, CcaError, CcaModel, Dataset, Fitter, Result,
    VariableSplit,
};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::cli::{ScanArgs, SynthArgs};
use crate::config::{ModelConfig, PipelineConfig};
use crate::error::{CliError, StageExt};
use crate::output;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Run,
    Fit,
    Permute,
    Holdout,
    Sensitivity,
    ScanSparsity,
}

impl Mode {
    fn name(self) -> &'static str {
        match self {
            Mode::Run => "run",
            Mode::Fit => "fit",
            Mode::Permute => "permute",
            Mode::Holdout => "holdout",
            Mode::Sensitivity => "sensitivity",
            Mode::ScanSparsity => "scan-sparsity",
        }
    }
}

#[derive(Debug, Serialize)]
struct DataSummary {
    input_rows: usize,
    used_rows: usize,
    left_input_columns: Vec<String>,
    right_input_columns: Vec<String>,
    confound_columns: Vec<String>,
    p: usize,
    q: usize,
}

#[derive(Debug, Serialize)]
struct InSample {
    /// Training-data canonical correlations; optimistic by construction.
    in_sample_correlations: Vec<f64>,
    redundancy: Redundancy,
    redundancy_combined: Vec<f64>,
    redundancy_relative_drops: Vec<f64>,
    /// Mode count before the largest relative drop in redundancy (advisory).
    redundancy_candidate_cutoff: usize,
    /// Modes with corrected permutation p-value below alpha.
    #[serde(skip_serializing_if = "Option::is_none")]
    significant_modes: Option<usize>,
}

#[derive(Debug, Serialize)]
struct HoldoutSummary {
    split: f64,
    n_train: usize,
    n_holdout: usize,
    /// Correlations of the training fit on its own rows.
    train_in_sample_correlations: Vec<f64>,
    /// Correlations of the projected hold-out rows; the unbiased estimate.
    holdout_correlations: Vec<f64>,
    holdout_p_values: Vec<f64>,
    n_perm: usize,
}

#[derive(Debug, Serialize)]
struct IcaSummary {
    components: usize,
    #[serde(serialize_with = "rows")]
    mixing: DMatrix<f64>,
    converged: bool,
    iterations: usize,
}

fn rows<S: serde::Serializer>(m: &DMatrix<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    let nested: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
    nested.serialize(s)
}

#[derive(Debug, Serialize)]
struct ScanPoint {
    c1: f64,
    c2: f64,
    train_in_sample_r1: f64,
    holdout_r1: f64,
    nonzero_x: usize,
    nonzero_y: usize,
}

#[derive(Debug, Serialize)]
struct Report {
    format_version: &'static str,
    software_version: &'static str,
    command: &'static str,
    seed: u64,
    config: PipelineConfig,
    /// Executed stages in order; wall-clock timings go to timings.json.
    stages: Vec<&'static str>,
    data: DataSummary,
    #[serde(skip_serializing_if = "Option::is_none")]
    model: Option<CcaModel>,
    #[serde(skip_serializing_if = "Option::is_none")]
    in_sample: Option<InSample>,
    #[serde(skip_serializing_if = "Option::is_none")]
    loadings: Option<Loadings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    original_space_loadings: Option<Loadings>,
    #[serde(skip_serializing_if = "Option::is_none")]
    permutation: Option<PermutationResult>,
    #[serde(skip_serializing_if = "Option::is_none")]
    holdout: Option<HoldoutSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sensitivity: Vec<SensitivityReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ica: Option<IcaSummary>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    sparsity_scan: Vec<ScanPoint>,
}

#[derive(Debug, Serialize)]
struct Timing {
    stage: &'static str,
    seconds: f64,
}

#[derive(Default)]
struct Stages {
    done: Vec<&'static str>,
    timings: Vec<Timing>,
}

impl Stages {
    fn run<T>(&mut self, name: &'static str, f: impl FnOnce() -> Result<T>) -> std::result::Result<T, CliError> {
        let start = Instant::now();
        let out = f().stage(name)?;
        self.done.push(name);
        self.timings.push(Timing {
            stage: name,
            seconds: start.elapsed().as_secs_f64(),
        });
        Ok(out)
    }
}

struct Inputs {
    x: Dataset,
    y: Dataset,
    confounds: Option<Dataset>,
}

fn load_inputs(cfg: &PipelineConfig) -> Result<Inputs> {
    let i = &cfg.input;
    let token = i.missing_token.as_str();
    let (x, y, combined) = match &i.path {
        Some(path) => {
            let ds = load_csv(path, token)?;
            let (x, y) = split(
                &ds,
                &VariableSplit {
                    left_columns: i.left.clone(),
                    right_columns: i.right.clone(),
                },
            )?;
            (x, y, Some(ds))
        }
        None => {
            let x = load_csv(i.left_path.as_deref().expect("validated"), token)?;
            let y = load_csv(i.right_path.as_deref().expect("validated"), token)?;
            if x.n_rows() != y.n_rows() {
                return Err(CcaError::Schema(format!(
                    "left input has {} rows but right input has {}",
                    x.n_rows(),
                    y.n_rows()
                )));
            }
            (x, y, None)
        }
    };
    let confounds = if i.confounds.is_empty() {
        None
    } else {
        let source = match &i.confounds_path {
            Some(p) => load_csv(p, token)?,
            None => combined.expect("validated"),
        };
        if source.n_rows() != x.n_rows() {
            return Err(CcaError::Schema("confound rows differ from the data rows".into()));
        }
        for c in &i.confounds {
            if x.column_index(c).is_some() || y.column_index(c).is_some() {
                return Err(CcaError::OverlappingColumn(c.clone()));
            }
        }
        Some(source.select_columns(&i.confounds)?)
    };
    Ok(Inputs { x, y, confounds })
}

/// Fitter that resolves a default `k` from the design it is given, so refits on
/// reduced designs (deletions, hold-out training rows) stay valid.
fn fitter_for(model: ModelConfig) -> impl Fn(&Dataset, &Dataset) -> Result<CcaModel> + Sync {
    move |x: &Dataset, y: &Dataset| model.fitter(x.n_cols(), y.n_cols()).fit(x, y)
}

fn resolve_groups(
    groups: Option<Vec<ColumnGroup>>,
    sides: &[Side],
    x: &Dataset,
    y: &Dataset,
) -> Result<Vec<(Side, Option<Vec<ColumnGroup>>)>> {
    let Some(groups) = groups else {
        return Ok(sides.iter().map(|s| (*s, None)).collect());
    };
    let mut left = Vec::new();
    let mut right = Vec::new();
    for g in groups {
        if g.columns.iter().all(|c| x.column_index(c).is_some()) {
            left.push(g);
        } else if g.columns.iter().all(|c| y.column_index(c).is_some()) {
            right.push(g);
        } else {
            return Err(CcaError::UnknownColumn(format!(
                "group '{}' does not lie entirely within one design set",
                g.name
            )));
        }
    }
    let mut out = Vec::new();
    if !left.is_empty() {
        out.push((Side::Left, Some(left)));
    }
    if !right.is_empty() {
        out.push((Side::Right, Some(right)));
    }
    Ok(out)
}

/// Standardized design before PCA, for original-space loadings.
fn pre_pca(fitted: &FittedPipeline, inputs: &Inputs) -> Result<Option<Prepared>> {
    if fitted.left.pca.is_none() && fitted.right.pca.is_none() {
        return Ok(None);
    }
    let mut unreduced = fitted.clone();
    unreduced.left.pca = None;
    unreduced.right.pca = None;
    unreduced
        .apply(&inputs.x, &inputs.y, inputs.confounds.as_ref())
        .map(Some)
}

fn original_loadings(model: &CcaModel, fitted: &FittedPipeline, inputs: &Inputs, prep: &Prepared) -> Result<Option<Loadings>> {
    let Some(full) = pre_pca(fitted, inputs)? else {
        return Ok(None);
    };
    let v = project(model, &prep.x, &prep.y)?;
    let corr = ccakit::linalg::column_correlations;
    Ok(Some(Loadings {
        left_columns: full.x.names().to_vec(),
        right_columns: full.y.names().to_vec(),
        left_same: corr(full.x.values(), &v.u),
        left_cross: corr(full.x.values(), &v.v),
        right_same: corr(full.y.values(), &v.v),
        right_cross: corr(full.y.values(), &v.u),
    }))
}

fn output_dir(cfg: &PipelineConfig) -> std::result::Result<PathBuf, CliError> {
    let dir = cfg
        .output_dir
        .clone()
        .ok_or_else(|| CliError::Config("an output directory is required (--output-dir)".into()))?;
    std::fs::create_dir_all(&dir)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", dir.display())))?;
    Ok(dir)
}

pub fn analyze(mode: Mode, mut cfg: PipelineConfig, scan: Option<&ScanArgs>) -> std::result::Result<(), CliError> {
    if let Some(s) = scan {
        if !s.c1_grid.is_empty() {
            cfg.scan.c1_grid = s.c1_grid.clone();
        }
        if !s.c2_grid.is_empty() {
            cfg.scan.c2_grid = s.c2_grid.clone();
        }
    }
    if mode == Mode::Holdout && cfg.inference.holdout_split.is_none() {
        cfg.inference.holdout_split = Some(0.8);
    }
    if mode == Mode::ScanSparsity {
        if cfg.scan.c1_grid.is_empty() || cfg.scan.c2_grid.is_empty() {
            return Err(CliError::Config("scan-sparsity needs --c1-grid and --c2-grid".into()));
        }
        if !matches!(cfg.model, ModelConfig::Sparse { .. }) {
            cfg.model = ModelConfig::Sparse {
                k: cfg.model.k(),
                c1: cfg.scan.c1_grid[0],
                c2: cfg.scan.c2_grid[0],
                max_iter: None,
                tol: None,
                init: None,
            };
        }
    }
    let seed = cfg.validate()?;
    let dir = output_dir(&cfg)?;
    let mut stages = Stages::default();

    let inputs = stages.run("load", || load_inputs(&cfg))?;
    let pipeline = cfg.pipeline();
    let (fitted, prep) = stages.run("preprocess", || pipeline.fit(&inputs.x, &inputs.y, inputs.confounds.as_ref()))?;
    let fitter = fitter_for(cfg.model);

    let mut report = Report {
        format_version: ccakit::FORMAT_VERSION,
        software_version: env!("CARGO_PKG_VERSION"),
        command: mode.name(),
        seed,
        config: cfg.clone(),
        stages: Vec::new(),
        data: DataSummary {
            input_rows: inputs.x.n_rows(),
            used_rows: prep.x.n_rows(),
            left_input_columns: inputs.x.names().to_vec(),
            right_input_columns: inputs.y.names().to_vec(),
            confound_columns: cfg.input.confounds.clone(),
            p: prep.x.n_cols(),
            q: prep.y.n_cols(),
        },
        model: None,
        in_sample: None,
        loadings: None,
        original_space_loadings: None,
        permutation: None,
        holdout: None,
        sensitivity: Vec::new(),
        ica: None,
        sparsity_scan: Vec::new(),
    };

    if mode == Mode::ScanSparsity {
        let grid: Vec<(f64, f64)> = cfg
            .scan
            .c1_grid
            .iter()
            .flat_map(|&a| cfg.scan.c2_grid.iter().map(move |&b| (a, b)))
            .collect();
        let base = cfg.model;
        let points = stages.run("sparsity_scan", || {
            grid.par_iter()
                .map(|&(c1, c2)| {
                    let model = match base {
                        ModelConfig::Sparse {
                            k, max_iter, tol, init, ..
                        } => ModelConfig::Sparse {
                            k,
                            c1,
                            c2,
                            max_iter,
                            tol,
                            init,
                        },
                        other => other,
                    };
                    let h = holdout_validate(
                        &inputs.x,
                        &inputs.y,
                        inputs.confounds.as_ref(),
                        &pipeline,
                        &fitter_for(model),
                        cfg.scan.split,
                        0,
                        seed,
                    )?;
                    let info = &h.train_model.sparse_modes.as_ref().expect("sparse fit")[0];
                    Ok(ScanPoint {
                        c1,
                        c2,
                        train_in_sample_r1: h.train_model.correlations[0],
                        holdout_r1: h.holdout_correlations[0],
                        nonzero_x: info.nonzero_x,
                        nonzero_y: info.nonzero_y,
                    })
                })
                .collect::<Result<Vec<_>>>()
        })?;
        let rows: Vec<Vec<String>> = points
            .iter()
            .map(|p| {
                vec![
                    format_float(p.c1),
                    format_float(p.c2),
                    format_float(p.train_in_sample_r1),
                    format_float(p.holdout_r1),
                    p.nonzero_x.to_string(),
                    p.nonzero_y.to_string(),
                ]
            })
            .collect();
        output::write_table(
            &dir,
            "sparsity_scan.csv",
            &["c1", "c2", "train_in_sample_r1", "holdout_r1", "nonzero_x", "nonzero_y"],
            &rows,
        )?;
        report.sparsity_scan = points;
        return finish(&dir, report, stages);
    }

    let model = stages.run("fit", || Ok(fitter.fit(&prep.x, &prep.y)?.with_preprocessing(fitted.clone())))?;
    let variates = stages.run("project", || project(&model, &prep.x, &prep.y))?;
    let loadings = stages.run("loadings", || structure_correlations(&model, &prep.x, &prep.y))?;
    let original = if fitted.left.pca.is_some() || fitted.right.pca.is_some() {
        stages.run("original_loadings", || original_loadings(&model, &fitted, &inputs, &prep))?
    } else {
        None
    };
    let red = stages.run("redundancy", || redundancy(&model, &prep.x, &prep.y, model.k()))?;
    let combined = red.combined();
    let (drops, cutoff) = redundancy_cutoff(&combined);
    let mut in_sample = InSample {
        in_sample_correlations: model.correlations.clone(),
        redundancy: red,
        redundancy_combined: combined,
        redundancy_relative_drops: drops,
        redundancy_candidate_cutoff: cutoff,
        significant_modes: None,
    };

    let want_perm = match mode {
        Mode::Run => cfg.inference.n_perm > 0,
        Mode::Permute => true,
        _ => false,
    };
    if want_perm {
        let n_perm = if cfg.inference.n_perm == 0 { 999 } else { cfg.inference.n_perm };
        let perm = stages.run("permutation", || {
            permutation_test(&prep.x, &prep.y, &fitter, n_perm, seed, cfg.inference.correction)
        })?;
        in_sample.significant_modes = Some(perm.p_corrected.iter().filter(|p| **p < cfg.inference.alpha).count());
        output::write_null(&dir, &perm)?;
        report.permutation = Some(perm);
    }

    let want_holdout = matches!(mode, Mode::Run | Mode::Holdout) && cfg.inference.holdout_split.is_some();
    if want_holdout {
        let split = cfg.inference.holdout_split.expect("checked");
        let h = stages.run("holdout", || {
            holdout_validate(
                &inputs.x,
                &inputs.y,
                inputs.confounds.as_ref(),
                &pipeline,
                &fitter,
                split,
                cfg.inference.holdout_n_perm,
                seed,
            )
        })?;
        report.holdout = Some(HoldoutSummary {
            split,
            n_train: h.n_train,
            n_holdout: h.n_holdout,
            train_in_sample_correlations: h.train_model.correlations.clone(),
            holdout_correlations: h.holdout_correlations,
            holdout_p_values: h.holdout_p_values,
            n_perm: h.n_perm,
        });
    }

    let want_sensitivity = match mode {
        Mode::Run => cfg.diagnostics.sensitivity,
        Mode::Sensitivity => true,
        _ => false,
    };
    if want_sensitivity {
        let groups = cfg.load_groups()?;
        let modes = cfg.diagnostics.modes.unwrap_or(model.k());
        let b = cfg.diagnostics.bootstrap;
        let reports = stages.run("sensitivity", || {
            resolve_groups(groups, &cfg.diagnostics.sides, &prep.x, &prep.y)?
                .into_iter()
                .map(|(side, g)| {
                    if b > 0 {
                        bootstrap_sensitivity(&prep.x, &prep.y, &fitter, side, g.as_deref(), modes, b, seed)
                    } else {
                        sensitivity_scan(&prep.x, &prep.y, &fitter, side, g.as_deref(), modes)
                    }
                })
                .collect::<Result<Vec<_>>>()
        })?;
        output::write_sensitivity(&dir, &reports)?;
        report.sensitivity = reports;
    }

    if mode == Mode::Run {
        if let Some(r) = cfg.diagnostics.ica_components {
            let ica = stages.run("ica", || ica_postprocess(&variates, r, seed, IcaOptions::default()))?;
            output::write_sources(&dir, &ica.sources, &prep.retained_rows)?;
            report.ica = Some(IcaSummary {
                components: r,
                mixing: ica.mixing,
                converged: ica.converged,
                iterations: ica.iterations,
            });
        }
    }

    output::write_weights(&dir, &model)?;
    let mut sets = vec![("design", &loadings)];
    if let Some(o) = &original {
        sets.push(("original", o));
    }
    output::write_loadings(&dir, &sets)?;
    output::write_variates(&dir, &variates, &prep.retained_rows)?;

    report.model = Some(model);
    report.in_sample = Some(in_sample);
    report.loadings = Some(loadings);
    report.original_space_loadings = original;
    finish(&dir, report, stages)
}

fn finish(dir: &Path, mut report: Report, stages: Stages) -> std::result::Result<(), CliError> {
    report.stages = stages.done;
    output::write_json(dir, "report.json", &report)?;
    output::write_json(dir, "timings.json", &stages.timings)
}

#[derive(Serialize)]
struct SynthOutput<'a> {
    format_version: &'static str,
    spec: &'a SynthSpec,
    rho: &'a [f64],
    #[serde(serialize_with = "rows")]
    x_weights: DMatrix<f64>,
    #[serde(serialize_with = "rows")]
    y_weights: DMatrix<f64>,
}

pub fn synth(args: &SynthArgs) -> std::result::Result<(), CliError> {
    let spec = SynthSpec::new(args.n, args.p, args.q, args.rho.clone(), args.rotate, args.seed).stage("synth")?;
    let data = generate(&spec).stage("synth")?;
    std::fs::create_dir_all(&args.output_dir)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", args.output_dir.display())))?;
    data.x.save_csv(&args.output_dir.join("x.csv"), "NA").stage("write")?;
    data.y.save_csv(&args.output_dir.join("y.csv"), "NA").stage("write")?;
    output::write_json(
        &args.output_dir,
        "truth.json",
        &SynthOutput {
            format_version: ccakit::FORMAT_VERSION,
            spec: &spec,
            rho: &data.truth.rho,
            x_weights: data.truth.x_weights.clone(),
            y_weights: data.truth.y_weights.clone(),
        },
    )
}

use std::path::PathBuf;

use ccakit::inference::Correction;
use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "ccakit", version, about = "Canonical correlation analysis pipeline for tabular data")]
pub struct Cli {
    /// Worker threads for resampling stages (results do not depend on it).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Full pipeline: fit, permutation test, optional hold-out, sensitivity, optional ICA.
    Run(Overrides),
    /// Preprocess and fit; writes weights, loadings and variates.
    Fit(Overrides),
    /// Fit plus permutation test (default 999 permutations).
    Permute(Overrides),
    /// Fit plus train/hold-out validation (default split 0.8).
    Holdout(Overrides),
    /// Fit plus variable-deletion sensitivity.
    Sensitivity(Overrides),
    /// Sparse (c1, c2) grid with the hold-out first-mode correlation at each point.
    ScanSparsity(ScanArgs),
    /// Generate planted-mode data: x.csv, y.csv and truth.json.
    Synth(SynthArgs),
}

fn parse_correction(s: &str) -> Result<Correction, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown correction '{s}' (bonferroni, fdr_bh, none)"))
}

/// Flags shared by the analysis subcommands. Each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// JSON pipeline configuration.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Single CSV holding both variable sets.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// CSV holding the left set only.
    #[arg(long)]
    pub left_input: Option<PathBuf>,
    /// CSV holding the right set only.
    #[arg(long)]
    pub right_input: Option<PathBuf>,
    /// Comma-separated left-set columns of --input.
    #[arg(long)]
    pub left: Option<String>,
    /// Comma-separated right-set columns of --input.
    #[arg(long)]
    pub right: Option<String>,
    /// Comma-separated confound columns.
    #[arg(long)]
    pub confounds: Option<String>,
    /// CSV holding the confound columns, if not in --input.
    #[arg(long)]
    pub confounds_input: Option<PathBuf>,
    #[arg(long)]
    pub missing_token: Option<String>,
    /// Number of canonical modes.
    #[arg(long)]
    pub k: Option<usize>,
    /// Ridge penalty for both sets.
    #[arg(long)]
    pub ridge: Option<f64>,
    #[arg(long)]
    pub sparse_c1: Option<f64>,
    #[arg(long)]
    pub sparse_c2: Option<f64>,
    /// Reduce each set to this many principal components.
    #[arg(long)]
    pub pca_components: Option<usize>,
    /// Reduce each set to the components explaining this variance fraction.
    #[arg(long)]
    pub pca_variance: Option<f64>,
    /// Keep the N columns per set with the largest median absolute deviation.
    #[arg(long)]
    pub dispersion_top: Option<usize>,
    #[arg(long)]
    pub n_perm: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long, value_parser = parse_correction)]
    pub correction: Option<Correction>,
    /// Training fraction for hold-out validation.
    #[arg(long)]
    pub split: Option<f64>,
    /// Bootstrap resamples for sensitivity intervals.
    #[arg(long)]
    pub bootstrap: Option<usize>,
    /// JSON list of named column groups for sensitivity.
    #[arg(long)]
    pub groups: Option<PathBuf>,
    /// ICA components on the concatenated canonical variates.
    #[arg(long)]
    pub ica_components: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct ScanArgs {
    #[command(flatten)]
    pub common: Overrides,
    /// Comma-separated c1 values.
    #[arg(long, value_delimiter = ',')]
    pub c1_grid: Vec<f64>,
    /// Comma-separated c2 values.
    #[arg(long, value_delimiter = ',')]
    pub c2_grid: Vec<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 5)]
    pub p: usize,
    #[arg(long, default_value_t = 5)]
    pub q: usize,
    /// Comma-separated planted canonical correlations.
    #[arg(long, value_delimiter = ',', default_value = "0.8")]
    pub rho: Vec<f64>,
    /// Apply random orthogonal rotations so modes are spread over all columns.
    #[arg(long)]
    pub rotate: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub output_dir: PathBuf,
}

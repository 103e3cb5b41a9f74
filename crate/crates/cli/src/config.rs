use std::path::{Path, PathBuf};

use ccakit::diagnostics::{ColumnGroup, Side};
use ccakit::inference::Correction;
use ccakit::pipeline::{PipelineSpec, PreprocessConfig, SideOptions};
use ccakit::reduce::PcaTarget;
use ccakit::sparse::SparseInit;
use ccakit::{FitterSpec, SparseParams};
use serde::{Deserialize, Serialize};

use crate::cli::Overrides;
use crate::error::CliError;

pub const SCHEMA_VERSION: &str = "ccakit-config-1";

/// Resolved run configuration. Every analysis parameter that influences the
/// report lives here, and the report echoes it verbatim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    #[serde(default = "schema_version")]
    pub schema_version: String,
    /// Master seed for every random stream. Mandatory.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub input: InputConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub left: SideOptions,
    #[serde(default)]
    pub right: SideOptions,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub inference: InferenceConfig,
    #[serde(default)]
    pub diagnostics: DiagnosticsConfig,
    #[serde(default)]
    pub scan: ScanConfig,
    /// Where outputs go; not echoed so reports do not depend on it.
    #[serde(default, skip_serializing)]
    pub output_dir: Option<PathBuf>,
}

fn schema_version() -> String {
    SCHEMA_VERSION.to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InputConfig {
    /// One CSV holding both sets; requires `left` and `right` column lists.
    pub path: Option<PathBuf>,
    /// Separate CSVs, one per set; every column belongs to its file's side.
    pub left_path: Option<PathBuf>,
    pub right_path: Option<PathBuf>,
    pub left: Vec<String>,
    pub right: Vec<String>,
    /// Confound columns, read from `confounds_path` or else from `path`.
    pub confounds: Vec<String>,
    pub confounds_path: Option<PathBuf>,
    pub missing_token: String,
}

impl Default for InputConfig {
    fn default() -> Self {
        Self {
            path: None,
            left_path: None,
            right_path: None,
            left: Vec::new(),
            right: Vec::new(),
            confounds: Vec::new(),
            confounds_path: None,
            missing_token: missing_token(),
        }
    }
}

fn missing_token() -> String {
    "NA".to_string()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelConfig {
    /// `k` defaults to `min(p, q)`.
    Classical {
        #[serde(default)]
        k: Option<usize>,
    },
    Ridge {
        #[serde(default)]
        k: Option<usize>,
        lambda_x: f64,
        lambda_y: f64,
    },
    /// `k` defaults to 1.
    Sparse {
        #[serde(default)]
        k: Option<usize>,
        c1: f64,
        c2: f64,
        #[serde(default)]
        max_iter: Option<usize>,
        #[serde(default)]
        tol: Option<f64>,
        #[serde(default)]
        init: Option<SparseInit>,
    },
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self::Classical { k: None }
    }
}

impl ModelConfig {
    pub fn k(&self) -> Option<usize> {
        match *self {
            Self::Classical { k } | Self::Ridge { k, .. } | Self::Sparse { k, .. } => k,
        }
    }

    fn set_k(&mut self, value: usize) {
        match self {
            Self::Classical { k } | Self::Ridge { k, .. } | Self::Sparse { k, .. } => *k = Some(value),
        }
    }

    /// Concrete fitter for a design with `p` and `q` columns.
    pub fn fitter(&self, p: usize, q: usize) -> FitterSpec {
        match *self {
            Self::Classical { k } => FitterSpec::Classical {
                k: k.unwrap_or(p.min(q)),
            },
            Self::Ridge { k, lambda_x, lambda_y } => FitterSpec::Ridge {
                k: k.unwrap_or(p.min(q)),
                lambda_x,
                lambda_y,
            },
            Self::Sparse {
                k,
                c1,
                c2,
                max_iter,
                tol,
                init,
            } => {
                let mut params = SparseParams::new(c1, c2, k.unwrap_or(1));
                if let Some(m) = max_iter {
                    params.max_iter = m;
                }
                if let Some(t) = tol {
                    params.tol = t;
                }
                if let Some(i) = init {
                    params.init = i;
                }
                FitterSpec::Sparse(params)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InferenceConfig {
    /// Permutations for the in-sample test; 0 disables it.
    pub n_perm: usize,
    pub alpha: f64,
    pub correction: Correction,
    /// Training fraction for hold-out validation; `None` disables it.
    pub holdout_split: Option<f64>,
    /// Permutations of the hold-out rows; 0 skips hold-out p-values.
    pub holdout_n_perm: usize,
}

impl Default for InferenceConfig {
    fn default() -> Self {
        Self {
            n_perm: 999,
            alpha: 0.05,
            correction: Correction::FdrBh,
            holdout_split: None,
            holdout_n_perm: 999,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiagnosticsConfig {
    pub sensitivity: bool,
    pub sides: Vec<Side>,
    /// JSON file with a list of `{"name", "columns"}` groups. Each group is
    /// scanned on the side that holds its columns.
    pub groups_file: Option<PathBuf>,
    /// Modes to score; defaults to the model's k.
    pub modes: Option<usize>,
    /// Bootstrap resamples for score intervals; 0 disables them.
    pub bootstrap: usize,
    /// ICA components on the concatenated variates; `None` disables ICA.
    pub ica_components: Option<usize>,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self {
            sensitivity: true,
            sides: vec![Side::Left, Side::Right],
            groups_file: None,
            modes: None,
            bootstrap: 0,
            ica_components: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub c1_grid: Vec<f64>,
    pub c2_grid: Vec<f64>,
    /// Training fraction used at every grid point.
    pub split: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            c1_grid: Vec::new(),
            c2_grid: Vec::new(),
            split: 0.8,
        }
    }
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            schema_version: schema_version(),
            seed: None,
            input: InputConfig::default(),
            preprocess: PreprocessConfig::default(),
            left: SideOptions::default(),
            right: SideOptions::default(),
            model: ModelConfig::default(),
            inference: InferenceConfig::default(),
            diagnostics: DiagnosticsConfig::default(),
            scan: ScanConfig::default(),
            output_dir: None,
        }
    }
}

fn list(text: &str) -> Vec<String> {
    text.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

impl PipelineConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Applies command-line flags on top of the file values.
    pub fn apply(&mut self, o: &Overrides) -> Result<(), CliError> {
        if let Some(p) = &o.input {
            self.input.path = Some(p.clone());
        }
        if let Some(p) = &o.left_input {
            self.input.left_path = Some(p.clone());
        }
        if let Some(p) = &o.right_input {
            self.input.right_path = Some(p.clone());
        }
        if let Some(c) = &o.left {
            self.input.left = list(c);
        }
        if let Some(c) = &o.right {
            self.input.right = list(c);
        }
        if let Some(c) = &o.confounds {
            self.input.confounds = list(c);
        }
        if let Some(p) = &o.confounds_input {
            self.input.confounds_path = Some(p.clone());
        }
        if let Some(t) = &o.missing_token {
            self.input.missing_token = t.clone();
        }
        if o.pca_components.is_some() && o.pca_variance.is_some() {
            return Err(CliError::Config(
                "--pca-components and --pca-variance are mutually exclusive".into(),
            ));
        }
        let pca = o
            .pca_components
            .map(PcaTarget::Components)
            .or(o.pca_variance.map(PcaTarget::VarianceFraction));
        if let Some(t) = pca {
            self.left.pca = Some(t);
            self.right.pca = Some(t);
        }
        if let Some(n) = o.dispersion_top {
            self.left.dispersion_top = Some(n);
            self.right.dispersion_top = Some(n);
        }

        let sparse_flags = o.sparse_c1.is_some() || o.sparse_c2.is_some();
        if o.ridge.is_some() && sparse_flags {
            return Err(CliError::Config(
                "choose one model variant: --ridge conflicts with --sparse-c1/--sparse-c2".into(),
            ));
        }
        let k = self.model.k();
        if let Some(l) = o.ridge {
            self.model = ModelConfig::Ridge {
                k,
                lambda_x: l,
                lambda_y: l,
            };
        }
        if sparse_flags {
            let (c1, c2) = match (&self.model, o.sparse_c1, o.sparse_c2) {
                (_, Some(a), Some(b)) => (a, b),
                (ModelConfig::Sparse { c1, c2, .. }, a, b) => (a.unwrap_or(*c1), b.unwrap_or(*c2)),
                _ => {
                    return Err(CliError::Config(
                        "a sparse model needs both --sparse-c1 and --sparse-c2".into(),
                    ))
                }
            };
            self.model = match self.model {
                ModelConfig::Sparse {
                    max_iter, tol, init, ..
                } => ModelConfig::Sparse {
                    k,
                    c1,
                    c2,
                    max_iter,
                    tol,
                    init,
                },
                _ => ModelConfig::Sparse {
                    k,
                    c1,
                    c2,
                    max_iter: None,
                    tol: None,
                    init: None,
                },
            };
        }
        if let Some(k) = o.k {
            self.model.set_k(k);
        }
        if let Some(n) = o.n_perm {
            self.inference.n_perm = n;
            self.inference.holdout_n_perm = n;
        }
        if let Some(a) = o.alpha {
            self.inference.alpha = a;
        }
        if let Some(c) = o.correction {
            self.inference.correction = c;
        }
        if let Some(s) = o.split {
            self.inference.holdout_split = Some(s);
            self.scan.split = s;
        }
        if let Some(b) = o.bootstrap {
            self.diagnostics.bootstrap = b;
        }
        if let Some(p) = &o.groups {
            self.diagnostics.groups_file = Some(p.clone());
        }
        if let Some(r) = o.ica_components {
            self.diagnostics.ica_components = Some(r);
        }
        if let Some(s) = o.seed {
            self.seed = Some(s);
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = Some(d.clone());
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<u64, CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::Config(format!(
                "unsupported schema_version '{}', expected '{SCHEMA_VERSION}'",
                self.schema_version
            )));
        }
        let seed = self
            .seed
            .ok_or_else(|| CliError::Config("a seed is required (--seed or \"seed\" in the config)".into()))?;
        let i = &self.input;
        match (&i.path, &i.left_path, &i.right_path) {
            (Some(_), None, None) => {
                if i.left.is_empty() || i.right.is_empty() {
                    return Err(CliError::Config(
                        "a single input file needs --left and --right column lists".into(),
                    ));
                }
            }
            (None, Some(_), Some(_)) => {}
            (None, None, None) => {
                return Err(CliError::Config(
                    "no input: give --input, or --left-input and --right-input".into(),
                ))
            }
            _ => {
                return Err(CliError::Config(
                    "give either --input or both --left-input and --right-input".into(),
                ))
            }
        }
        if !i.confounds.is_empty() && i.path.is_none() && i.confounds_path.is_none() {
            return Err(CliError::Config(
                "confound columns need --confounds-input when the sets come from separate files".into(),
            ));
        }
        let inf = &self.inference;
        if inf.n_perm > 0 && inf.n_perm < 99 {
            return Err(CliError::Config(format!(
                "n_perm must be 0 (off) or at least 99, got {}",
                inf.n_perm
            )));
        }
        if !(inf.alpha > 0.0 && inf.alpha < 1.0) {
            return Err(CliError::Config(format!("alpha must lie in (0, 1), got {}", inf.alpha)));
        }
        if let Some(s) = inf.holdout_split {
            if !(s > 0.0 && s < 1.0) {
                return Err(CliError::Config(format!("holdout split must lie in (0, 1), got {s}")));
            }
        }
        if self.diagnostics.bootstrap > 0 && self.diagnostics.bootstrap < 100 {
            return Err(CliError::Config(format!(
                "bootstrap must be 0 (off) or at least 100, got {}",
                self.diagnostics.bootstrap
            )));
        }
        self.pipeline().validate()?;
        Ok(seed)
    }

    pub fn pipeline(&self) -> PipelineSpec {
        PipelineSpec {
            preprocess: self.preprocess.clone(),
            left: self.left.clone(),
            right: self.right.clone(),
        }
    }

    pub fn load_groups(&self) -> Result<Option<Vec<ColumnGroup>>, CliError> {
        let Some(path) = &self.diagnostics.groups_file else {
            return Ok(None);
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read groups file {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map(Some)
            .map_err(|e| CliError::Config(format!("groups file {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let err = serde_json::from_str::<PipelineConfig>(r#"{"seed": 1, "modle": {}}"#).unwrap_err();
        assert!(err.to_string().contains("modle"));
        let err = serde_json::from_str::<PipelineConfig>(r#"{"seed": 1, "model": {"type": "ridge", "k": 1, "lambda_x": 1, "lambda_y": 1, "lambda": 2}}"#)
            .unwrap_err();
        assert!(err.to_string().contains("lambda"));
    }

    #[test]
    fn round_trip_and_defaults() {
        let c: PipelineConfig = serde_json::from_str(r#"{"seed": 3}"#).unwrap();
        assert_eq!(c.schema_version, SCHEMA_VERSION);
        assert_eq!(c.input.missing_token, "NA");
        assert_eq!(c.model, ModelConfig::Classical { k: None });
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<PipelineConfig>(&text).unwrap(), c);
    }

    #[test]
    fn flags_override_file() {
        let mut c: PipelineConfig =
            serde_json::from_str(r#"{"seed": 3, "model": {"type": "classical", "k": 2}}"#).unwrap();
        let o = Overrides {
            ridge: Some(0.5),
            seed: Some(9),
            ..Default::default()
        };
        c.apply(&o).unwrap();
        assert_eq!(c.seed, Some(9));
        assert_eq!(
            c.model,
            ModelConfig::Ridge {
                k: Some(2),
                lambda_x: 0.5,
                lambda_y: 0.5
            }
        );
        let both = Overrides {
            ridge: Some(0.5),
            sparse_c1: Some(2.0),
            ..Default::default()
        };
        assert!(c.apply(&both).is_err());
    }

    #[test]
    fn seed_is_mandatory() {
        let mut c = PipelineConfig::default();
        c.input.left_path = Some("a.csv".into());
        c.input.right_path = Some("b.csv".into());
        assert!(matches!(c.validate(), Err(CliError::Config(m)) if m.contains("seed")));
        c.seed = Some(1);
        assert_eq!(c.validate().unwrap(), 1);
    }
}

//! Canonical correlation analysis toolkit.
//!
//! The crate covers the whole two-view analysis workflow: CSV ingestion and
//! column splitting ([`data`]), preprocessing ([`preprocess`], [`pipeline`]),
//! PCA reduction ([`reduce`]), classical and ridge CCA ([`cca`]), sparse CCA by
//! penalized matrix decomposition ([`sparse`]), permutation and hold-out
//! inference ([`inference`]), variable-deletion sensitivity and ICA
//! post-processing ([`diagnostics`]), and a planted-mode data generator
//! ([`synth`]) used for calibration and testing.
//!
//! All fitting routines consume complete, column-standardized matrices held in
//! a [`Dataset`]. Resampling procedures derive one random stream per iteration
//! from a master seed (see [`rng`]), so results never depend on thread
//! scheduling.

// `!(x > 0.0)` guards deliberately reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod cca;
pub mod data;
pub mod diagnostics;
pub mod error;
pub mod inference;
pub mod linalg;
pub mod pipeline;
pub mod preprocess;
pub mod reduce;
pub mod rng;
pub mod sparse;
pub mod stats;
pub mod synth;

mod serde_matrix;

pub use cca::{cca_fit, project, redundancy, structure_correlations, CcaModel, Ridge, Variant, Variates};
pub use data::{load_csv, split, Dataset, VariableSplit};
pub use error::{CcaError, ErrorKind, Result};
pub use inference::{Fitter, FitterSpec};
pub use sparse::{scca_fit, SparseParams};

/// Format version written into every serialized model and report.
pub const FORMAT_VERSION: &str = "ccakit-1";

//! Variable-deletion sensitivity with bootstrap intervals, mode alignment,
//! and ICA post-processing of canonical variates.

mod ica;
mod matching;
mod sensitivity;

pub use ica::{ica_postprocess, IcaComponents, IcaOptions};
pub use matching::{match_modes, ModeMatch};
pub use sensitivity::{
    bootstrap_sensitivity, sensitivity_scan, write_sensitivity_csv, ColumnGroup, ModeScore, SelectionFrequency, SensitivityReport, Side,
    VariableSensitivity,
};

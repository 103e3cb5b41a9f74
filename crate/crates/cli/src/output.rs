use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use ccakit::cca::Loadings;
use ccakit::data::format_float;
use ccakit::diagnostics::{write_sensitivity_csv, SensitivityReport};
use ccakit::inference::PermutationResult;
use ccakit::{CcaModel, Variates};
use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::CliError;

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>, CliError> {
    let path = dir.join(name);
    File::create(&path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Output(format!("cannot create {}: {e}", path.display())))
}

fn csv_writer(dir: &Path, name: &str) -> Result<csv::Writer<BufWriter<File>>, CliError> {
    Ok(csv::Writer::from_writer(create(dir, name)?))
}

fn csv_err(name: &str) -> impl Fn(csv::Error) -> CliError + '_ {
    move |e| CliError::Output(format!("writing {name}: {e}"))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut w = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| CliError::Output(format!("writing {name}: {e}")))?;
    w.write_all(b"\n")
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Output(format!("writing {name}: {e}")))
}

fn mode_header(first: &[&str], prefix: &str, k: usize) -> Vec<String> {
    first
        .iter()
        .map(|s| s.to_string())
        .chain((1..=k).map(|i| format!("{prefix}{i}")))
        .collect()
}

fn matrix_rows<W: Write>(
    w: &mut csv::Writer<W>,
    side: &str,
    names: &[String],
    m: &DMatrix<f64>,
    name: &str,
) -> Result<(), CliError> {
    for (j, var) in names.iter().enumerate() {
        let mut rec = vec![side.to_string(), var.clone()];
        rec.extend(m.row(j).iter().map(|v| format_float(*v)));
        w.write_record(&rec).map_err(csv_err(name))?;
    }
    Ok(())
}

/// `side,variable,mode1..modek`.
pub fn write_weights(dir: &Path, model: &CcaModel) -> Result<(), CliError> {
    let name = "weights.csv";
    let mut w = csv_writer(dir, name)?;
    w.write_record(mode_header(&["side", "variable"], "mode", model.k()))
        .map_err(csv_err(name))?;
    matrix_rows(&mut w, "left", &model.left_columns, &model.x_weights, name)?;
    matrix_rows(&mut w, "right", &model.right_columns, &model.y_weights, name)?;
    w.flush().map_err(|e| CliError::Output(format!("writing {name}: {e}")))
}

/// Structure correlations in long form: `space,side,variable,kind,mode,loading`.
/// `space` is `design` for the fitted columns and `original` for the
/// standardized columns before PCA, when PCA was applied.
pub fn write_loadings(dir: &Path, sets: &[(&str, &Loadings)]) -> Result<(), CliError> {
    let name = "loadings.csv";
    let mut w = csv_writer(dir, name)?;
    w.write_record(["space", "side", "variable", "kind", "mode", "loading"])
        .map_err(csv_err(name))?;
    for (space, l) in sets {
        let blocks = [
            ("left", "same", &l.left_columns, &l.left_same),
            ("left", "cross", &l.left_columns, &l.left_cross),
            ("right", "same", &l.right_columns, &l.right_same),
            ("right", "cross", &l.right_columns, &l.right_cross),
        ];
        for (side, kind, names, m) in blocks {
            for (j, var) in names.iter().enumerate() {
                for mode in 0..m.ncols() {
                    w.write_record([
                        space.to_string(),
                        side.to_string(),
                        var.clone(),
                        kind.to_string(),
                        (mode + 1).to_string(),
                        format_float(m[(j, mode)]),
                    ])
                    .map_err(csv_err(name))?;
                }
            }
        }
    }
    w.flush().map_err(|e| CliError::Output(format!("writing {name}: {e}")))
}

/// `row,u1..uk,v1..vk`; `row` is the 1-based input data row.
pub fn write_variates(dir: &Path, variates: &Variates, rows: &[usize]) -> Result<(), CliError> {
    let name = "variates.csv";
    let k = variates.n_modes();
    let mut w = csv_writer(dir, name)?;
    let mut header = vec!["row".to_string()];
    header.extend((1..=k).map(|i| format!("u{i}")));
    header.extend((1..=k).map(|i| format!("v{i}")));
    w.write_record(&header).map_err(csv_err(name))?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = vec![(row + 1).to_string()];
        rec.extend(variates.u.row(i).iter().map(|v| format_float(*v)));
        rec.extend(variates.v.row(i).iter().map(|v| format_float(*v)));
        w.write_record(&rec).map_err(csv_err(name))?;
    }
    w.flush().map_err(|e| CliError::Output(format!("writing {name}: {e}")))
}

/// `replicate,statistic`: the first-mode correlation of every valid permuted refit.
pub fn write_null(dir: &Path, perm: &PermutationResult) -> Result<(), CliError> {
    let name = "null_distribution.csv";
    let mut w = csv_writer(dir, name)?;
    w.write_record(["replicate", "statistic"]).map_err(csv_err(name))?;
    for (i, s) in perm.null_samples.iter().enumerate() {
        w.write_record([(i + 1).to_string(), format_float(*s)])
            .map_err(csv_err(name))?;
    }
    w.flush().map_err(|e| CliError::Output(format!("writing {name}: {e}")))
}

pub fn write_sensitivity(dir: &Path, reports: &[SensitivityReport]) -> Result<(), CliError> {
    write_sensitivity_csv(reports, create(dir, "sensitivity.csv")?)
        .map_err(|e| CliError::Output(format!("writing sensitivity.csv: {e}")))
}

/// `row,s1..sr`.
pub fn write_sources(dir: &Path, sources: &DMatrix<f64>, rows: &[usize]) -> Result<(), CliError> {
    let name = "ica_sources.csv";
    let mut w = csv_writer(dir, name)?;
    w.write_record(mode_header(&["row"], "s", sources.ncols()))
        .map_err(csv_err(name))?;
    for (i, row) in rows.iter().enumerate() {
        let mut rec = vec![(row + 1).to_string()];
        rec.extend(sources.row(i).iter().map(|v| format_float(*v)));
        w.write_record(&rec).map_err(csv_err(name))?;
    }
    w.flush().map_err(|e| CliError::Output(format!("writing {name}: {e}")))
}

pub fn write_table(dir: &Path, name: &str, header: &[&str], rows: &[Vec<String>]) -> Result<(), CliError> {
    let mut w = csv_writer(dir, name)?;
    w.write_record(header).map_err(csv_err(name))?;
    for r in rows {
        w.write_record(r).map_err(csv_err(name))?;
    }
    w.flush().map_err(|e| CliError::Output(format!("writing {name}: {e}")))
}

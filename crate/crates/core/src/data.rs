//! Tabular data: named numeric columns with a missing-value mask.

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{CcaError, Result};

/// Named-column numeric matrix, one row per observation.
///
/// Missing cells are flagged in `missing` and hold `NaN` in `values`. Every
/// fitting routine requires a complete dataset; missingness is resolved by
/// [`crate::preprocess::handle_missing`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    values: DMatrix<f64>,
    missing: DMatrix<bool>,
}

/// Assignment of dataset columns to the left (p) and right (q) variable sets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VariableSplit {
    pub left_columns: Vec<String>,
    pub right_columns: Vec<String>,
}

impl Dataset {
    /// Builds a complete dataset. Every value must be finite.
    pub fn new(names: Vec<String>, values: DMatrix<f64>) -> Result<Self> {
        let missing = DMatrix::from_element(values.nrows(), values.ncols(), false);
        Self::with_missing(names, values, missing)
    }

    /// Builds a dataset with an explicit missing mask. Non-missing cells must be
    /// finite; missing cells are overwritten with `NaN`.
    pub fn with_missing(
        names: Vec<String>,
        mut values: DMatrix<f64>,
        missing: DMatrix<bool>,
    ) -> Result<Self> {
        if values.nrows() == 0 || values.ncols() == 0 {
            return Err(CcaError::Schema(
                "dataset needs at least one row and one column".into(),
            ));
        }
        if names.len() != values.ncols() {
            return Err(CcaError::Schema(format!(
                "{} column names for {} columns",
                names.len(),
                values.ncols()
            )));
        }
        if missing.shape() != values.shape() {
            return Err(CcaError::Schema("missing mask shape differs from values".into()));
        }
        check_names(&names)?;
        for j in 0..values.ncols() {
            for i in 0..values.nrows() {
                if missing[(i, j)] {
                    values[(i, j)] = f64::NAN;
                } else if !values[(i, j)].is_finite() {
                    return Err(CcaError::NonNumeric {
                        row: i + 1,
                        column: names[j].clone(),
                        value: values[(i, j)].to_string(),
                    });
                }
            }
        }
        Ok(Self { names, values, missing })
    }

    /// Convenience constructor from column vectors.
    pub fn from_columns<S: Into<String>>(columns: Vec<(S, Vec<f64>)>) -> Result<Self> {
        let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
        if columns.iter().any(|c| c.1.len() != n) {
            return Err(CcaError::Schema("columns differ in length".into()));
        }
        let mut names = Vec::with_capacity(columns.len());
        let mut data = Vec::with_capacity(n * columns.len());
        for (name, col) in columns {
            names.push(name.into());
            data.extend(col);
        }
        let p = names.len();
        Self::new(names, DMatrix::from_vec(n, p, data))
    }

    /// Dataset with generated names `{prefix}1..{prefix}p`.
    pub fn from_matrix(prefix: &str, values: DMatrix<f64>) -> Result<Self> {
        let names = (1..=values.ncols()).map(|j| format!("{prefix}{j}")).collect();
        Self::new(names, values)
    }

    pub fn n_rows(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.values.ncols()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn missing_mask(&self) -> &DMatrix<bool> {
        &self.missing
    }

    pub fn is_missing(&self, row: usize, col: usize) -> bool {
        self.missing[(row, col)]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|m| **m).count()
    }

    pub fn is_complete(&self) -> bool {
        self.missing_count() == 0
    }

    /// Errors unless the dataset has no missing cells.
    pub fn require_complete(&self, stage: &'static str) -> Result<()> {
        for j in 0..self.n_cols() {
            if self.missing.column(j).iter().any(|m| *m) {
                return Err(CcaError::MissingValues {
                    stage,
                    column: self.names[j].clone(),
                });
            }
        }
        Ok(())
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.column(j).iter().copied().collect()
    }

    /// Same shape and mask, new values. Used by column-wise transforms.
    pub(crate) fn replace_values(&self, values: DMatrix<f64>) -> Result<Self> {
        Self::with_missing(self.names.clone(), values, self.missing.clone())
    }

    /// Subset of columns, in the requested order.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n.as_ref())
                    .ok_or_else(|| CcaError::UnknownColumn(n.as_ref().to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.select_column_indices(&idx))
    }

    pub fn select_column_indices(&self, idx: &[usize]) -> Self {
        Self {
            names: idx.iter().map(|&j| self.names[j].clone()).collect(),
            values: self.values.select_columns(idx),
            missing: self.missing.select_columns(idx),
        }
    }

    /// All columns except the listed ones, keeping the original order.
    pub fn drop_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let mut drop = HashSet::new();
        for n in names {
            let j = self
                .column_index(n.as_ref())
                .ok_or_else(|| CcaError::UnknownColumn(n.as_ref().to_string()))?;
            drop.insert(j);
        }
        let keep: Vec<usize> = (0..self.n_cols()).filter(|j| !drop.contains(j)).collect();
        if keep.is_empty() {
            return Err(CcaError::Dimension(
                "removing the requested columns leaves no variables".into(),
            ));
        }
        Ok(self.select_column_indices(&keep))
    }

    /// Rows by index; indices may repeat (bootstrap resampling).
    pub fn select_rows(&self, idx: &[usize]) -> Self {
        Self {
            names: self.names.clone(),
            values: self.values.select_rows(idx),
            missing: self.missing.select_rows(idx),
        }
    }

    /// Horizontal concatenation; names must stay unique.
    pub fn hconcat(&self, other: &Dataset) -> Result<Self> {
        if self.n_rows() != other.n_rows() {
            return Err(CcaError::Schema(format!(
                "row counts differ: {} vs {}",
                self.n_rows(),
                other.n_rows()
            )));
        }
        let n = self.n_rows();
        let (a, b) = (self.n_cols(), other.n_cols());
        let mut values = DMatrix::zeros(n, a + b);
        let mut missing = DMatrix::from_element(n, a + b, false);
        values.columns_mut(0, a).copy_from(&self.values);
        values.columns_mut(a, b).copy_from(&other.values);
        missing.columns_mut(0, a).copy_from(&self.missing);
        missing.columns_mut(a, b).copy_from(&other.missing);
        let mut names = self.names.clone();
        names.extend(other.names.iter().cloned());
        check_names(&names)?;
        Ok(Self { names, values, missing })
    }

    /// Writes the dataset as CSV; missing cells are written as `missing_token`.
    pub fn write_csv<W: Write>(&self, writer: W, missing_token: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| CcaError::Csv {
            line: 0,
            message: e.to_string(),
        };
        w.write_record(&self.names).map_err(csv_err)?;
        let mut row = Vec::with_capacity(self.n_cols());
        for i in 0..self.n_rows() {
            row.clear();
            for j in 0..self.n_cols() {
                if self.missing[(i, j)] {
                    row.push(missing_token.to_string());
                } else {
                    row.push(format_float(self.values[(i, j)]));
                }
            }
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| CcaError::Io {
            path: "<writer>".into(),
            source: e,
        })
    }

    pub fn save_csv(&self, path: &Path, missing_token: &str) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| CcaError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        self.write_csv(std::io::BufWriter::new(file), missing_token)
    }
}

/// Shortest representation that parses back to the identical `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:?}")
}

fn check_names(names: &[String]) -> Result<()> {
    let mut seen = HashSet::new();
    for n in names {
        if n.is_empty() {
            return Err(CcaError::Schema("empty column name".into()));
        }
        if !seen.insert(n.as_str()) {
            return Err(CcaError::Schema(format!("duplicate column name {n:?}")));
        }
    }
    Ok(())
}

/// Reads a CSV file with a mandatory header row.
pub fn load_csv(path: &Path, missing_token: &str) -> Result<Dataset> {
    let file = std::fs::File::open(path).map_err(|e| CcaError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    read_csv(std::io::BufReader::new(file), missing_token)
}

/// Parses CSV from any reader. Cells equal to `missing_token` (after trimming
/// surrounding whitespace) are marked missing.
pub fn read_csv<R: Read>(reader: R, missing_token: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| CcaError::Csv {
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let names: Vec<String> = header.iter().map(str::to_string).collect();
    check_names(&names)?;
    let width = names.len();

    // Row-major accumulation, transposed into column-major at the end.
    let mut cells = Vec::new();
    let mut mask = Vec::new();
    let mut n_rows = 0usize;
    for record in rdr.records() {
        let record = record.map_err(|e| CcaError::Csv {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() != width {
            return Err(CcaError::RaggedRow {
                line,
                expected: width,
                found: record.len(),
            });
        }
        n_rows += 1;
        for (j, cell) in record.iter().enumerate() {
            if cell == missing_token {
                cells.push(f64::NAN);
                mask.push(true);
            } else {
                let v: f64 = cell.parse().map_err(|_| CcaError::NonNumeric {
                    row: n_rows,
                    column: names[j].clone(),
                    value: cell.to_string(),
                })?;
                if !v.is_finite() {
                    return Err(CcaError::NonNumeric {
                        row: n_rows,
                        column: names[j].clone(),
                        value: cell.to_string(),
                    });
                }
                cells.push(v);
                mask.push(false);
            }
        }
    }
    if n_rows == 0 {
        return Err(CcaError::Schema("CSV has a header but no data rows".into()));
    }
    let values = DMatrix::from_row_slice(n_rows, width, &cells);
    let missing = DMatrix::from_row_slice(n_rows, width, &mask);
    Dataset::with_missing(names, values, missing)
}

/// Splits a dataset into the left and right variable sets. Rows are never
/// reordered; column order follows the split.
pub fn split(ds: &Dataset, spec: &VariableSplit) -> Result<(Dataset, Dataset)> {
    if spec.left_columns.is_empty() || spec.right_columns.is_empty() {
        return Err(CcaError::Parameter("both sides of the split need at least one column".into()));
    }
    let left: HashSet<&str> = spec.left_columns.iter().map(String::as_str).collect();
    for name in spec.left_columns.iter().chain(&spec.right_columns) {
        if ds.column_index(name).is_none() {
            return Err(CcaError::UnknownColumn(name.clone()));
        }
    }
    if let Some(dup) = spec.right_columns.iter().find(|n| left.contains(n.as_str())) {
        return Err(CcaError::OverlappingColumn(dup.clone()));
    }
    Ok((
        ds.select_columns(&spec.left_columns)?,
        ds.select_columns(&spec.right_columns)?,
    ))
}

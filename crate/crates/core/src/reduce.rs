//! PCA reduction applied to one variable set before CCA.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CcaError, Result};
use crate::linalg;

/// How many principal components to keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PcaTarget {
    Components(usize),
    /// Smallest count whose cumulative explained-variance fraction reaches this value.
    VarianceFraction(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaReduction {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    /// p × m, orthonormal columns.
    #[serde(with = "crate::serde_matrix")]
    pub components: DMatrix<f64>,
    /// Variance of each retained component's scores, nonincreasing.
    pub explained_variance: Vec<f64>,
    /// `explained_variance / total_variance`.
    pub explained_variance_ratio: Vec<f64>,
    pub total_variance: f64,
}

impl PcaReduction {
    pub fn n_components(&self) -> usize {
        self.components.ncols()
    }
}

pub fn pca_fit(x: &Dataset, target: PcaTarget) -> Result<PcaReduction> {
    x.require_complete("PCA")?;
    let n = x.n_rows();
    let p = x.n_cols();
    if n < 2 {
        return Err(CcaError::Dimension("PCA needs at least two rows".into()));
    }
    let bound = (n - 1).min(p);
    let means = linalg::column_means(x.values());
    let centered = linalg::center_columns(x.values());
    let svd = linalg::sorted_svd(&centered)?;
    let variances: Vec<f64> = svd
        .singular
        .iter()
        .map(|s| s * s / (n as f64 - 1.0))
        .collect();
    let total: f64 = variances.iter().sum();
    if !(total > 0.0) {
        return Err(CcaError::DegenerateColumn(x.names().join(", ")));
    }
    let smax = svd.singular[0];
    let rank = svd
        .singular
        .iter()
        .filter(|&&s| s > smax * 1e-10 * (n.max(p) as f64))
        .count();

    let m = match target {
        PcaTarget::Components(m) => {
            if m == 0 || m > bound {
                return Err(CcaError::Dimension(format!(
                    "requested {m} components but at most min(n-1, p) = {bound} are available"
                )));
            }
            m
        }
        PcaTarget::VarianceFraction(f) => {
            if !(f > 0.0 && f <= 1.0) {
                return Err(CcaError::Parameter(format!(
                    "variance fraction must lie in (0, 1], got {f}"
                )));
            }
            let mut cum = 0.0;
            let mut m = rank;
            for (i, v) in variances.iter().enumerate() {
                cum += v / total;
                if cum >= f - 1e-10 {
                    m = i + 1;
                    break;
                }
            }
            m.min(rank).min(bound).max(1)
        }
    };

    let mut components = DMatrix::zeros(p, m);
    // Right singular vectors of the centered data are the principal axes.
    for j in 0..m {
        let axis = svd.v.column(j);
        let sign = linalg::orientation(axis.iter());
        components.column_mut(j).copy_from(&(axis * sign));
    }
    let explained_variance = variances[..m].to_vec();
    Ok(PcaReduction {
        columns: x.names().to_vec(),
        means: means.iter().copied().collect(),
        components,
        explained_variance_ratio: explained_variance.iter().map(|v| v / total).collect(),
        explained_variance,
        total_variance: total,
    })
}

/// Scores `(X - means)·components`, columns named `pc1..pcm`.
pub fn pca_apply(x: &Dataset, red: &PcaReduction) -> Result<Dataset> {
    if x.names() != red.columns.as_slice() {
        return Err(CcaError::ColumnMismatch(format!(
            "PCA was fitted on {:?} but got {:?}",
            red.columns,
            x.names()
        )));
    }
    x.require_complete("PCA projection")?;
    let mut centered = x.values().clone();
    for (j, mut col) in centered.column_iter_mut().enumerate() {
        col.add_scalar_mut(-red.means[j]);
    }
    Dataset::from_matrix("pc", centered * &red.components)
}

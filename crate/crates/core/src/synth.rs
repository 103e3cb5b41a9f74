//! Planted-mode data generator.
//!
//! For each planted mode `i` a shared latent `z_i` feeds a left latent
//! `√ρ_i·z_i + √(1-ρ_i)·e_i` and a right latent built the same way from
//! independent noise, so the two latents correlate at exactly `ρ_i` in the
//! population. All other columns are independent standard normal. Because the
//! latents are unit-variance and every construction step is an invertible
//! per-set linear map, the population canonical correlations equal `rho`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CcaError, Result};
use crate::rng::{self, Purpose};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    /// Planted canonical correlations, nonincreasing, each in [0, 1].
    pub rho: Vec<f64>,
    /// Optional active columns per mode on the left side. Each mode's latent is
    /// spread evenly over its support by an orthogonal map.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left_support: Option<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right_support: Option<Vec<Vec<usize>>>,
    /// Multiply each side by a seeded random orthogonal matrix.
    pub rotate: bool,
    pub seed: u64,
}

/// Ground truth for a generated dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthTruth {
    pub rho: Vec<f64>,
    /// p × m weights with `X·x_weights` equal to the planted left latents.
    #[serde(with = "crate::serde_matrix")]
    pub x_weights: DMatrix<f64>,
    #[serde(with = "crate::serde_matrix")]
    pub y_weights: DMatrix<f64>,
}

#[derive(Debug, Clone)]
pub struct SynthData {
    pub x: Dataset,
    pub y: Dataset,
    pub truth: SynthTruth,
}

impl SynthTruth {
    /// Planted left and right latent variates for the generated data.
    pub fn latents(&self, x: &Dataset, y: &Dataset) -> (DMatrix<f64>, DMatrix<f64>) {
        (x.values() * &self.x_weights, y.values() * &self.y_weights)
    }
}

impl SynthSpec {
    pub fn new(n: usize, p: usize, q: usize, rho: Vec<f64>, rotate: bool, seed: u64) -> Result<Self> {
        let spec = Self {
            n,
            p,
            q,
            rho,
            left_support: None,
            right_support: None,
            rotate,
            seed,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn with_support(
        mut self,
        left: Option<Vec<Vec<usize>>>,
        right: Option<Vec<Vec<usize>>>,
    ) -> Result<Self> {
        self.left_support = left;
        self.right_support = right;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        let m = self.rho.len();
        if self.n < 2 || self.p == 0 || self.q == 0 {
            return Err(CcaError::Parameter("synthetic data needs n >= 2, p >= 1, q >= 1".into()));
        }
        if m > self.p.min(self.q) {
            return Err(CcaError::Dimension(format!(
                "{m} planted modes exceed min(p, q) = {}",
                self.p.min(self.q)
            )));
        }
        if self.rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return Err(CcaError::Parameter("planted correlations must lie in [0, 1]".into()));
        }
        if self.rho.windows(2).any(|w| w[0] < w[1]) {
            return Err(CcaError::Parameter("planted correlations must be nonincreasing".into()));
        }
        for (support, dim, side) in [
            (&self.left_support, self.p, "left"),
            (&self.right_support, self.q, "right"),
        ] {
            if let Some(s) = support {
                check_support(s, m, dim, side)?;
            }
        }
        Ok(())
    }
}

fn check_support(support: &[Vec<usize>], m: usize, dim: usize, side: &str) -> Result<()> {
    if support.len() != m {
        return Err(CcaError::Parameter(format!(
            "{side} support lists {} modes but {m} are planted",
            support.len()
        )));
    }
    let mut used = vec![false; dim];
    for cols in support {
        if cols.is_empty() {
            return Err(CcaError::Parameter(format!("empty {side} support")));
        }
        for &c in cols {
            if c >= dim {
                return Err(CcaError::Parameter(format!("{side} support column {c} out of range")));
            }
            if used[c] {
                return Err(CcaError::Parameter(format!("{side} supports overlap at column {c}")));
            }
            used[c] = true;
        }
    }
    Ok(())
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DMatrix<f64> {
    // Row-major fill order keeps the draw sequence independent of storage layout.
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DMatrix::from_row_slice(rows, cols, &data)
}

/// Uniformly distributed orthogonal matrix: QR of a Gaussian matrix with the
/// signs of `diag(R)` folded into `Q`.
pub fn random_orthogonal<R: Rng>(rng: &mut R, dim: usize) -> DMatrix<f64> {
    let qr = gaussian_matrix(rng, dim, dim).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Symmetric orthogonal matrix whose first column is `1/√s` everywhere.
fn spreading_reflection(s: usize) -> DMatrix<f64> {
    if s == 1 {
        return DMatrix::identity(1, 1);
    }
    let h = DVector::from_element(s, 1.0 / (s as f64).sqrt());
    let mut w = -h.clone();
    w[0] += 1.0;
    let norm2 = w.norm_squared();
    DMatrix::identity(s, s) - (&w * w.transpose()) * (2.0 / norm2)
}

fn plant(
    data: &mut DMatrix<f64>,
    weights: &mut DMatrix<f64>,
    mode: usize,
    latent: &DVector<f64>,
    support: Option<&Vec<usize>>,
) {
    match support {
        None => {
            data.set_column(mode, latent);
            weights[(mode, mode)] = 1.0;
        }
        Some(cols) => {
            let h = spreading_reflection(cols.len());
            let mut block = data.select_columns(cols);
            block.set_column(0, latent);
            let spread = block * &h;
            for (k, &c) in cols.iter().enumerate() {
                data.set_column(c, &spread.column(k));
                weights[(c, mode)] = h[(k, 0)];
            }
        }
    }
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let (n, p, q, m) = (spec.n, spec.p, spec.q, spec.rho.len());
    let mut rng = rng::stream(spec.seed, Purpose::Synth, 0);
    let shared = gaussian_matrix(&mut rng, n, m);
    let left_noise = gaussian_matrix(&mut rng, n, m);
    let right_noise = gaussian_matrix(&mut rng, n, m);
    let mut x = gaussian_matrix(&mut rng, n, p);
    let mut y = gaussian_matrix(&mut rng, n, q);
    let mut wx = DMatrix::zeros(p, m);
    let mut wy = DMatrix::zeros(q, m);

    for (i, &rho) in spec.rho.iter().enumerate() {
        let (a, b) = (rho.sqrt(), (1.0 - rho).sqrt());
        let left: DVector<f64> = shared.column(i) * a + left_noise.column(i) * b;
        let right: DVector<f64> = shared.column(i) * a + right_noise.column(i) * b;
        plant(&mut x, &mut wx, i, &left, spec.left_support.as_ref().map(|s| &s[i]));
        plant(&mut y, &mut wy, i, &right, spec.right_support.as_ref().map(|s| &s[i]));
    }

    if spec.rotate {
        let qx = random_orthogonal(&mut rng, p);
        let qy = random_orthogonal(&mut rng, q);
        x *= &qx;
        y *= &qy;
        wx = qx.transpose() * wx;
        wy = qy.transpose() * wy;
    }

    Ok(SynthData {
        x: Dataset::from_matrix("x", x)?,
        y: Dataset::from_matrix("y", y)?,
        truth: SynthTruth {
            rho: spec.rho.clone(),
            x_weights: wx,
            y_weights: wy,
        },
    })
}

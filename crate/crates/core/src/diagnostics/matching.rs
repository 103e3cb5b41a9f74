use serde::{Deserialize, Serialize};

use crate::cca::Variates;
use crate::linalg;

/// Alignment of perturbed modes to original modes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeMatch {
    /// `assignment[i]` is the perturbed mode matched to original mode `i`.
    pub assignment: Vec<Option<usize>>,
    /// `+1` or `-1` per original mode; `+1` when unmatched.
    pub signs: Vec<f64>,
    /// Signed agreement `(corr(U_i, U'_j) + corr(V_i, V'_j)) / 2` of each match.
    pub agreement: Vec<f64>,
}

/// Greedy one-to-one matching on the mean of the left and right variate
/// correlations. The largest remaining `|C_ij|` is taken first, ties going to
/// the lowest original then perturbed index.
pub fn match_modes(original: &Variates, perturbed: &Variates) -> ModeMatch {
    let ko = original.n_modes();
    let kp = perturbed.n_modes();
    let cu = linalg::column_correlations(&original.u, &perturbed.u);
    let cv = linalg::column_correlations(&original.v, &perturbed.v);
    let finite = |v: f64| if v.is_finite() { v } else { 0.0 };
    let c = cu.zip_map(&cv, |a, b| 0.5 * (finite(a) + finite(b)));

    let mut assignment = vec![None; ko];
    let mut signs = vec![1.0; ko];
    let mut agreement = vec![0.0; ko];
    let mut used = vec![false; kp];
    for _ in 0..ko.min(kp) {
        let mut best: Option<(usize, usize)> = None;
        for i in (0..ko).filter(|&i| assignment[i].is_none()) {
            for j in (0..kp).filter(|&j| !used[j]) {
                if best.is_none_or(|(bi, bj)| c[(i, j)].abs() > c[(bi, bj)].abs()) {
                    best = Some((i, j));
                }
            }
        }
        let (i, j) = best.expect("free pair exists");
        assignment[i] = Some(j);
        used[j] = true;
        signs[i] = if c[(i, j)] < 0.0 { -1.0 } else { 1.0 };
        agreement[i] = c[(i, j)];
    }
    ModeMatch {
        assignment,
        signs,
        agreement,
    }
}

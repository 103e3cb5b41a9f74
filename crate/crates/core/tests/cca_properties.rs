use ccakit::linalg;
use ccakit::synth::{generate, SynthSpec};
use ccakit::{cca_fit, project, CcaModel, Dataset, Ridge};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn gaussian(rng: &mut ChaCha8Rng, n: usize, p: usize) -> DMatrix<f64> {
    DMatrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal))
}

/// Random pair with some shared structure: Y mixes part of X into noise.
fn pair(seed: u64, n: usize, p: usize, q: usize) -> (Dataset, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x = gaussian(&mut rng, n, p);
    let mix = gaussian(&mut rng, p, q) * 0.4;
    let y = &x * mix + gaussian(&mut rng, n, q);
    (Dataset::from_matrix("x", x).unwrap(), Dataset::from_matrix("y", y).unwrap())
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Brute-force first canonical correlation for p = q = 2: unit weight vectors
/// parametrized by angle on a 0.001 rad grid, maximizing |corr(Xa, Yb)|.
fn angle_grid_oracle(x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let n = x.nrows() as f64;
    let cov = |a: &DMatrix<f64>, b: &DMatrix<f64>| {
        let ma: Vec<f64> = (0..a.ncols()).map(|j| a.column(j).sum() / n).collect();
        let mb: Vec<f64> = (0..b.ncols()).map(|j| b.column(j).sum() / n).collect();
        DMatrix::from_fn(a.ncols(), b.ncols(), |i, j| {
            (0..a.nrows()).map(|r| (a[(r, i)] - ma[i]) * (b[(r, j)] - mb[j])).sum::<f64>()
        })
    };
    let (sxx, syy, sxy) = (cov(x, x), cov(y, y), cov(x, y));
    let steps = (std::f64::consts::PI / 0.001).ceil() as usize;
    let angles: Vec<(f64, f64)> = (0..steps).map(|i| ((i as f64) * 0.001).sin_cos()).collect();
    let quad = |m: &DMatrix<f64>, c: f64, s: f64| m[(0, 0)] * c * c + 2.0 * m[(0, 1)] * c * s + m[(1, 1)] * s * s;
    let vy: Vec<f64> = angles.iter().map(|&(s, c)| quad(&syy, c, s).sqrt()).collect();
    let mut best = 0.0f64;
    for &(sa, ca) in &angles {
        let va = quad(&sxx, ca, sa).sqrt();
        let r0 = ca * sxy[(0, 0)] + sa * sxy[(1, 0)];
        let r1 = ca * sxy[(0, 1)] + sa * sxy[(1, 1)];
        for (j, &(sb, cb)) in angles.iter().enumerate() {
            let r = ((r0 * cb + r1 * sb) / (va * vy[j])).abs();
            best = best.max(r);
        }
    }
    best
}

#[test]
fn first_correlation_matches_angle_grid_oracle() {
    for seed in 0..5 {
        let (x, y) = pair(1000 + seed, 50, 2, 2);
        let m = cca_fit(&x, &y, 1, None).unwrap();
        let oracle = angle_grid_oracle(x.values(), y.values());
        assert!((m.correlations[0] - oracle).abs() < 1e-3, "seed {seed}: {} vs {oracle}", m.correlations[0]);
        // The grid can only undershoot the true maximum.
        assert!(oracle <= m.correlations[0] + 1e-12);
    }
}

fn assert_swapped(a: &CcaModel, b: &CcaModel) {
    assert!(max_abs_diff(&a.correlations, &b.correlations) < 1e-10);
    for i in 0..a.k() {
        // Both modes share one sign choice; align on the left weights.
        let s = if a.x_weights.column(i).dot(&b.y_weights.column(i)) < 0.0 { -1.0 } else { 1.0 };
        assert!((a.x_weights.column(i) - b.y_weights.column(i) * s).amax() < 1e-8);
        assert!((a.y_weights.column(i) - b.x_weights.column(i) * s).amax() < 1e-8);
    }
}

#[test]
fn symmetry_under_set_exchange() {
    for seed in 0..20 {
        let (x, y) = pair(seed, 80, 4, 3);
        let a = cca_fit(&x, &y, 3, None).unwrap();
        let b = cca_fit(&y, &x, 3, None).unwrap();
        assert_swapped(&a, &b);
    }
}

fn assert_identity(c: &DMatrix<f64>, tol: f64) {
    let id = DMatrix::identity(c.nrows(), c.ncols());
    assert!((c - id).amax() < tol, "{c}");
}

#[test]
fn variates_are_orthogonal() {
    for seed in 0..10 {
        let (x, y) = pair(200 + seed, 120, 6, 5);
        let m = cca_fit(&x, &y, 5, None).unwrap();
        let v = project(&m, &x, &y).unwrap();
        assert_identity(&linalg::column_correlations(&v.u, &v.u), 1e-6);
        assert_identity(&linalg::column_correlations(&v.v, &v.v), 1e-6);
        let cross = linalg::column_correlations(&v.u, &v.v);
        for i in 0..5 {
            for j in 0..5 {
                if i == j {
                    assert!((cross[(i, i)] - m.correlations[i]).abs() < 1e-8);
                } else {
                    assert!(cross[(i, j)].abs() < 1e-6);
                }
            }
        }
    }
}

#[test]
fn first_k_consistency() {
    let (x, y) = pair(31, 200, 9, 8);
    let small = cca_fit(&x, &y, 5, None).unwrap();
    let full = cca_fit(&x, &y, 8, None).unwrap();
    assert_eq!(&small.correlations[..], &full.correlations[..5]);
    assert_eq!(small.x_weights, full.x_weights.columns(0, 5).into_owned());
    assert_eq!(small.y_weights, full.y_weights.columns(0, 5).into_owned());
}

#[test]
fn ridge_zero_equals_classical() {
    for seed in 0..5 {
        let (x, y) = pair(300 + seed, 60, 4, 4);
        let c = cca_fit(&x, &y, 4, None).unwrap();
        let r = cca_fit(&x, &y, 4, Some(Ridge::new(0.0, 0.0))).unwrap();
        assert!(max_abs_diff(&c.correlations, &r.correlations) < 1e-10);
        assert!((&c.x_weights - &r.x_weights).amax() < 1e-10);
    }
}

#[test]
fn ridge_shrinks_correlations() {
    let (x, y) = pair(7, 60, 5, 5);
    let c = cca_fit(&x, &y, 1, None).unwrap();
    let r = cca_fit(&x, &y, 1, Some(Ridge::new(1.0, 1.0))).unwrap();
    assert!(r.correlations[0] < c.correlations[0]);
}

#[test]
fn ridge_fits_wide_data_that_classical_rejects() {
    let (x, y) = pair(8, 20, 30, 3);
    let err = cca_fit(&x, &y, 1, None).unwrap_err();
    let text = err.to_string();
    assert!(text.contains("--ridge") && text.contains("--pca-components"), "{text}");
    let m = cca_fit(&x, &y, 2, Some(Ridge::new(0.1, 0.0))).unwrap();
    assert!(m.correlations.iter().all(|r| (0.0..=1.0).contains(r)));
}

#[test]
fn planted_modes_are_recovered() {
    let d = generate(&SynthSpec::new(4000, 6, 6, vec![0.9, 0.6], true, 5).unwrap()).unwrap();
    let m = cca_fit(&d.x, &d.y, 3, None).unwrap();
    assert!((m.correlations[0] - 0.9).abs() < 0.03);
    assert!((m.correlations[1] - 0.6).abs() < 0.05);
    assert!(m.correlations[2] < 0.15);
    let (lx, ly) = d.truth.latents(&d.x, &d.y);
    let v = project(&m, &d.x, &d.y).unwrap();
    for i in 0..2 {
        let r = ccakit::stats::pearson(lx.column(i).iter(), v.u.column(i).iter());
        assert!(r.abs() > 0.9);
        let r = ccakit::stats::pearson(ly.column(i).iter(), v.v.column(i).iter());
        assert!(r.abs() > 0.9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn symmetric_correlations(seed in 0u64..100_000, p in 1usize..5, q in 1usize..5) {
        let (x, y) = pair(seed, 40, p, q);
        let k = p.min(q);
        let a = cca_fit(&x, &y, k, None).unwrap();
        let b = cca_fit(&y, &x, k, None).unwrap();
        prop_assert!(max_abs_diff(&a.correlations, &b.correlations) < 1e-10);
    }

    #[test]
    fn correlations_sorted_in_unit_interval(seed in 0u64..100_000, p in 1usize..6, q in 1usize..6) {
        let (x, y) = pair(seed, 30, p, q);
        let m = cca_fit(&x, &y, p.min(q), None).unwrap();
        for w in m.correlations.windows(2) {
            prop_assert!(w[0] >= w[1]);
        }
        prop_assert!(m.correlations.iter().all(|r| (0.0..=1.0).contains(r)));
    }

    #[test]
    fn per_column_rescaling_invariance(seed in 0u64..100_000, logs in proptest::collection::vec(-3.0f64..3.0, 7)) {
        let (x, y) = pair(seed, 60, 4, 3);
        let base = cca_fit(&x, &y, 3, None).unwrap();
        let sx = DMatrix::from_fn(60, 4, |i, j| x.values()[(i, j)] * 10f64.powf(logs[j]));
        let sy = DMatrix::from_fn(60, 3, |i, j| y.values()[(i, j)] * 10f64.powf(logs[4 + j]));
        let xs = Dataset::new(x.names().to_vec(), sx).unwrap();
        let ys = Dataset::new(y.names().to_vec(), sy).unwrap();
        let scaled = cca_fit(&xs, &ys, 3, None).unwrap();
        prop_assert!(max_abs_diff(&base.correlations, &scaled.correlations) < 1e-8);
    }

    #[test]
    fn invertible_map_invariance(seed in 0u64..100_000) {
        let (x, y) = pair(seed, 80, 4, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        // Diagonally dominant, hence invertible and well conditioned.
        let a = gaussian(&mut rng, 4, 4) * 0.3 + DMatrix::identity(4, 4) * 2.0;
        let xa = Dataset::new(x.names().to_vec(), x.values() * a).unwrap();
        let base = cca_fit(&x, &y, 3, None).unwrap();
        let mapped = cca_fit(&xa, &y, 3, None).unwrap();
        prop_assert!(max_abs_diff(&base.correlations, &mapped.correlations) < 1e-6);
    }

    #[test]
    fn model_json_round_trip(seed in 0u64..100_000) {
        let (x, y) = pair(seed, 30, 3, 2);
        let m = cca_fit(&x, &y, 2, Some(Ridge::new(0.2, 0.1))).unwrap();
        let back = CcaModel::from_json(&m.to_json().unwrap()).unwrap();
        prop_assert_eq!(back, m);
    }
}

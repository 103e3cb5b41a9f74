use ccakit::inference::{holdout_validate, permutation_test, Correction};
use ccakit::pipeline::PipelineSpec;
use ccakit::synth::{generate, SynthSpec};
use ccakit::{cca_fit, FitterSpec};

#[test]
fn permutation_rejection_rate_on_null_data() {
    let fitter = FitterSpec::Classical { k: 1 };
    let sims = 120;
    let rejected = (0..sims)
        .filter(|&s| {
            let d = generate(&SynthSpec::new(100, 3, 3, vec![], false, 10_000 + s).unwrap()).unwrap();
            let r = permutation_test(&d.x, &d.y, &fitter, 99, s, Correction::None).unwrap();
            r.p_raw[0] < 0.05
        })
        .count();
    let rate = rejected as f64 / sims as f64;
    // Binomial(120, 0.05) stays inside this band with probability > 0.99.
    assert!((0.0..=0.125).contains(&rate), "{rate}");
}

#[test]
fn p_value_distribution_is_roughly_uniform() {
    let fitter = FitterSpec::Classical { k: 1 };
    let p: Vec<f64> = (0..100)
        .map(|s| {
            let d = generate(&SynthSpec::new(60, 2, 2, vec![], false, 20_000 + s).unwrap()).unwrap();
            permutation_test(&d.x, &d.y, &fitter, 99, s, Correction::None).unwrap().p_raw[0]
        })
        .collect();
    let below_half = p.iter().filter(|v| **v <= 0.5).count();
    assert!((35..=65).contains(&below_half), "{below_half}");
}

#[test]
fn in_sample_correlation_inflates_with_dimension() {
    let mean_r1 = |p: usize| {
        (0..30)
            .map(|s| {
                let d = generate(&SynthSpec::new(100, p, p, vec![], false, 30_000 + s).unwrap()).unwrap();
                cca_fit(&d.x, &d.y, 1, None).unwrap().correlations[0]
            })
            .sum::<f64>()
            / 30.0
    };
    let r: Vec<f64> = [5, 10, 20].into_iter().map(mean_r1).collect();
    assert!(r[0] < r[1] && r[1] < r[2], "{r:?}");
}

#[test]
fn wide_ridge_fit_is_perfect_in_sample_but_not_out_of_sample() {
    let fitter = FitterSpec::Ridge {
        k: 1,
        lambda_x: 1e-6,
        lambda_y: 1e-6,
    };
    let mut holdout = Vec::new();
    for s in 0..10 {
        let d = generate(&SynthSpec::new(250, 60, 5, vec![], false, 40_000 + s).unwrap()).unwrap();
        let r = holdout_validate(&d.x, &d.y, None, &PipelineSpec::default(), &fitter, 0.2, 0, s).unwrap();
        assert_eq!(r.n_train, 50);
        assert!(r.train_model.correlations[0] >= 0.999);
        holdout.push(r.holdout_correlations[0].abs());
    }
    let mean = holdout.iter().sum::<f64>() / holdout.len() as f64;
    assert!(mean < 0.3, "{mean}");
}

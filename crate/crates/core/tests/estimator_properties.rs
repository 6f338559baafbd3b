mod support;

use promotime::simulation::simulate_observations;
use promotime::{fit_mle, FitOptions, ModelParams};
use proptest::prelude::*;

fn mp(theta: f64, shape: f64, scale: f64) -> ModelParams {
    ModelParams::from_triple(theta, shape, scale).unwrap()
}

/// Mean standard errors over replications, so a single estimate drifting
/// along the theta-scale ridge does not dominate the comparison.
fn mean_standard_errors(truth: &ModelParams, n: usize, seeds: std::ops::Range<u64>) -> [f64; 3] {
    let reps = seeds.end - seeds.start;
    let mut acc = [0.0; 3];
    for seed in seeds {
        let fit = fit_mle(&simulate_observations(truth, n, 24.0, seed), &FitOptions::default()).unwrap();
        let se = fit.standard_errors.unwrap();
        for j in 0..3 {
            acc[j] += se[j] / reps as f64;
        }
    }
    acc
}

#[test]
fn standard_errors_shrink_with_root_n() {
    let truth = mp(0.871, 1.157, 18.762);
    let a = mean_standard_errors(&truth, 10_000, 100..106);
    let b = mean_standard_errors(&truth, 20_000, 200..206);
    for j in 0..3 {
        let ratio = b[j] / a[j];
        assert!((ratio / std::f64::consts::FRAC_1_SQRT_2 - 1.0).abs() < 0.15, "coord {j}: ratio {ratio}");
    }
}

#[test]
fn fitted_horizon_survival_tracks_censored_share() {
    for (i, (theta, shape, scale)) in [(0.614, 1.157, 18.762), (1.422, 1.26, 23.152), (0.544, 1.304, 18.551)]
        .into_iter()
        .enumerate()
    {
        let n = 8_000;
        let data = simulate_observations(&mp(theta, shape, scale), n, 24.0, 40 + i as u64);
        let fit = fit_mle(&data, &FitOptions::default()).unwrap();
        assert!(fit.converged);
        let share = data.iter().filter(|o| !o.event).count() as f64 / n as f64;
        let se = (share * (1.0 - share) / n as f64).sqrt();
        let s24 = fit.params.survival(24.0).unwrap();
        assert!((s24 - share).abs() < 3.0 * se, "{s24} vs {share} (se {se})");
        // and against the generating closed form
        let truth = support::survival(24.0, theta, shape, scale);
        assert!((s24 - truth).abs() < 4.0 * se, "{s24} vs {truth}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn fits_stay_in_the_parameter_space(
        theta in 0.2f64..3.0,
        shape in 0.6f64..2.5,
        scale in 4.0f64..40.0,
        seed in any::<u64>(),
    ) {
        let data = simulate_observations(&mp(theta, shape, scale), 300, 24.0, seed);
        prop_assume!(data.iter().filter(|o| o.event).count() >= 5);
        let fit = fit_mle(&data, &FitOptions { seed, ..Default::default() }).unwrap();
        let [t, k, s] = fit.params.as_array();
        prop_assert!(t > 0.0 && t.is_finite());
        prop_assert!(k > 0.0 && k.is_finite());
        prop_assert!(s > 0.0 && s.is_finite());
        prop_assert!(fit.log_likelihood.is_finite());
        prop_assert!((fit.cure_fraction - (-t).exp()).abs() < 1e-15);
        if let Some(se) = fit.standard_errors {
            prop_assert!(se.iter().all(|v| *v > 0.0 && v.is_finite()));
        }
    }
}

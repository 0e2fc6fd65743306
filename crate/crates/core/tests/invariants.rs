mod common;

use avgreg::filters::{filter_value, residual_norm};
use avgreg::selection::{discrepancy_principle, DEFAULT_K_MAX};
use avgreg::{BatchStats, CoefficientVector, DeltaRule, SpectralDecomposition};
use proptest::prelude::*;
use rand::Rng;

fn mean_and_std(rows: &[Vec<f64>]) -> (Vec<f64>, f64) {
    let n = rows.len() as f64;
    let d = rows[0].len();
    let mean: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let ss: f64 = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn filter_values_match_definitions(seed in any::<u64>(), alpha in 1e-8f64..1.0, lambda in 1e-10f64..1.0) {
        let mut rng = common::rng(seed);
        let spec = common::random_filter(&mut rng);
        let got = filter_value(&spec, alpha, lambda).unwrap();
        let want = common::filter(spec.kind, alpha, lambda);
        prop_assert!((got - want).abs() <= 1e-9 * want.abs().max(1.0), "{} vs {}", got, want);
    }

    #[test]
    fn residual_matches_oracle(seed in any::<u64>(), m in 1usize..40, alpha in 1e-10f64..1.0) {
        let mut rng = common::rng(seed);
        let sigmas = common::random_sigmas(&mut rng, m, 1e-6);
        let spec = common::random_filter(&mut rng);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let op = SpectralDecomposition::diagonal(sigmas.clone()).unwrap();
        let got = residual_norm(&op, &spec, alpha, &CoefficientVector::new(y.clone())).unwrap();
        let want = common::residual(spec.kind, &sigmas, &y, alpha);
        prop_assert!((got - want).abs() <= 1e-10 * want.max(1e-300) + 1e-300);
    }

    #[test]
    fn discrepancy_stop_is_first_grid_point_below_delta(
        seed in any::<u64>(), m in 1usize..30, q in 0.3f64..0.95, n in 1usize..1000,
    ) {
        let mut rng = common::rng(seed);
        let sigmas = common::random_sigmas(&mut rng, m, 1e-5);
        let spec = common::random_filter(&mut rng);
        let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
        let delta = rng.random_range(1e-4..0.5);
        let op = SpectralDecomposition::diagonal(sigmas.clone()).unwrap();
        let y_bar = CoefficientVector::new(y.clone());
        for emergency in [None, Some(n)] {
            let c = discrepancy_principle(&op, &spec, &y_bar, delta, q, emergency, DEFAULT_K_MAX).unwrap();
            let mut a = 1.0;
            for j in 0..c.k {
                prop_assert!(common::residual(spec.kind, &sigmas, &y, a) > delta * (1.0 - 1e-9));
                if let Some(n) = emergency {
                    prop_assert!(a > 1.0 / n as f64, "step {} passed the floor", j);
                }
                a *= q;
            }
            prop_assert_eq!(c.alpha, a);
            let stopped_by_residual = common::residual(spec.kind, &sigmas, &y, a) <= delta * (1.0 + 1e-9);
            if c.emergency_triggered {
                prop_assert!(a <= 1.0 / n as f64 && a > q / n as f64);
            } else {
                prop_assert!(stopped_by_residual);
            }
        }
    }

    #[test]
    fn batch_statistics_match_two_pass(seed in any::<u64>(), n in 2usize..60, d in 1usize..8) {
        let mut rng = common::rng(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|_| rng.random_range(-3.0..3.0)).collect())
            .collect();
        let stats = BatchStats::from_rows(&rows).unwrap();
        let (mean, s) = mean_and_std(&rows);
        for (a, b) in stats.mean.coefficients.iter().zip(&mean) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert!((stats.sample_std - s).abs() < 1e-12 * s.max(1.0));
        let delta = avgreg::measurements::delta_est(&stats, DeltaRule::SampleStd).unwrap();
        prop_assert!((delta - s / (n as f64).sqrt()).abs() < 1e-12 * delta.max(1.0));
    }
}

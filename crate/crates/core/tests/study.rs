use avgreg::filters::apply_regularizer;
use avgreg::study::config::{
    FilterConfig, NoiseConfig, RuleConfig, ScenarioConfig, SourceConfig, SourceShape, StudyConfig,
    SCHEMA_VERSION,
};
use avgreg::study::scenarios::Problem;
use avgreg::study::{run_study, run_study_with, StudyResult};
use avgreg::DeltaRule;

const Q: f64 = 0.7;

fn small_config(filter: FilterConfig) -> StudyConfig {
    StudyConfig {
        schema_version: SCHEMA_VERSION,
        scenario: ScenarioConfig::DiagonalSynthetic {
            m: 60,
            decay: 1.0,
            source: SourceConfig {
                nu: 1.0,
                rho: 1.0,
                shape: SourceShape::Alternating,
            },
            noise: NoiseConfig::CoefficientGaussian { scale: 0.2 },
        },
        filter,
        rules: vec![RuleConfig::dp(), RuleConfig::dp_es(), RuleConfig::apriori_inv_sqrt_n()],
        delta_rule: DeltaRule::SampleStd,
        sample_sizes: vec![5, 50, 500],
        replications: 30,
        base_seed: 77,
    }
}

fn run(config: &StudyConfig) -> (Problem, StudyResult) {
    let problem = Problem::from_config(config).unwrap();
    let result = run_study_with(&problem, config, None).unwrap();
    (problem, result)
}

fn grid(k: usize) -> f64 {
    let mut a = 1.0;
    for _ in 0..k {
        a *= Q;
    }
    a
}

#[test]
fn cells_cover_every_rule_and_sample_size() {
    let config = small_config(FilterConfig::Tikhonov);
    let (_, result) = run(&config);
    assert_eq!(result.cells.len(), 9);
    for rule in ["dp", "dp+es", "a priori"] {
        for n in [5, 50, 500] {
            let cell = result.cell(rule, n).unwrap();
            assert_eq!(cell.records.len(), 30);
            assert_eq!(cell.failed, 0);
            assert!(cell.summary.is_some());
        }
    }
}

#[test]
fn discrepancy_choices_are_certified_grid_points() {
    for filter in [
        FilterConfig::Tikhonov,
        FilterConfig::Tsvd,
        FilterConfig::IteratedTikhonov { order: 2 },
    ] {
        let (_, result) = run(&small_config(filter));
        for n in [5, 50, 500] {
            for r in &result.cell("dp", n).unwrap().records {
                assert_eq!(r.certified, Some(true), "n={n} replication {}", r.replication);
                assert!(!r.emergency);
                assert_eq!(r.alpha, grid(r.k));
            }
        }
    }
}

#[test]
fn rules_share_the_batch_of_a_replication() {
    let (_, result) = run(&small_config(FilterConfig::Tikhonov));
    for n in [5, 50, 500] {
        let dp = &result.cell("dp", n).unwrap().records;
        for other in ["dp+es", "a priori"] {
            for (a, b) in dp.iter().zip(&result.cell(other, n).unwrap().records) {
                assert_eq!(a.delta_true, b.delta_true);
                assert_eq!(a.delta_est, b.delta_est);
            }
        }
    }
}

#[test]
fn emergency_stop_only_ever_raises_alpha() {
    let (_, result) = run(&small_config(FilterConfig::Tsvd));
    for n in [5, 50, 500] {
        let dp = &result.cell("dp", n).unwrap().records;
        let es = &result.cell("dp+es", n).unwrap().records;
        for (a, b) in dp.iter().zip(es) {
            // dp+es stops at the later of the dp index and the first q^k ≤ 1/n.
            if a.alpha > Q / n as f64 {
                assert_eq!(a, b);
            } else {
                assert!(b.emergency);
                assert!(b.alpha <= 1.0 / n as f64 && b.alpha > Q / n as f64);
            }
        }
    }
}

#[test]
fn emergency_stop_error_bound() {
    // ‖R_α Ȳ − x̂‖ ≤ ‖R_α‖ δ_true + ‖R_α ŷ − x̂‖ with ‖R_α‖² ≤ C_R C_F / α ≤ C_R C_F n / q.
    let config = small_config(FilterConfig::Tikhonov);
    let (problem, result) = run(&config);
    let y_hat = problem.op.project_data(&problem.y_hat_raw.coefficients).unwrap();
    let spec = &problem.filter;
    for n in [5, 50, 500] {
        for r in &result.cell("dp+es", n).unwrap().records {
            let exact = apply_regularizer(&problem.op, spec, r.alpha, &y_hat).unwrap();
            let bias = problem.error(&exact.x).unwrap();
            let noise = problem.norm_weight.sqrt()
                * (spec.c_r * spec.c_f * n as f64 / Q).sqrt()
                * r.delta_true;
            assert!(r.error <= noise + bias + 1e-12, "n={n}: {} > {}", r.error, noise + bias);
        }
    }
}

#[test]
fn thread_count_does_not_change_results() {
    let config = small_config(FilterConfig::Tikhonov);
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let a = one.install(|| run_study(&config, None).unwrap());
    let b = four.install(|| run_study(&config, None).unwrap());
    assert_eq!(
        avgreg::study::summary_csv(&a),
        avgreg::study::summary_csv(&b)
    );
    for (x, y) in a.cells.iter().zip(&b.cells) {
        assert_eq!(avgreg::study::cell_csv(x), avgreg::study::cell_csv(y));
    }
}

#[test]
fn counterexample_discrepancy_undershoots_and_emergency_rescues() {
    for n in [2usize, 3, 4] {
        let config = StudyConfig {
            schema_version: SCHEMA_VERSION,
            scenario: ScenarioConfig::Counterexample {
                m: n * (n - 1) + 8,
                forced_latent: Some(1.0),
            },
            filter: FilterConfig::Tsvd,
            rules: vec![RuleConfig::dp(), RuleConfig::dp_es()],
            delta_rule: DeltaRule::InvSqrtN,
            sample_sizes: vec![n],
            replications: 3,
            base_seed: 0,
        };
        let (_, result) = run(&config);
        let level = 100f64.powi(-(n as i32));
        for r in &result.cell("dp", n).unwrap().records {
            assert!(r.alpha < level, "n={n}: α={}", r.alpha);
        }
        let floor = 1.0 / n as f64;
        for r in &result.cell("dp+es", n).unwrap().records {
            assert!(r.emergency);
            assert!(r.alpha <= floor && r.alpha > Q * floor);
        }
    }
}

use lte_core::nuisance::NuisanceSpec;
use lte_core::simulation::{
    calibrate_beta0, generate, run_monte_carlo_with, truth_oracle, McEstimator, OutcomeModel, ScenarioConfig,
    SelectionModel,
};
use lte_core::{EstimatorConfig, EstimatorKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

fn expit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn small() -> ScenarioConfig {
    ScenarioConfig {
        cohort_size: 20_000,
        n_trial: 400,
        n_target: 500,
        reps: 20,
        calibration_size: 100_000,
        oracle_size: 200_000,
        ..ScenarioConfig::default()
    }
}

#[test]
fn flat_selection_calibrates_to_the_logit_of_the_fraction() {
    let config = ScenarioConfig {
        selection: SelectionModel { l1: 0.0, l2: 0.0, l3: 0.0, l3_sq: 0.0 },
        calibration_size: 1000,
        ..small()
    };
    let beta0 = calibrate_beta0(&config).unwrap();
    let f: f64 = 400.0 / 20_000.0;
    assert!((beta0 - (f / (1.0 - f)).ln()).abs() < 1e-12, "{beta0}");
}

#[test]
fn calibrated_intercept_hits_the_expected_trial_size() {
    let config = ScenarioConfig { cohort_size: 100_000, n_trial: 1000, calibration_size: 1_000_000, ..small() };
    let beta0 = calibrate_beta0(&config).unwrap();
    // Independent covariate draw, selection model written out.
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let draws = 2_000_000;
    let mut total = 0.0;
    for _ in 0..draws {
        let l1: f64 = rng.sample(StandardNormal);
        let l2: f64 = rng.sample(StandardNormal);
        let l3 = 2.0 * rng.random::<f64>();
        total += expit(beta0 + l1 + l2 + l3 - 0.5 * l3 * l3);
    }
    let expected = 100_000.0 * total / draws as f64;
    assert!((expected - 1000.0).abs() <= 5.0, "expected trial size {expected}");
}

#[test]
fn intercept_increases_with_trial_size() {
    let b: Vec<f64> = [250, 500, 1000, 2000]
        .iter()
        .map(|&n| calibrate_beta0(&ScenarioConfig { n_trial: n, ..small() }).unwrap())
        .collect();
    assert!(b.windows(2).all(|w| w[0] < w[1]), "{b:?}");
}

#[test]
fn generation_is_deterministic_per_replicate() {
    let config = small();
    let beta0 = calibrate_beta0(&config).unwrap();
    let a = generate(&config, beta0, 3).unwrap();
    assert_eq!(a, generate(&config, beta0, 3).unwrap());
    assert_ne!(a, generate(&config, beta0, 4).unwrap());
    assert_eq!(a.source_counts().0, 500);
    assert!(a.outcome().iter().zip(a.source()).all(|(y, &s)| y.is_some() == (s == 0)));
}

#[test]
fn trial_randomization_is_balanced() {
    let config = ScenarioConfig { cohort_size: 200_000, n_trial: 20_000, ..small() };
    let table = generate(&config, calibrate_beta0(&config).unwrap(), 0).unwrap();
    let trial = table.rows_in_source(1);
    let treated = trial.iter().filter(|&&i| table.treatment()[i] == Some(1)).count() as f64;
    let n = trial.len() as f64;
    assert!((treated / n - 0.5).abs() < 4.0 * (0.25 / n).sqrt(), "rate {}", treated / n);
}

#[test]
fn unselected_covariates_have_their_marginals() {
    let config = ScenarioConfig {
        cohort_size: 200_000,
        n_trial: 20_000,
        n_target: 50_000,
        selection: SelectionModel { l1: 0.0, l2: 0.0, l3: 0.0, l3_sq: 0.0 },
        ..small()
    };
    let table = generate(&config, calibrate_beta0(&config).unwrap(), 0).unwrap();
    let n = table.n() as f64;
    let moments = |j: usize| {
        let v = &table.covariates()[j].values;
        let m = v.iter().sum::<f64>() / n;
        (m, v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n)
    };
    let ((m1, v1), (m2, v2), (m3, v3)) = (moments(0), moments(1), moments(2));
    let se = (1.0 / n).sqrt();
    assert!(m1.abs() < 4.0 * se && m2.abs() < 4.0 * se);
    assert!((v1 - 1.0).abs() < 0.03 && (v2 - 1.0).abs() < 0.03);
    assert!((m3 - 1.0).abs() < 4.0 * (1.0 / (3.0 * n)).sqrt());
    assert!((v3 - 1.0 / 3.0).abs() < 0.01);
    let l3 = &table.covariates()[2].values;
    assert!(l3.iter().all(|&x| (0.0..2.0).contains(&x)));
}

#[test]
fn oracle_respects_degenerate_structures() {
    let config = small();
    let beta0 = calibrate_beta0(&config).unwrap();
    let certain = ScenarioConfig { outcome: OutcomeModel { intercept: 60.0, ..OutcomeModel::default() }, ..config.clone() };
    for a in 0..2 {
        let v = truth_oracle(&certain, beta0, a).unwrap();
        assert!((v.value - 1.0).abs() < 1e-15 && v.mc_se < 1e-15);
    }
    let null = ScenarioConfig { outcome: OutcomeModel { exposure: 0.0, ..OutcomeModel::default() }, ..config.clone() };
    assert_eq!(truth_oracle(&null, beta0, 0).unwrap().value, truth_oracle(&null, beta0, 1).unwrap().value);
    let (p0, p1) = (truth_oracle(&config, beta0, 0).unwrap(), truth_oracle(&config, beta0, 1).unwrap());
    assert!(p1.value > p0.value + 10.0 * (p0.mc_se + p1.mc_se));
    assert_eq!(p1, truth_oracle(&config, beta0, 1).unwrap());
}

#[test]
fn oracle_column_has_zero_bias_and_metrics_are_consistent() {
    let config = small();
    let beta0 = calibrate_beta0(&config).unwrap();
    let truth = truth_oracle(&config, beta0, 1).unwrap();
    let ests = [
        McEstimator::oracle(1),
        McEstimator::new(EstimatorConfig { nuisance: NuisanceSpec::main_effects(), ..EstimatorConfig::new(EstimatorKind::Tmle, 1) }),
        McEstimator::new(EstimatorConfig { nuisance: NuisanceSpec::main_effects(), ..EstimatorConfig::new(EstimatorKind::Ice, 1) }),
    ];
    let r = run_monte_carlo_with(&config, &ests, beta0, &[(1, truth)], None).unwrap();
    let o = &r.metrics[0];
    assert_eq!((o.bias100, o.se100, o.mse100), (0.0, 0.0, 0.0));
    assert_eq!(o.coverage, None);
    for m in &r.metrics[1..] {
        assert_eq!(m.failures, 0);
        assert_eq!(m.reps, 20);
        let reps = m.reps as f64;
        // rmse^2 = bias^2 + (r - 1) / r * sd^2
        let lhs = m.mse100.powi(2);
        let rhs = m.bias100.powi(2) + (reps - 1.0) / reps * m.se100.powi(2);
        assert!((lhs - rhs).abs() < 1e-9 * lhs.max(1.0), "{lhs} vs {rhs}");
        let cov = m.coverage.unwrap();
        assert!((0.0..=100.0).contains(&cov));
        assert!((m.mc_se_bias100 - m.se100 / reps.sqrt()).abs() < 1e-12);
        assert!((m.scaled_bias - (900.0f64).sqrt() * m.bias100.abs() / 100.0).abs() < 1e-12);
    }
    let again = run_monte_carlo_with(&config, &ests, beta0, &[(1, truth)], None).unwrap();
    assert_eq!(r, again);
}

#[test]
fn three_arm_scenario_orders_the_arms() {
    let config = ScenarioConfig { n_trial: 3000, n_target: 1000, ..ScenarioConfig { cohort_size: 50_000, ..ScenarioConfig::three_arm() } };
    let config = ScenarioConfig { calibration_size: 100_000, oracle_size: 200_000, ..config };
    let beta0 = calibrate_beta0(&config).unwrap();
    let table = generate(&config, beta0, 0).unwrap();
    assert_eq!(table.treatment_levels(), 3);
    let trial = table.rows_in_source(1);
    for a in 0..3 {
        let share = trial.iter().filter(|&&i| table.treatment()[i] == Some(a)).count() as f64 / trial.len() as f64;
        assert!((share - 1.0 / 3.0).abs() < 0.05, "arm {a}: {share}");
    }
    let psi: Vec<f64> = (0..3).map(|a| truth_oracle(&config, beta0, a).unwrap().value).collect();
    assert!(psi[1] > psi[2] && psi[2] > psi[0], "{psi:?}");
    let r = lte_core::estimate(&table, &EstimatorConfig::new(EstimatorKind::Tmle, 2)).unwrap();
    assert!((r.psi_hat - psi[2]).abs() < 5.0 * r.std_err, "{} vs {}", r.psi_hat, psi[2]);
}

mod common;

use lte_core::data::ObservabilityMode;
use lte_core::eif::{gformula_exact, gformula_pooled_exact, DiscreteLaw};
use lte_core::nuisance::NuisanceSpec;
use lte_core::simulation::{calibrate_beta0, generate, ScenarioConfig};
use lte_core::{estimate, EstimatorConfig, EstimatorKind, VarianceMethod};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn config(kind: EstimatorKind, level: u32, nuisance: NuisanceSpec) -> EstimatorConfig {
    EstimatorConfig { nuisance, ..EstimatorConfig::new(kind, level) }
}

fn random_counts(rng: &mut ChaCha8Rng, cells: usize) -> Vec<u64> {
    (0..cells).map(|_| rng.random_range(1..=9)).collect()
}

#[test]
fn saturated_estimators_reproduce_the_gformula() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for cov in [vec![2], vec![2, 3]] {
        let patterns: usize = cov.iter().product();
        let counts = random_counts(&mut rng, 2 * patterns * 8);
        // A non-unit outcome scale exercises the rescaling.
        let law = DiscreteLaw::from_counts(cov.clone(), 2, 2, vec![-2.0, 3.5], &counts).unwrap();
        let table = common::law_table(&law, &counts, ObservabilityMode::TreatmentUnmeasured);
        let pooled = common::law_table(&law, &counts, ObservabilityMode::PooledOutcome);
        for a in 0..2u32 {
            let psi = gformula_exact(&law, a as usize).unwrap();
            for kind in [EstimatorKind::Ice, EstimatorKind::Ipw, EstimatorKind::Tmle] {
                let r = estimate(&table, &config(kind, a, NuisanceSpec::saturated())).unwrap();
                assert!((r.psi_hat - psi).abs() < 1e-8, "{kind} a={a}: {} vs {psi}", r.psi_hat);
                assert!(r.ci[0] <= r.psi_hat && r.psi_hat <= r.ci[1]);
            }
            let tmle = estimate(&table, &config(EstimatorKind::Tmle, a, NuisanceSpec::saturated())).unwrap();
            assert!(tmle.fluctuation.iter().all(|e| e.abs() < 1e-8), "{:?}", tmle.fluctuation);
            let ice = estimate(&table, &config(EstimatorKind::Ice, a, NuisanceSpec::saturated())).unwrap();
            assert!((tmle.psi_hat - ice.psi_hat).abs() < 1e-10);

            let psi_pooled = gformula_pooled_exact(&law, a as usize).unwrap();
            let r = estimate(&pooled, &config(EstimatorKind::TmlePooled, a, NuisanceSpec::saturated())).unwrap();
            assert!((r.psi_hat - psi_pooled).abs() < 1e-8, "pooled a={a}: {} vs {psi_pooled}", r.psi_hat);
        }
    }
}

#[test]
fn constant_outcome_is_returned_with_zero_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let counts = random_counts(&mut rng, 2 * 2 * 2 * 2);
    let law = DiscreteLaw::from_counts(vec![2], 2, 2, vec![0.7], &counts).unwrap();
    let table = common::law_table(&law, &counts, ObservabilityMode::TreatmentUnmeasured);
    for kind in [EstimatorKind::Ice, EstimatorKind::Tmle] {
        let r = estimate(&table, &config(kind, 1, NuisanceSpec::main_effects())).unwrap();
        assert_eq!(r.psi_hat, 0.7);
        assert_eq!(r.std_err, 0.0);
        assert!(r.degenerate_outcome);
        assert_eq!(r.ci, [0.7, 0.7]);
    }
    // Saturated exposure weights average to one over the target rows.
    let r = estimate(&table, &config(EstimatorKind::Ipw, 1, NuisanceSpec::saturated())).unwrap();
    assert!((r.psi_hat - 0.7).abs() < 1e-10);
}

#[test]
fn ipw_with_unit_weights_is_the_target_mean() {
    // The exposure law depends on L only, identical across sources and arms.
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let patterns = 3;
    let pm: Vec<[u64; 2]> = (0..patterns).map(|_| [rng.random_range(1..5), rng.random_range(1..5)]).collect();
    let mut counts = Vec::new();
    for _s in 0..2 {
        for l in 0..patterns {
            let pa = [rng.random_range(1..4u64), rng.random_range(1..4u64)];
            for a in 0..2 {
                let py: [[u64; 2]; 2] = [[rng.random_range(1..4), rng.random_range(1..4)], [rng.random_range(1..4), rng.random_range(1..4)]];
                for m in 0..2 {
                    let ty: u64 = py[m].iter().sum();
                    for y in 0..2 {
                        // 60 is divisible by every row total, so P(m | l, a, s) is exact.
                        counts.push(pa[a] * pm[l][m] * py[m][y] * 60 / ty);
                    }
                }
            }
        }
    }
    let law = DiscreteLaw::from_counts(vec![patterns], 2, 2, vec![0.0, 1.0], &counts).unwrap();
    let table = common::law_table(&law, &counts, ObservabilityMode::TreatmentUnmeasured);
    let target = table.rows_in_source(0);
    let mean = target.iter().map(|&i| table.outcome()[i].unwrap()).sum::<f64>() / target.len() as f64;
    let r = estimate(&table, &config(EstimatorKind::Ipw, 1, NuisanceSpec::saturated())).unwrap();
    assert!((r.psi_hat - mean).abs() < 1e-8, "{} vs {mean}", r.psi_hat);
}

fn simulated(seed: u64, n_trial: usize, n_target: usize) -> lte_core::ObservationTable {
    let config = ScenarioConfig {
        cohort_size: 50_000,
        n_trial,
        n_target,
        calibration_size: 100_000,
        seed,
        ..ScenarioConfig::default()
    };
    generate(&config, calibrate_beta0(&config).unwrap(), 0).unwrap()
}

#[test]
fn tmle_solves_the_influence_function_equation() {
    let table = simulated(4, 600, 800);
    for spec in [NuisanceSpec::main_effects(), NuisanceSpec::additive_splines()] {
        let r = estimate(&table, &config(EstimatorKind::Tmle, 1, spec)).unwrap();
        assert!(r.targeting_converged);
        assert!(r.eif_residual.abs() < 1e-6, "residual {}", r.eif_residual);
        assert!(r.std_err > 0.0);
    }
}

#[test]
fn bootstrap_is_deterministic_per_seed() {
    let table = simulated(5, 300, 400);
    let boot = |seed| {
        let cfg = EstimatorConfig {
            variance: VarianceMethod::Bootstrap { reps: 10, seed },
            ..config(EstimatorKind::Tmle, 1, NuisanceSpec::main_effects())
        };
        estimate(&table, &cfg).unwrap()
    };
    let (a, b, c) = (boot(7), boot(7), boot(8));
    assert_eq!(a, b);
    assert_ne!(a.bootstrap.as_ref().unwrap().std_err, c.bootstrap.as_ref().unwrap().std_err);
    assert_eq!(a.psi_hat, c.psi_hat);
    let s = a.bootstrap.unwrap();
    assert_eq!((s.reps, s.failed, s.seed), (10, 0, 7));
    assert!(a.ci[0] <= a.psi_hat && a.psi_hat <= a.ci[1]);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn plug_in_and_targeted_estimates_stay_in_the_outcome_range(seed in any::<u64>(), lo in -5.0f64..0.0, width in 0.5f64..4.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let counts = random_counts(&mut rng, 2 * 6 * 8);
        let law = DiscreteLaw::from_counts(vec![2, 3], 2, 2, vec![lo, lo + width], &counts).unwrap();
        let table = common::law_table(&law, &counts, ObservabilityMode::TreatmentUnmeasured);
        for kind in [EstimatorKind::Ice, EstimatorKind::Tmle] {
            let r = estimate(&table, &config(kind, 1, NuisanceSpec::main_effects())).unwrap();
            prop_assert!(r.psi_hat >= lo && r.psi_hat <= lo + width, "{kind}: {}", r.psi_hat);
        }
    }
}

//! Shared workloads for the benchmarks.

use lte_core::glm::DesignMatrix;
use lte_core::simulation::{calibrate_beta0, generate, ScenarioConfig};
use lte_core::ObservationTable;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random logistic design with `p` columns (intercept first) and responses
/// drawn from the model.
pub fn logistic_problem(n: usize, p: usize, seed: u64) -> (DesignMatrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let beta: Vec<f64> = (0..p).map(|j| if j == 0 { -0.3 } else { rng.random_range(-1.0..1.0) / p as f64 }).collect();
    let mut rows = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let mut row = vec![1.0];
        row.extend((1..p).map(|_| rng.random_range(-2.0..2.0)));
        let eta: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
        y.push(if rng.random::<f64>() < 1.0 / (1.0 + (-eta).exp()) { 1.0 } else { 0.0 });
        rows.push(row);
    }
    let names = (0..p).map(|j| format!("x{j}")).collect();
    (DesignMatrix::from_rows(&rows, names).expect("rectangular rows"), y)
}

/// One replicate of the default simulation scenario at the given sizes.
pub fn scenario_sample(n_trial: usize, n_target: usize) -> ObservationTable {
    let config = ScenarioConfig {
        n_trial,
        n_target,
        calibration_size: 200_000,
        ..ScenarioConfig::default()
    };
    let beta0 = calibrate_beta0(&config).expect("calibration converges");
    generate(&config, beta0, 0).expect("replicate generates")
}

//! Simulation study: a cohort-based data-generating process with selection
//! into a trial, its counterfactual truth, and a Monte Carlo harness.

mod dgp;
mod mc;
mod presets;
mod scenario;

pub use dgp::{calibrate_beta0, generate, scenario_mode, scenario_spec, truth_oracle, OracleValue};
pub use mc::{
    run_monte_carlo, run_monte_carlo_with, write_metrics_csv, McEstimator, McMethod, McMetrics, McResult, Progress,
    RepEstimate,
};
pub use presets::{run_plan, SimulationPlan};
pub use scenario::{Arms, ExposureModel, OutcomeModel, ScenarioConfig, SelectionModel};

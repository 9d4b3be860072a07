//! Named simulation grids.

use serde::{Deserialize, Serialize};

use super::{run_monte_carlo, McEstimator, McMetrics, Progress, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorConfig, EstimatorKind};
use crate::nuisance::NuisanceSpec;

const TRIAL_SIZES: [usize; 6] = [250, 500, 750, 1000, 1500, 2000];

/// A scenario swept over trial and target sample sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulationPlan {
    pub scenario: ScenarioConfig,
    pub n_trial_grid: Vec<usize>,
    pub n_target_grid: Vec<usize>,
    pub estimators: Vec<McEstimator>,
}

fn estimators(kinds: &[EstimatorKind], nuisance: &NuisanceSpec) -> Vec<McEstimator> {
    kinds
        .iter()
        .map(|&k| McEstimator::new(EstimatorConfig { nuisance: nuisance.clone(), ..EstimatorConfig::new(k, 1) }))
        .collect()
}

impl SimulationPlan {
    pub const PRESETS: [&'static str; 4] = ["table2", "table3", "smoke", "pooled"];

    /// Look up a preset by name.
    pub fn preset(name: &str) -> Result<Self> {
        let splines = NuisanceSpec::additive_splines();
        let singly = [EstimatorKind::Ice, EstimatorKind::Ipw, EstimatorKind::Tmle];
        let plan = match name {
            "table2" => Self {
                scenario: ScenarioConfig::default(),
                n_trial_grid: TRIAL_SIZES.to_vec(),
                n_target_grid: vec![2500, 3000, 5000],
                estimators: estimators(&singly, &splines),
            },
            "table3" => Self {
                scenario: ScenarioConfig::default(),
                n_trial_grid: TRIAL_SIZES.to_vec(),
                n_target_grid: vec![3000],
                estimators: estimators(&singly, &splines),
            },
            "smoke" => Self {
                scenario: ScenarioConfig {
                    cohort_size: 20_000,
                    reps: 2,
                    oracle_size: 200_000,
                    calibration_size: 100_000,
                    ..ScenarioConfig::default()
                },
                n_trial_grid: vec![300],
                n_target_grid: vec![500],
                estimators: estimators(&singly, &NuisanceSpec::main_effects()),
            },
            "pooled" => {
                let mut scenario = ScenarioConfig { outcome_in_trial: true, reps: 200, ..ScenarioConfig::default() };
                scenario.outcome.source = 0.0;
                Self {
                    scenario,
                    n_trial_grid: vec![2000],
                    n_target_grid: vec![2500],
                    estimators: estimators(&[EstimatorKind::Tmle, EstimatorKind::TmlePooled], &splines),
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (expected one of {})",
                    Self::PRESETS.join(", ")
                )))
            }
        };
        Ok(plan)
    }

    /// Scenario for one grid cell.
    pub fn cell(&self, n_trial: usize, n_target: usize) -> ScenarioConfig {
        ScenarioConfig { n_trial, n_target, ..self.scenario.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trial_grid.is_empty() || self.n_target_grid.is_empty() {
            return Err(Error::Config("sample-size grids must be non-empty".into()));
        }
        for &t in &self.n_target_grid {
            for &s in &self.n_trial_grid {
                self.cell(s, t).validate()?;
            }
        }
        Ok(())
    }
}

/// Run every grid cell, target sizes outermost. `progress` receives
/// `(cell, completed, total)`.
pub fn run_plan(plan: &SimulationPlan, progress: Option<&(dyn Fn(usize, usize, usize) + Sync)>) -> Result<Vec<McMetrics>> {
    plan.validate()?;
    let mut out = Vec::new();
    let mut cell = 0;
    for &t in &plan.n_target_grid {
        for &s in &plan.n_trial_grid {
            let p = |done: usize, total: usize| {
                if let Some(f) = progress {
                    f(cell, done, total);
                }
            };
            let cb: Progress<'_> = &p;
            out.extend(run_monte_carlo(&plan.cell(s, t), &plan.estimators, Some(cb))?.metrics);
            cell += 1;
        }
    }
    Ok(out)
}

//! Estimation of long-term counterfactual means `E(Y^a | S = 0)` in a target
//! population by combining a randomized trial (which measures treatment and a
//! short-term exposure) with an observational sample (which measures the
//! exposure and the long-term outcome).
//!
//! The crate provides the g-formula on discrete laws, the efficient influence
//! function, four estimators (ICE, IPW, TMLE and a pooled-outcome TMLE),
//! EIF and bootstrap variance estimation, and a Monte Carlo harness for the
//! simulation design used to benchmark them.

pub mod data;
pub mod diagnostics;
pub mod eif;
pub mod estimators;
pub mod error;
pub mod glm;
pub mod nuisance;
pub mod simulation;
pub mod stats;

pub use error::{Error, Result};

pub use data::{ColumnSpec, Kind, ObservabilityMode, ObservationTable, Role, TableSpec};
pub use diagnostics::{positivity_report, PositivityReport};
pub use eif::{efficiency_bound, gformula_exact, DiscreteLaw, EifComponents, EifForm};
pub use estimators::{estimate, EstimateReport, EstimatorConfig, EstimatorKind, VarianceMethod};
pub use nuisance::{fit_nuisances, NuisanceSet, NuisanceSpec, Parameterization};
pub use simulation::{run_monte_carlo, McMetrics, ScenarioConfig, SimulationPlan};

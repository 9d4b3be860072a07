//! ICE, IPW and TMLE estimators of the target-population mean under
//! treatment, with influence-function or bootstrap uncertainty.

mod bootstrap;
mod point;

pub use bootstrap::{bootstrap, replicate_rng, stratified_resample, BootstrapSummary, MAX_FAILURE_RATE};
pub use point::{point_estimate, EstimatorKind, PointEstimate, TargetingOptions};

use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::error::Result;
use crate::nuisance::{fit_nuisances, NuisanceProvenance, NuisanceSet, NuisanceSpec};
use crate::stats::Z_975;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "method")]
pub enum VarianceMethod {
    /// Wald interval from the plug-in influence-function variance.
    EifPlugin,
    /// Source-stratified nonparametric bootstrap with a percentile interval.
    Bootstrap { reps: usize, seed: u64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub kind: EstimatorKind,
    pub treatment_level: u32,
    pub nuisance: NuisanceSpec,
    pub variance: VarianceMethod,
    pub targeting: TargetingOptions,
}

impl EstimatorConfig {
    pub fn new(kind: EstimatorKind, treatment_level: u32) -> Self {
        Self {
            kind,
            treatment_level,
            nuisance: NuisanceSpec::default(),
            variance: VarianceMethod::EifPlugin,
            targeting: TargetingOptions::default(),
        }
    }

    /// The nuisance spec with the pooling flag the estimator requires.
    pub fn nuisance_spec(&self) -> NuisanceSpec {
        NuisanceSpec { pooled_outcome: self.kind.is_pooled(), ..self.nuisance.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub treatment_level: u32,
    pub psi_hat: f64,
    pub std_err: f64,
    /// 95% interval.
    pub ci: [f64; 2],
    /// Mean influence function at the estimate (unit outcome scale).
    pub eif_residual: f64,
    pub variance: VarianceMethod,
    /// The percentile interval did not contain the point estimate and was
    /// widened to include it.
    pub ci_adjusted: bool,
    pub fluctuation: Vec<f64>,
    pub targeting_converged: bool,
    pub degenerate_outcome: bool,
    pub bootstrap: Option<BootstrapSummary>,
    pub nuisance: NuisanceProvenance,
}

/// Fit nuisances, compute the estimate and its interval.
pub fn estimate(table: &ObservationTable, config: &EstimatorConfig) -> Result<EstimateReport> {
    let ns = fit_nuisances(table, &config.nuisance_spec(), config.treatment_level)?;
    estimate_with(table, &ns, config)
}

/// As [`estimate`], reusing already fitted nuisances for the point estimate.
pub fn estimate_with(table: &ObservationTable, ns: &NuisanceSet, config: &EstimatorConfig) -> Result<EstimateReport> {
    let point = point_estimate(table, ns, config.kind, &config.targeting)?;
    let (std_err, ci, ci_adjusted, boot) = match config.variance {
        VarianceMethod::EifPlugin => {
            let half = Z_975 * point.std_err;
            (point.std_err, [point.psi - half, point.psi + half], false, None)
        }
        VarianceMethod::Bootstrap { reps, seed } => {
            let b = bootstrap(table, config, reps, seed)?;
            let mut ci = [b.lower, b.upper];
            let adjusted = point.psi < ci[0] || point.psi > ci[1];
            ci[0] = ci[0].min(point.psi);
            ci[1] = ci[1].max(point.psi);
            (b.std_err, ci, adjusted, Some(b))
        }
    };
    Ok(EstimateReport {
        estimator: config.kind,
        treatment_level: config.treatment_level,
        psi_hat: point.psi,
        std_err,
        ci,
        eif_residual: point.eif_residual,
        variance: config.variance,
        ci_adjusted,
        fluctuation: point.fluctuation,
        targeting_converged: point.targeting_converged,
        degenerate_outcome: point.degenerate_outcome,
        bootstrap: boot,
        nuisance: ns.provenance().clone(),
    })
}

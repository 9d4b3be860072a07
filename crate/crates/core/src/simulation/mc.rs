//! Monte Carlo harness: replicate, estimate, and summarize against truth.

use std::io::Write;
use std::sync::atomic::{AtomicUsize, Ordering};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{calibrate_beta0, generate, truth_oracle, OracleValue, ScenarioConfig};
use crate::error::{Error, Result};
use crate::estimators::{estimate_with, EstimatorConfig, MAX_FAILURE_RATE};
use crate::nuisance::{fit_nuisances, NuisanceSet, NuisanceSpec};
use crate::stats::{mean, sample_variance};

/// What a Monte Carlo column estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum McMethod {
    Estimator(EstimatorConfig),
    /// Always returns the true value; checks the harness itself.
    OracleConstant { treatment_level: u32 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimator {
    pub label: String,
    pub method: McMethod,
}

impl McEstimator {
    pub fn new(config: EstimatorConfig) -> Self {
        Self { label: config.kind.name().to_string(), method: McMethod::Estimator(config) }
    }

    pub fn labeled(label: impl Into<String>, config: EstimatorConfig) -> Self {
        Self { label: label.into(), method: McMethod::Estimator(config) }
    }

    pub fn oracle(treatment_level: u32) -> Self {
        Self { label: "oracle".into(), method: McMethod::OracleConstant { treatment_level } }
    }

    pub fn treatment_level(&self) -> u32 {
        match &self.method {
            McMethod::Estimator(c) => c.treatment_level,
            McMethod::OracleConstant { treatment_level } => *treatment_level,
        }
    }
}

/// One replicate's estimate with its 95% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RepEstimate {
    pub psi: f64,
    pub std_err: f64,
    pub lower: f64,
    pub upper: f64,
}

/// Summary metrics for one estimator; `*100` fields are multiplied by 100.
/// `mse100` is the root mean squared error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McMetrics {
    pub estimator: String,
    pub n_trial: usize,
    pub n_target: usize,
    pub reps: usize,
    pub failures: usize,
    pub truth: f64,
    pub bias100: f64,
    pub se100: f64,
    pub mse100: f64,
    /// `sqrt(n_trial + n_target) * |bias|`.
    pub scaled_bias: f64,
    /// Percent of intervals containing the truth; absent for estimators
    /// without intervals.
    pub coverage: Option<f64>,
    /// Mean estimated standard error times 100.
    pub mean_std_err100: f64,
    pub mc_se_bias100: f64,
    pub mc_se_se100: f64,
    pub mc_se_mse100: f64,
    pub mc_se_coverage: Option<f64>,
}

/// Full output of a run: metrics plus every replicate estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct McResult {
    pub beta0: f64,
    pub truths: Vec<(u32, OracleValue)>,
    pub metrics: Vec<McMetrics>,
    /// `estimates[k][r]` for estimator `k`, replicate `r`.
    pub estimates: Vec<Vec<Option<RepEstimate>>>,
}

/// Progress callback: `(completed, total)` replicates.
pub type Progress<'a> = &'a (dyn Fn(usize, usize) + Sync);

/// Calibrate, compute the truth for each treatment level, then run
/// `config.reps` replicates.
pub fn run_monte_carlo(
    config: &ScenarioConfig,
    estimators: &[McEstimator],
    progress: Option<Progress<'_>>,
) -> Result<McResult> {
    let beta0 = calibrate_beta0(config)?;
    let mut truths: Vec<(u32, OracleValue)> = Vec::new();
    for e in estimators {
        let a = e.treatment_level();
        if !truths.iter().any(|(l, _)| *l == a) {
            truths.push((a, truth_oracle(config, beta0, a as usize)?));
        }
    }
    run_monte_carlo_with(config, estimators, beta0, &truths, progress)
}

/// As [`run_monte_carlo`] with a known intercept and truth values.
pub fn run_monte_carlo_with(
    config: &ScenarioConfig,
    estimators: &[McEstimator],
    beta0: f64,
    truths: &[(u32, OracleValue)],
    progress: Option<Progress<'_>>,
) -> Result<McResult> {
    config.validate()?;
    if estimators.is_empty() {
        return Err(Error::Config("no estimators to run".into()));
    }
    let truth_of = |a: u32| {
        truths
            .iter()
            .find(|(l, _)| *l == a)
            .map(|(_, v)| *v)
            .ok_or_else(|| Error::Config(format!("no truth value for treatment level {a}")))
    };
    for e in estimators {
        truth_of(e.treatment_level())?;
    }
    let done = AtomicUsize::new(0);
    let reps = config.reps;
    let per_rep: Vec<Vec<std::result::Result<RepEstimate, String>>> = (0..reps as u64)
        .into_par_iter()
        .map(|r| {
            let out = run_replicate(config, estimators, beta0, r, &truth_of);
            let k = done.fetch_add(1, Ordering::Relaxed) + 1;
            if let Some(p) = progress {
                p(k, reps);
            }
            out
        })
        .collect();

    let mut metrics = Vec::with_capacity(estimators.len());
    let mut estimates = Vec::with_capacity(estimators.len());
    for (k, e) in estimators.iter().enumerate() {
        let column: Vec<std::result::Result<RepEstimate, String>> = per_rep.iter().map(|r| r[k].clone()).collect();
        let failures = column.iter().filter(|r| r.is_err()).count();
        if failures as f64 > MAX_FAILURE_RATE * reps as f64 {
            let first = column.iter().find_map(|r| r.as_ref().err().cloned()).unwrap_or_default();
            return Err(Error::Replicates { failed: failures, total: reps, first: format!("{}: {first}", e.label) });
        }
        let ok: Vec<RepEstimate> = column.iter().filter_map(|r| r.as_ref().ok().copied()).collect();
        let truth = truth_of(e.treatment_level())?.value;
        let has_ci = matches!(e.method, McMethod::Estimator(_));
        metrics.push(summarize(&e.label, config, failures, truth, &ok, has_ci));
        estimates.push(column.into_iter().map(|r| r.ok()).collect());
    }
    Ok(McResult { beta0, truths: truths.to_vec(), metrics, estimates })
}

fn run_replicate(
    config: &ScenarioConfig,
    estimators: &[McEstimator],
    beta0: f64,
    rep: u64,
    truth_of: &dyn Fn(u32) -> Result<OracleValue>,
) -> Vec<std::result::Result<RepEstimate, String>> {
    let table = match generate(config, beta0, rep) {
        Ok(t) => t,
        Err(e) => return vec![Err(e.to_string()); estimators.len()],
    };
    // Nuisances are fitted once per distinct (spec, level) and shared.
    let mut fitted: Vec<(NuisanceSpec, u32, std::result::Result<NuisanceSet, String>)> = Vec::new();
    estimators
        .iter()
        .map(|e| match &e.method {
            McMethod::OracleConstant { treatment_level } => {
                let v = truth_of(*treatment_level).map_err(|e| e.to_string())?.value;
                Ok(RepEstimate { psi: v, std_err: 0.0, lower: v, upper: v })
            }
            McMethod::Estimator(c) => {
                let spec = c.nuisance_spec();
                let pos = match fitted.iter().position(|(s, l, _)| *s == spec && *l == c.treatment_level) {
                    Some(p) => p,
                    None => {
                        let ns = fit_nuisances(&table, &spec, c.treatment_level).map_err(|e| e.to_string());
                        fitted.push((spec, c.treatment_level, ns));
                        fitted.len() - 1
                    }
                };
                let ns = fitted[pos].2.as_ref().map_err(Clone::clone)?;
                let r = estimate_with(&table, ns, c).map_err(|e| e.to_string())?;
                if !r.psi_hat.is_finite() || !r.std_err.is_finite() {
                    return Err(format!("non-finite estimate {} (se {})", r.psi_hat, r.std_err));
                }
                Ok(RepEstimate { psi: r.psi_hat, std_err: r.std_err, lower: r.ci[0], upper: r.ci[1] })
            }
        })
        .collect()
}

fn summarize(
    label: &str,
    config: &ScenarioConfig,
    failures: usize,
    truth: f64,
    ok: &[RepEstimate],
    has_ci: bool,
) -> McMetrics {
    let r = ok.len() as f64;
    let psi: Vec<f64> = ok.iter().map(|e| e.psi).collect();
    let bias = mean(&psi) - truth;
    let se = if ok.len() > 1 { sample_variance(&psi).sqrt() } else { 0.0 };
    let sq: Vec<f64> = psi.iter().map(|p| (p - truth).powi(2)).collect();
    let rmse = mean(&sq).sqrt();
    let mc_rmse = if ok.len() > 1 && rmse > 0.0 { sample_variance(&sq).sqrt() / (2.0 * rmse * r.sqrt()) } else { 0.0 };
    let coverage = has_ci.then(|| {
        let hits = ok.iter().filter(|e| e.lower <= truth && truth <= e.upper).count();
        hits as f64 / r
    });
    McMetrics {
        estimator: label.to_string(),
        n_trial: config.n_trial,
        n_target: config.n_target,
        reps: config.reps,
        failures,
        truth,
        bias100: 100.0 * bias,
        se100: 100.0 * se,
        mse100: 100.0 * rmse,
        scaled_bias: ((config.n_trial + config.n_target) as f64).sqrt() * bias.abs(),
        coverage: coverage.map(|c| 100.0 * c),
        mean_std_err100: 100.0 * mean(&ok.iter().map(|e| e.std_err).collect::<Vec<_>>()),
        mc_se_bias100: 100.0 * se / r.sqrt(),
        mc_se_se100: if ok.len() > 1 { 100.0 * se / (2.0 * (r - 1.0)).sqrt() } else { 0.0 },
        mc_se_mse100: 100.0 * mc_rmse,
        mc_se_coverage: coverage.map(|c| 100.0 * (c * (1.0 - c) / r).sqrt()),
    }
}

/// Write metrics as CSV, one row per estimator and scenario.
pub fn write_metrics_csv<W: Write>(metrics: &[McMetrics], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for m in metrics {
        w.serialize(m)?;
    }
    w.flush()?;
    Ok(())
}

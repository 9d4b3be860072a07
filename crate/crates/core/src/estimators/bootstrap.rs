use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{point_estimate, EstimatorConfig};
use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::nuisance::fit_nuisances;
use crate::stats::{quantile_sorted, sample_variance};

/// Largest tolerated fraction of failed replicates.
pub const MAX_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapSummary {
    pub reps: usize,
    pub failed: usize,
    pub seed: u64,
    pub std_err: f64,
    /// 2.5% and 97.5% percentiles of the replicate estimates.
    pub lower: f64,
    pub upper: f64,
}

/// Resample indices within each source, with replacement.
pub fn stratified_resample(table: &ObservationTable, rng: &mut impl Rng) -> Vec<usize> {
    let mut idx = Vec::with_capacity(table.n());
    for s in [0, 1] {
        let rows = table.rows_in_source(s);
        for _ in 0..rows.len() {
            idx.push(rows[rng.random_range(0..rows.len())]);
        }
    }
    idx
}

/// Replicate `b` uses its own ChaCha stream, so results do not depend on
/// thread count or scheduling.
pub fn replicate_rng(seed: u64, b: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(b);
    rng
}

/// Refit nuisances and the estimator on `reps` source-stratified resamples.
pub fn bootstrap(table: &ObservationTable, config: &EstimatorConfig, reps: usize, seed: u64) -> Result<BootstrapSummary> {
    if reps < 2 {
        return Err(Error::Config("bootstrap needs at least two replicates".into()));
    }
    let spec = config.nuisance_spec();
    let results: Vec<Result<f64>> = (0..reps as u64)
        .into_par_iter()
        .map(|b| {
            let idx = stratified_resample(table, &mut replicate_rng(seed, b));
            let t = table.select(&idx)?;
            let ns = fit_nuisances(&t, &spec, config.treatment_level)?;
            Ok(point_estimate(&t, &ns, config.kind, &config.targeting)?.psi)
        })
        .collect();
    let mut est = Vec::with_capacity(reps);
    let mut first = None;
    for r in results {
        match r {
            Ok(v) if v.is_finite() => est.push(v),
            Ok(v) => first = first.or(Some(format!("non-finite estimate {v}"))),
            Err(e) => first = first.or(Some(e.to_string())),
        }
    }
    let failed = reps - est.len();
    if failed as f64 > MAX_FAILURE_RATE * reps as f64 || est.len() < 2 {
        return Err(Error::Replicates { failed, total: reps, first: first.unwrap_or_default() });
    }
    let std_err = sample_variance(&est).sqrt();
    est.sort_by(f64::total_cmp);
    Ok(BootstrapSummary {
        reps,
        failed,
        seed,
        std_err,
        lower: quantile_sorted(&est, 0.025),
        upper: quantile_sorted(&est, 0.975),
    })
}

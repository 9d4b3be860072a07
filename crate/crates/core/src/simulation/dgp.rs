//! Data generation, intercept calibration and the truth oracle.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use super::ScenarioConfig;
use crate::data::{Columns, ColumnSpec, Kind, ObservabilityMode, ObservationTable, Role, TableSpec};
use crate::error::{Error, Result};
use crate::stats::expit;

/// Streams reserved for the calibration and oracle draws; replicate `r`
/// uses stream `r`.
const CALIBRATION_STREAM: u64 = u64::MAX;
const ORACLE_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;
const ORACLE_CHUNK: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
struct Covariates {
    l1: f64,
    l2: f64,
    l3: f64,
}

fn draw_covariates(rng: &mut impl Rng) -> Covariates {
    Covariates { l1: rng.sample(StandardNormal), l2: rng.sample(StandardNormal), l3: 2.0 * rng.random::<f64>() }
}

fn selection_slope(c: &ScenarioConfig, l: Covariates) -> f64 {
    let s = &c.selection;
    s.l1 * l.l1 + s.l2 * l.l2 + s.l3 * l.l3 + s.l3_sq * l.l3 * l.l3
}

fn exposure_prob(c: &ScenarioConfig, a: usize, l: Covariates) -> f64 {
    let e = &c.exposure;
    let effect = if a == 0 { 0.0 } else { e.treatment[a - 1] };
    expit(e.intercept + effect + e.l1 * l.l1 + e.l2 * l.l2 + e.l3 * l.l3)
}

fn outcome_prob(c: &ScenarioConfig, m: u32, s: u8, l: Covariates) -> f64 {
    let o = &c.outcome;
    expit(
        o.intercept
            + o.exposure * f64::from(m)
            + o.l1 * l.l1
            + o.l2 * l.l2
            + o.l3 * l.l3
            + o.l2_l3 * l.l2 * l.l3
            + o.l2_sq * l.l2 * l.l2
            + o.source * f64::from(s),
    )
}

/// Selection intercept giving `cohort_size * E[P(S=1 | L)] = n_trial`,
/// solved on a fixed calibration draw of `L` by safeguarded Newton
/// iteration.
pub fn calibrate_beta0(config: &ScenarioConfig) -> Result<f64> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(CALIBRATION_STREAM);
    let slopes: Vec<f64> =
        (0..config.calibration_size).map(|_| selection_slope(config, draw_covariates(&mut rng))).collect();
    let target = config.n_trial as f64 / config.cohort_size as f64;
    let f = |b: f64| {
        let (mut p, mut d) = (0.0, 0.0);
        for &s in &slopes {
            let e = expit(b + s);
            p += e;
            d += e * (1.0 - e);
        }
        let n = slopes.len() as f64;
        (p / n - target, d / n)
    };
    let (mut lo, mut hi) = (-1.0, 1.0);
    while f(lo).0 > 0.0 {
        lo *= 2.0;
        if lo < -1e4 {
            return Err(Error::Calibration(format!("no intercept gives trial fraction {target}")));
        }
    }
    while f(hi).0 < 0.0 {
        hi *= 2.0;
        if hi > 1e4 {
            return Err(Error::Calibration(format!("no intercept gives trial fraction {target}")));
        }
    }
    let mut b = 0.5 * (lo + hi);
    for _ in 0..200 {
        let (v, d) = f(b);
        if v.abs() <= 1e-14 * target {
            return Ok(b);
        }
        if v > 0.0 {
            hi = b;
        } else {
            lo = b;
        }
        let newton = b - v / d;
        b = if d > 0.0 && newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
        if hi - lo < 1e-15 * (1.0 + b.abs()) {
            return Ok(b);
        }
    }
    Ok(b)
}

/// Column layout of generated tables: `S, L1, L2, L3, A, M, Y`.
pub fn scenario_spec(config: &ScenarioConfig) -> TableSpec {
    let treatment = match config.arms.levels() {
        2 => Kind::Binary,
        k => Kind::Categorical((0..k).map(|v| v.to_string()).collect()),
    };
    TableSpec::new(vec![
        ColumnSpec::new("S", Role::Source, Kind::Binary),
        ColumnSpec::new("L1", Role::Covariate, Kind::Continuous),
        ColumnSpec::new("L2", Role::Covariate, Kind::Continuous),
        ColumnSpec::new("L3", Role::Covariate, Kind::Continuous),
        ColumnSpec::new("A", Role::Treatment, treatment),
        ColumnSpec::new("M", Role::Exposure, Kind::Binary),
        ColumnSpec::new("Y", Role::Outcome, Kind::Binary),
    ])
    .expect("scenario spec is valid")
}

/// Observability mode of generated tables.
pub fn scenario_mode(config: &ScenarioConfig) -> ObservabilityMode {
    if config.outcome_in_trial {
        ObservabilityMode::PooledOutcome
    } else {
        ObservabilityMode::TreatmentZeroSupport
    }
}

/// Replicate `rep`: draw a cohort, select trial participants, sample the
/// target source from non-participants, then treatment, exposure and
/// outcome. Rows keep cohort order.
pub fn generate(config: &ScenarioConfig, beta0: f64, rep: u64) -> Result<ObservationTable> {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(rep);
    let n = config.cohort_size;
    let mut cohort = Vec::with_capacity(n);
    let mut trial = vec![false; n];
    let mut outside = Vec::new();
    for (i, t) in trial.iter_mut().enumerate() {
        let l = draw_covariates(&mut rng);
        *t = rng.random::<f64>() < expit(beta0 + selection_slope(config, l));
        if !*t {
            outside.push(i);
        }
        cohort.push(l);
    }
    if outside.len() < config.n_target {
        return Err(Error::InvalidInput(format!(
            "only {} non-participants for a target sample of {}",
            outside.len(),
            config.n_target
        )));
    }
    let mut target = vec![false; n];
    for k in index::sample(&mut rng, outside.len(), config.n_target) {
        target[outside[k]] = true;
    }

    let probs = config.randomization_probs();
    let mut cols = Columns { covariates: vec![Vec::new(); 3], ..Columns::default() };
    for i in 0..n {
        if !(trial[i] || target[i]) {
            continue;
        }
        let l = cohort[i];
        let s = u8::from(trial[i]);
        let a = if s == 1 {
            let u = rng.random::<f64>();
            let mut acc = 0.0;
            let mut a = probs.len() - 1;
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    a = k;
                    break;
                }
            }
            a
        } else {
            0
        };
        let m = u32::from(rng.random::<f64>() < exposure_prob(config, a, l));
        let y = if s == 0 || config.outcome_in_trial {
            Some(if rng.random::<f64>() < outcome_prob(config, m, s, l) { 1.0 } else { 0.0 })
        } else {
            None
        };
        cols.source.push(s);
        cols.covariates[0].push(l.l1);
        cols.covariates[1].push(l.l2);
        cols.covariates[2].push(l.l3);
        cols.treatment.push(Some(a as u32));
        cols.exposure.push(m);
        cols.outcome.push(y);
    }
    ObservationTable::from_columns(scenario_spec(config), scenario_mode(config), cols)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OracleValue {
    pub value: f64,
    /// Monte Carlo standard error of `value`.
    pub mc_se: f64,
    /// Number of non-participants averaged over.
    pub draws: usize,
}

/// `E(Y^a | S=0)` by counterfactual simulation: draw `oracle_size` cohort
/// members, keep the non-participants, and average the exact
/// counterfactual outcome mean `sum_m P(M=m | a, L) P(Y=1 | m, L, S=0)`.
pub fn truth_oracle(config: &ScenarioConfig, beta0: f64, a: usize) -> Result<OracleValue> {
    config.validate()?;
    if a >= config.arms.levels() {
        return Err(Error::InvalidInput(format!("treatment level {a} out of range")));
    }
    let chunks = config.oracle_size.div_ceil(ORACLE_CHUNK);
    let parts: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(ORACLE_SEED_OFFSET));
            rng.set_stream(c as u64);
            let size = ORACLE_CHUNK.min(config.oracle_size - c * ORACLE_CHUNK);
            let (mut sum, mut sq, mut k) = (0.0, 0.0, 0usize);
            for _ in 0..size {
                let l = draw_covariates(&mut rng);
                if rng.random::<f64>() < expit(beta0 + selection_slope(config, l)) {
                    continue;
                }
                let pm = exposure_prob(config, a, l);
                let mu = pm * outcome_prob(config, 1, 0, l) + (1.0 - pm) * outcome_prob(config, 0, 0, l);
                sum += mu;
                sq += mu * mu;
                k += 1;
            }
            (sum, sq, k)
        })
        .collect();
    let (sum, sq, k) = parts.iter().fold((0.0, 0.0, 0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    if k < 2 {
        return Err(Error::InvalidInput("oracle draw has no non-participants".into()));
    }
    let kf = k as f64;
    let value = sum / kf;
    let var = ((sq - kf * value * value) / (kf - 1.0)).max(0.0);
    Ok(OracleValue { value, mc_se: (var / kf).sqrt(), draws: k })
}

//! Nuisance regressions: treatment, exposure, source membership and outcome
//! models, served as prediction surfaces, and the two inverse weights built
//! from them.

mod models;
mod spec;

pub use models::{BinaryModel, CategoricalModel, Frames, Level, ModelReport};
pub use spec::{ExposureFit, NuisanceSpec, Parameterization, SequentialModel};

use serde::Serialize;

use crate::data::{ObservabilityMode, ObservationTable};
use crate::error::{Error, Result};
use crate::stats::quantile;

/// Affine map of the outcome onto `[0, 1]`, fixed from the observed range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OutcomeScale {
    pub min: f64,
    pub max: f64,
}

impl OutcomeScale {
    pub fn from_table(table: &ObservationTable) -> Result<Self> {
        let (min, max) = table
            .outcome_range()
            .ok_or_else(|| Error::EmptyStratum("no observed outcomes".into()))?;
        Ok(Self { min, max })
    }

    /// True when every observed outcome is the same value.
    pub fn is_constant(&self) -> bool {
        self.max <= self.min
    }

    pub fn to_unit(&self, y: f64) -> f64 {
        if self.is_constant() {
            0.5
        } else {
            ((y - self.min) / (self.max - self.min)).clamp(0.0, 1.0)
        }
    }

    pub fn from_unit(&self, v: f64) -> f64 {
        self.min + (self.max - self.min) * v
    }

    /// Scale a unit-scale spread (standard error, interval width) back.
    pub fn width(&self) -> f64 {
        self.max - self.min
    }
}

#[derive(Debug, Clone)]
enum TreatmentModel {
    Known(f64),
    Fitted(BinaryModel),
}

#[derive(Debug, Clone)]
enum ExposureModel {
    Joint(CategoricalModel),
    Stratified([CategoricalModel; 2]),
}

/// Sample sizes and convergence flags of a fitted nuisance set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NuisanceProvenance {
    pub treatment_level: u32,
    pub n_target: usize,
    pub n_trial: usize,
    pub n_trial_at_level: usize,
    pub n_outcome_fit: usize,
    pub parameterization: Parameterization,
    pub pooled_outcome: bool,
    pub known_randomization: Option<f64>,
    pub models: Vec<ModelReport>,
}

impl NuisanceProvenance {
    /// True when every fitted model converged without separation.
    pub fn all_converged(&self) -> bool {
        self.models.iter().all(|m| m.converged)
    }
}

/// The fitted nuisance surfaces for one treatment level. Immutable after
/// fitting.
#[derive(Debug, Clone)]
pub struct NuisanceSet {
    spec: NuisanceSpec,
    level: u32,
    treatment: TreatmentModel,
    treatment_given_exposure: Option<BinaryModel>,
    exposure: ExposureModel,
    trial_exposure: Option<CategoricalModel>,
    source: BinaryModel,
    outcome: BinaryModel,
    sequential_exposure: Option<CategoricalModel>,
    scale: OutcomeScale,
    provenance: NuisanceProvenance,
}

/// Fit every nuisance the spec requires for treatment level `level`.
///
/// Treatment models are fitted on trial rows, exposure and source models on
/// all rows, and the outcome model on target rows (all rows with an outcome
/// when pooling). Non-convergence is reported in the provenance.
pub fn fit_nuisances(table: &ObservationTable, spec: &NuisanceSpec, level: u32) -> Result<NuisanceSet> {
    spec.validate()?;
    if spec.pooled_outcome && table.mode() != ObservabilityMode::PooledOutcome {
        return Err(Error::Config(format!(
            "pooled outcome model requires mode `{}`, table has `{}`",
            ObservabilityMode::PooledOutcome.name(),
            table.mode().name()
        )));
    }
    if level as usize >= table.treatment_levels() {
        return Err(Error::InvalidInput(format!(
            "treatment level {level} out of range ({} levels)",
            table.treatment_levels()
        )));
    }
    let frames = Frames::new(table);
    let opts = &spec.glm;
    let source = table.source();
    let treatment = table.treatment();
    let exposure = table.exposure();
    let all: Vec<usize> = (0..table.n()).collect();
    let trial = table.rows_in_source(1);
    let target = table.rows_in_source(0);
    let n_trial_at_level = trial.iter().filter(|&&i| treatment[i] == Some(level)).count();
    if n_trial_at_level == 0 {
        return Err(Error::EmptyStratum(format!("no trial rows with treatment level {level}")));
    }
    let at_level: Vec<f64> =
        trial.iter().map(|&i| if treatment[i] == Some(level) { 1.0 } else { 0.0 }).collect();
    let mut reports = Vec::new();

    let treatment_model = match spec.known_randomization {
        Some(p) => TreatmentModel::Known(p),
        None => {
            let m = BinaryModel::fit("treatment", &spec.treatment, &frames.covariates(&trial), &at_level, opts)?;
            reports.push(m.report().clone());
            TreatmentModel::Fitted(m)
        }
    };

    let treatment_given_exposure = if spec.parameterization == Parameterization::SourceSpecific {
        let frame = frames.with_exposure(frames.covariates(&trial), &trial, Level::Observed);
        let m = BinaryModel::fit("treatment-given-exposure", &spec.treatment_given_exposure, &frame, &at_level, opts)?;
        reports.push(m.report().clone());
        Some(m)
    } else {
        None
    };

    let k = table.exposure_levels();
    let exposure_model = match spec.exposure_fit {
        ExposureFit::Joint => {
            let frame = frames.with_source(frames.covariates(&all), &all, None);
            let m = CategoricalModel::fit("exposure", &spec.exposure, &frame, exposure, k, opts)?;
            reports.extend(m.reports().iter().cloned());
            ExposureModel::Joint(m)
        }
        ExposureFit::Stratified => {
            let fit = |rows: &[usize], name: &str| {
                let y: Vec<u32> = rows.iter().map(|&i| exposure[i]).collect();
                CategoricalModel::fit(name, &spec.exposure, &frames.covariates(rows), &y, k, opts)
            };
            let m0 = fit(&target, "exposure-target")?;
            let m1 = fit(&trial, "exposure-trial")?;
            reports.extend(m0.reports().iter().chain(m1.reports()).cloned());
            ExposureModel::Stratified([m0, m1])
        }
    };

    let trial_exposure_frame = || frames.with_treatment(frames.covariates(&trial), &trial, Level::Observed);
    let trial_codes: Vec<u32> = trial.iter().map(|&i| exposure[i]).collect();
    let trial_exposure = if spec.parameterization == Parameterization::ExposureDensity {
        let m = CategoricalModel::fit("trial-exposure", &spec.trial_exposure, &trial_exposure_frame()?, &trial_codes, k, opts)?;
        reports.extend(m.reports().iter().cloned());
        Some(m)
    } else {
        None
    };
    let sequential_exposure = match &spec.sequential {
        SequentialModel::ExposureIntegral(t) => {
            let m = CategoricalModel::fit("sequential-exposure", t, &trial_exposure_frame()?, &trial_codes, k, opts)?;
            reports.extend(m.reports().iter().cloned());
            Some(m)
        }
        SequentialModel::Regression(_) => None,
    };

    let s: Vec<f64> = source.iter().map(|&v| f64::from(v)).collect();
    let source_model = BinaryModel::fit("source", &spec.source, &frames.covariates(&all), &s, opts)?;
    reports.push(source_model.report().clone());

    let scale = OutcomeScale::from_table(table)?;
    let outcome_rows: Vec<usize> = if spec.pooled_outcome {
        all.iter().copied().filter(|&i| table.outcome()[i].is_some()).collect()
    } else {
        target.iter().copied().filter(|&i| table.outcome()[i].is_some()).collect()
    };
    if outcome_rows.is_empty() {
        return Err(Error::EmptyStratum("no rows with an observed outcome for the outcome model".into()));
    }
    let y: Vec<f64> = outcome_rows.iter().map(|&i| scale.to_unit(table.outcome()[i].unwrap_or(f64::NAN))).collect();
    let frame = frames.with_exposure(frames.covariates(&outcome_rows), &outcome_rows, Level::Observed);
    let outcome = BinaryModel::fit("outcome", &spec.outcome, &frame, &y, opts)?;
    reports.push(outcome.report().clone());

    let (n_target, n_trial) = table.source_counts();
    let provenance = NuisanceProvenance {
        treatment_level: level,
        n_target,
        n_trial,
        n_trial_at_level,
        n_outcome_fit: outcome_rows.len(),
        parameterization: spec.parameterization,
        pooled_outcome: spec.pooled_outcome,
        known_randomization: spec.known_randomization,
        models: reports,
    };
    Ok(NuisanceSet {
        spec: spec.clone(),
        level,
        treatment: treatment_model,
        treatment_given_exposure,
        exposure: exposure_model,
        trial_exposure,
        source: source_model,
        outcome,
        sequential_exposure,
        scale,
        provenance,
    })
}

/// Nuisance predictions on a set of table rows, all evaluated at the
/// fitted treatment level and each row's observed exposure.
#[derive(Debug, Clone, PartialEq)]
pub struct NuisancePredictions {
    pub rows: Vec<usize>,
    pub parameterization: Parameterization,
    pub pooled: bool,
    /// `e_a(L)`.
    pub treatment: Vec<f64>,
    /// `f_a(M, L)`; empty under `exposure-density`.
    pub treatment_given_exposure: Vec<f64>,
    /// `g_M(0, L)` and `g_M(1, L)` at the observed exposure.
    pub exposure_target: Vec<f64>,
    pub exposure_trial: Vec<f64>,
    /// `p(M | S=1, A=a, L)`; empty under `source-specific`.
    pub trial_exposure: Vec<f64>,
    /// `h_1(L) = P(S=1 | L)`.
    pub source: Vec<f64>,
    /// `T1(L, M)` on the unit outcome scale.
    pub outcome: Vec<f64>,
}

impl NuisancePredictions {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Ratio `p(M | S=1, A=a, L)` under the configured parameterization.
    pub fn exposure_ratio_numerator(&self, k: usize) -> f64 {
        match self.parameterization {
            Parameterization::SourceSpecific => {
                self.treatment_given_exposure[k] * self.exposure_trial[k] / self.treatment[k]
            }
            Parameterization::ExposureDensity => self.trial_exposure[k],
        }
    }

    /// First weight for prediction `k`.
    pub fn w1(&self, k: usize) -> f64 {
        if self.pooled {
            return w1_pooled(self.exposure_ratio_numerator(k), self.exposure_target[k], self.exposure_trial[k], self.source[k]);
        }
        match self.parameterization {
            Parameterization::SourceSpecific => w1_source_specific(
                self.treatment_given_exposure[k],
                self.exposure_trial[k],
                self.treatment[k],
                self.exposure_target[k],
            ),
            Parameterization::ExposureDensity => w1_exposure_density(self.trial_exposure[k], self.exposure_target[k]),
        }
    }

    /// Second weight for prediction `k`.
    pub fn w2(&self, k: usize) -> f64 {
        w2(self.source[k], self.treatment[k])
    }

    pub fn w1_all(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.w1(k)).collect()
    }

    pub fn w2_all(&self) -> Vec<f64> {
        (0..self.len()).map(|k| self.w2(k)).collect()
    }
}

/// `f_a g_M(1) / (e_a g_M(0))`.
pub fn w1_source_specific(treatment_given_exposure: f64, exposure_trial: f64, treatment: f64, exposure_target: f64) -> f64 {
    treatment_given_exposure * exposure_trial / (treatment * exposure_target)
}

/// `p(M | S=1, A=a, L) / p(M | S=0, L)`.
pub fn w1_exposure_density(trial_exposure: f64, exposure_target: f64) -> f64 {
    trial_exposure / exposure_target
}

/// `h_0 p(M | S=1, A=a, L) / sum_s g_M(s) h_s`, the pooled-outcome weight.
pub fn w1_pooled(trial_exposure: f64, exposure_target: f64, exposure_trial: f64, trial_prob: f64) -> f64 {
    let h0 = 1.0 - trial_prob;
    h0 * trial_exposure / (exposure_target * h0 + exposure_trial * trial_prob)
}

/// `h_0 / (e_a h_1)`.
pub fn w2(trial_prob: f64, treatment: f64) -> f64 {
    (1.0 - trial_prob) / (treatment * trial_prob)
}

/// Clip weights to their `[1 - level, level]` empirical quantiles.
pub fn truncate_weights(w: &mut [f64], level: f64) {
    if w.is_empty() {
        return;
    }
    let lo = quantile(w, 1.0 - level);
    let hi = quantile(w, level);
    for v in w.iter_mut() {
        *v = v.clamp(lo, hi);
    }
}

impl NuisanceSet {
    pub fn spec(&self) -> &NuisanceSpec {
        &self.spec
    }

    pub fn treatment_level(&self) -> u32 {
        self.level
    }

    pub fn scale(&self) -> OutcomeScale {
        self.scale
    }

    pub fn provenance(&self) -> &NuisanceProvenance {
        &self.provenance
    }

    pub fn clamp_eps(&self) -> f64 {
        self.spec.glm.clamp_eps
    }

    /// `e_a(L)` on `rows`.
    pub fn treatment_prob(&self, table: &ObservationTable, rows: &[usize]) -> Result<Vec<f64>> {
        match &self.treatment {
            TreatmentModel::Known(p) => Ok(vec![*p; rows.len()]),
            TreatmentModel::Fitted(m) => m.predict(&Frames::new(table).covariates(rows)),
        }
    }

    /// `f_a(M, L)` on `rows` at the given exposure.
    pub fn treatment_given_exposure_prob(
        &self,
        table: &ObservationTable,
        rows: &[usize],
        exposure: Level,
    ) -> Result<Vec<f64>> {
        let m = self
            .treatment_given_exposure
            .as_ref()
            .ok_or_else(|| Error::Config("treatment-given-exposure model is fitted only under the source-specific parameterization".into()))?;
        let f = Frames::new(table);
        m.predict(&f.with_exposure(f.covariates(rows), rows, exposure))
    }

    /// Full `p(M | S=s, L)` distribution on `rows`.
    pub fn exposure_dist(&self, table: &ObservationTable, rows: &[usize], source: u8) -> Result<Vec<Vec<f64>>> {
        let f = Frames::new(table);
        match &self.exposure {
            ExposureModel::Joint(m) => m.predict(&f.with_source(f.covariates(rows), rows, Some(source))),
            ExposureModel::Stratified(ms) => ms[source as usize].predict(&f.covariates(rows)),
        }
    }

    /// Full `p(M | S=1, A=a, L)` distribution on `rows`.
    pub fn trial_exposure_dist(&self, table: &ObservationTable, rows: &[usize]) -> Result<Vec<Vec<f64>>> {
        let m = self
            .trial_exposure
            .as_ref()
            .ok_or_else(|| Error::Config("trial exposure model is fitted only under the exposure-density parameterization".into()))?;
        let f = Frames::new(table);
        m.predict(&f.with_treatment(f.covariates(rows), rows, Level::Fixed(self.level))?)
    }

    /// `p(M | S=1, A, L)` from the sequential exposure model, when fitted.
    pub fn sequential_exposure_dist(
        &self,
        table: &ObservationTable,
        rows: &[usize],
        treatment: Level,
    ) -> Result<Option<Vec<Vec<f64>>>> {
        let Some(m) = &self.sequential_exposure else { return Ok(None) };
        let f = Frames::new(table);
        Ok(Some(m.predict(&f.with_treatment(f.covariates(rows), rows, treatment)?)?))
    }

    /// `h_1(L) = P(S=1 | L)` on `rows`.
    pub fn trial_prob(&self, table: &ObservationTable, rows: &[usize]) -> Result<Vec<f64>> {
        self.source.predict(&Frames::new(table).covariates(rows))
    }

    /// `T1(L, M)` on the unit scale, clamped.
    pub fn outcome_mean(&self, table: &ObservationTable, rows: &[usize], exposure: Level) -> Result<Vec<f64>> {
        let f = Frames::new(table);
        self.outcome.predict(&f.with_exposure(f.covariates(rows), rows, exposure))
    }

    /// All weight ingredients on `rows`.
    pub fn predict(&self, table: &ObservationTable, rows: &[usize]) -> Result<NuisancePredictions> {
        let codes: Vec<u32> = rows.iter().map(|&i| table.exposure()[i]).collect();
        let pick = |d: Vec<Vec<f64>>| -> Vec<f64> { d.iter().zip(&codes).map(|(p, &c)| p[c as usize]).collect() };
        let treatment_given_exposure = match self.spec.parameterization {
            Parameterization::SourceSpecific => self.treatment_given_exposure_prob(table, rows, Level::Observed)?,
            Parameterization::ExposureDensity => Vec::new(),
        };
        let trial_exposure = match self.spec.parameterization {
            Parameterization::ExposureDensity => pick(self.trial_exposure_dist(table, rows)?),
            Parameterization::SourceSpecific => Vec::new(),
        };
        Ok(NuisancePredictions {
            rows: rows.to_vec(),
            parameterization: self.spec.parameterization,
            pooled: self.spec.pooled_outcome,
            treatment: self.treatment_prob(table, rows)?,
            treatment_given_exposure,
            exposure_target: pick(self.exposure_dist(table, rows, 0)?),
            exposure_trial: pick(self.exposure_dist(table, rows, 1)?),
            trial_exposure,
            source: self.trial_prob(table, rows)?,
            outcome: self.outcome_mean(table, rows, Level::Observed)?,
        })
    }
}

/// First weight for one table row under the set's parameterization.
pub fn weight_w1(ns: &NuisanceSet, table: &ObservationTable, row: usize) -> Result<f64> {
    check_row(table, row)?;
    Ok(ns.predict(table, &[row])?.w1(0))
}

/// Second weight `h_0 / (e_a h_1)` for one table row.
pub fn weight_w2(ns: &NuisanceSet, table: &ObservationTable, row: usize) -> Result<f64> {
    check_row(table, row)?;
    let e = ns.treatment_prob(table, &[row])?[0];
    let h = ns.trial_prob(table, &[row])?[0];
    Ok(w2(h, e))
}

fn check_row(table: &ObservationTable, row: usize) -> Result<()> {
    if row >= table.n() {
        return Err(Error::InvalidInput(format!("row {row} out of range ({} rows)", table.n())));
    }
    Ok(())
}

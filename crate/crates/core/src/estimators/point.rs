//! Point estimators on a fitted nuisance set.

use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::eif::{eif_terms, EifComponents, EifForm, EifRow};
use crate::error::{Error, Result};
use crate::glm::{fit_logistic, DesignBasis, DesignMatrix, GlmFit, GlmOptions};
use crate::nuisance::{truncate_weights, Frames, Level, NuisanceSet, SequentialModel};
use crate::stats::{clamp_prob, expit, logit};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Iterated conditional expectation (plug-in g-formula).
    Ice,
    /// Inverse probability weighting of target outcomes.
    Ipw,
    /// Targeted maximum likelihood.
    Tmle,
    /// Targeted maximum likelihood with the outcome model pooled over sources.
    TmlePooled,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [Self::Ice, Self::Ipw, Self::Tmle, Self::TmlePooled];

    pub fn name(self) -> &'static str {
        match self {
            Self::Ice => "ice",
            Self::Ipw => "ipw",
            Self::Tmle => "tmle",
            Self::TmlePooled => "tmle-pooled",
        }
    }

    pub fn is_pooled(self) -> bool {
        self == Self::TmlePooled
    }
}

impl std::fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}` (expected ice, ipw, tmle or tmle-pooled)")))
    }
}

/// Convergence controls for the two fluctuation fits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetingOptions {
    /// Score tolerance, relative to the total fluctuation weight.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for TargetingOptions {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 100 }
    }
}

/// A point estimate with its influence-function standard error.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PointEstimate {
    pub kind: EstimatorKind,
    /// Estimate on the outcome's original scale.
    pub psi: f64,
    /// Influence-function plug-in standard error, original scale.
    pub std_err: f64,
    /// Mean influence function at the estimate, unit outcome scale.
    pub eif_residual: f64,
    /// Fluctuation parameters of the outcome and sequential steps (TMLE only).
    pub fluctuation: Vec<f64>,
    pub targeting_converged: bool,
    pub degenerate_outcome: bool,
}

/// Compute one estimator from fitted nuisances.
pub fn point_estimate(
    table: &ObservationTable,
    ns: &NuisanceSet,
    kind: EstimatorKind,
    opts: &TargetingOptions,
) -> Result<PointEstimate> {
    if kind.is_pooled() != ns.spec().pooled_outcome {
        return Err(Error::Config(format!(
            "estimator `{kind}` needs nuisances fitted with pooled_outcome = {}",
            kind.is_pooled()
        )));
    }
    let scale = ns.scale();
    if scale.is_constant() && kind != EstimatorKind::Ipw {
        return Ok(PointEstimate {
            kind,
            psi: scale.min,
            std_err: 0.0,
            eif_residual: 0.0,
            fluctuation: Vec::new(),
            targeting_converged: true,
            degenerate_outcome: true,
        });
    }
    let work = Workspace::new(table, ns)?;
    let unit_psi = |psi: f64| if scale.is_constant() { 0.5 } else { (psi - scale.min) / scale.width() };

    let (psi_unit, psi, t1, t2, fluctuation, converged) = match kind {
        EstimatorKind::Ice | EstimatorKind::Ipw => {
            let t2 = sequential(table, ns, &work.t1_hat, 0.0)?;
            let ice = work.target_mean(&t2);
            if kind == EstimatorKind::Ice {
                (ice, scale.from_unit(ice), work.t1_hat.clone(), t2, Vec::new(), true)
            } else {
                let total: f64 = work
                    .w1_rows
                    .iter()
                    .map(|&i| work.w1[i] * table.outcome()[i].unwrap_or(0.0))
                    .sum();
                let psi = total / work.n0 as f64;
                (unit_psi(psi), psi, work.t1_hat.clone(), t2, Vec::new(), true)
            }
        }
        EstimatorKind::Tmle | EstimatorKind::TmlePooled => {
            let rows = &work.w1_rows;
            let f1 = fluctuate(
                &rows.iter().map(|&i| logit(work.t1_hat[i])).collect::<Vec<_>>(),
                &rows.iter().map(|&i| work.y_unit[i].unwrap_or(0.0)).collect::<Vec<_>>(),
                &rows.iter().map(|&i| work.w1[i]).collect::<Vec<_>>(),
                ns.spec().glm,
                opts,
            )?;
            let eps1 = f1.coefficients[0];
            let t1_tilde: Vec<f64> = work.t1_hat.iter().map(|&p| expit(logit(p) + eps1)).collect();
            let t2_hat = sequential(table, ns, &t1_tilde, eps1)?;
            let rows = &work.w2_rows;
            let f2 = fluctuate(
                &rows.iter().map(|&i| logit(t2_hat[i])).collect::<Vec<_>>(),
                &rows.iter().map(|&i| t1_tilde[i]).collect::<Vec<_>>(),
                &rows.iter().map(|&i| work.w2[i]).collect::<Vec<_>>(),
                ns.spec().glm,
                opts,
            )?;
            let eps2 = f2.coefficients[0];
            let t2_tilde: Vec<f64> = t2_hat.iter().map(|&p| expit(logit(p) + eps2)).collect();
            let psi_unit = work.target_mean(&t2_tilde);
            let converged = f1.converged && f2.converged;
            (psi_unit, scale.from_unit(psi_unit), t1_tilde, t2_tilde, vec![eps1, eps2], converged)
        }
    };

    let eif = work.eif(table, &t1, &t2, psi_unit);
    Ok(PointEstimate {
        kind,
        psi,
        std_err: scale.width() * eif.std_err(),
        eif_residual: eif.residual(),
        fluctuation,
        targeting_converged: converged,
        degenerate_outcome: scale.is_constant(),
    })
}

/// Per-row quantities shared by all estimators.
struct Workspace {
    form: EifForm,
    level: u32,
    n0: usize,
    gamma: f64,
    y_unit: Vec<Option<f64>>,
    w1: Vec<f64>,
    w2: Vec<f64>,
    t1_hat: Vec<f64>,
    target_rows: Vec<usize>,
    w1_rows: Vec<usize>,
    w2_rows: Vec<usize>,
}

impl Workspace {
    fn new(table: &ObservationTable, ns: &NuisanceSet) -> Result<Self> {
        let all: Vec<usize> = (0..table.n()).collect();
        let pred = ns.predict(table, &all)?;
        let pooled = ns.spec().pooled_outcome;
        let level = ns.treatment_level();
        let source = table.source();
        let scale = ns.scale();
        let y_unit: Vec<Option<f64>> = table.outcome().iter().map(|y| y.map(|v| scale.to_unit(v))).collect();
        let target_rows = table.rows_in_source(0);
        let w1_rows: Vec<usize> =
            all.iter().copied().filter(|&i| (pooled || source[i] == 0) && y_unit[i].is_some()).collect();
        let w2_rows: Vec<usize> =
            all.iter().copied().filter(|&i| source[i] == 1 && table.treatment()[i] == Some(level)).collect();
        if w1_rows.is_empty() {
            return Err(Error::EmptyStratum("no rows with an observed outcome to weight".into()));
        }
        if w2_rows.is_empty() {
            return Err(Error::EmptyStratum(format!("no trial rows with treatment level {level}")));
        }
        let mut w1 = pred.w1_all();
        let mut w2 = pred.w2_all();
        if let Some(q) = ns.spec().weight_truncation {
            truncate_subset(&mut w1, &w1_rows, q);
            truncate_subset(&mut w2, &w2_rows, q);
        }
        let n0 = target_rows.len();
        Ok(Self {
            form: EifForm::of(ns),
            level,
            n0,
            gamma: table.n() as f64 / n0 as f64,
            y_unit,
            w1,
            w2,
            t1_hat: pred.outcome,
            target_rows,
            w1_rows,
            w2_rows,
        })
    }

    fn target_mean(&self, v: &[f64]) -> f64 {
        self.target_rows.iter().map(|&i| v[i]).sum::<f64>() / self.n0 as f64
    }

    fn eif(&self, table: &ObservationTable, t1: &[f64], t2: &[f64], psi: f64) -> EifComponents {
        let rows: Vec<EifRow> = (0..table.n())
            .map(|i| EifRow {
                source: table.source()[i],
                at_level: table.source()[i] == 1 && table.treatment()[i] == Some(self.level),
                outcome: self.y_unit[i],
                w1: self.w1[i],
                w2: self.w2[i],
                t1: t1[i],
                t2: t2[i],
            })
            .collect();
        eif_terms(&rows, self.form, self.gamma, psi)
    }
}

fn truncate_subset(w: &mut [f64], rows: &[usize], level: f64) {
    let mut sub: Vec<f64> = rows.iter().map(|&i| w[i]).collect();
    truncate_weights(&mut sub, level);
    for (&i, v) in rows.iter().zip(sub) {
        w[i] = v;
    }
}

/// Intercept-only weighted logistic fit with an offset.
fn fluctuate(offset: &[f64], y: &[f64], w: &[f64], glm: GlmOptions, opts: &TargetingOptions) -> Result<GlmFit> {
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return Err(Error::EmptyStratum("fluctuation weights sum to zero".into()));
    }
    let w: Vec<f64> = w.iter().map(|v| v / total).collect();
    let o = GlmOptions { max_iter: opts.max_iter, score_tol: opts.tol, ..glm };
    fit_logistic(&DesignMatrix::intercept(y.len()), y, &w, Some(offset), &o)
}

/// The sequential regression `T2(L, a)` on every row, given outcome
/// regression values at each row's observed exposure. `shift` is the
/// logit-scale fluctuation already applied to those values; it is applied
/// again when the regression integrates over exposure levels.
fn sequential(table: &ObservationTable, ns: &NuisanceSet, t1: &[f64], shift: f64) -> Result<Vec<f64>> {
    let eps = ns.clamp_eps();
    let all: Vec<usize> = (0..table.n()).collect();
    let level = Level::Fixed(ns.treatment_level());
    match &ns.spec().sequential {
        SequentialModel::Regression(spec) => {
            let frames = Frames::new(table);
            let trial = table.rows_in_source(1);
            let frame = frames.with_treatment(frames.covariates(&trial), &trial, Level::Observed)?;
            let basis = DesignBasis::fit(spec, &frame)?;
            let x = basis.build(&frame)?;
            let y: Vec<f64> = trial.iter().map(|&i| t1[i]).collect();
            let fit = fit_logistic(&x, &y, &vec![1.0; y.len()], None, &ns.spec().glm)?;
            let grid = basis.build(&frames.with_treatment(frames.covariates(&all), &all, level)?)?;
            crate::glm::predict(&fit, &grid, None, eps)
        }
        SequentialModel::ExposureIntegral(_) => {
            let dist = ns
                .sequential_exposure_dist(table, &all, level)?
                .ok_or_else(|| Error::Config("sequential exposure model was not fitted".into()))?;
            let mut out = vec![0.0; table.n()];
            for m in 0..table.exposure_levels() {
                let t1m = ns.outcome_mean(table, &all, Level::Fixed(m as u32))?;
                for (i, o) in out.iter_mut().enumerate() {
                    *o += dist[i][m] * expit(logit(t1m[i]) + shift);
                }
            }
            Ok(out.into_iter().map(|v| clamp_prob(v, eps)).collect())
        }
    }
}

//! Positivity diagnostics for a fitted nuisance set.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::data::{Kind, ObservationTable};
use crate::error::Result;
use crate::nuisance::NuisanceSet;
use crate::stats::quantile;

/// Upper quantiles of a weight vector.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeightSummary {
    pub n: usize,
    pub median: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl WeightSummary {
    fn new(w: &[f64]) -> Self {
        if w.is_empty() {
            return Self { n: 0, median: f64::NAN, p90: f64::NAN, p99: f64::NAN, max: f64::NAN };
        }
        Self {
            n: w.len(),
            median: quantile(w, 0.5),
            p90: quantile(w, 0.9),
            p99: quantile(w, 0.99),
            max: w.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        }
    }
}

/// A covariate pattern (or a single row, with continuous covariates) where
/// some positivity check failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlaggedStratum {
    pub pattern: String,
    pub rows: usize,
    pub reasons: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PositivityReport {
    pub eps: f64,
    /// Range of `e_a(L)` over target rows.
    pub treatment_min: f64,
    pub treatment_max: f64,
    /// Smallest `g_M(0, L)` over target rows and exposure levels with
    /// `g_M(1, L) > eps`.
    pub exposure_target_min: f64,
    /// Smallest `P(S=1 | L)` over target rows.
    pub trial_prob_min: f64,
    /// Number of (row, check) pairs below `eps`.
    pub violations: usize,
    /// Rows where a weight factor sits at the probability clamp.
    pub clamped: usize,
    pub flagged: Vec<FlaggedStratum>,
    /// Distinct flagged patterns beyond those listed.
    pub flagged_truncated: usize,
    pub w1: WeightSummary,
    pub w2: WeightSummary,
}

impl PositivityReport {
    pub fn ok(&self) -> bool {
        self.violations == 0
    }
}

const MAX_FLAGGED: usize = 50;

/// Summarize positivity of the fitted nuisances on `table`. Never fails on
/// violations; they are counted and flagged.
pub fn positivity_report(table: &ObservationTable, ns: &NuisanceSet, eps: f64) -> Result<PositivityReport> {
    let target = table.rows_in_source(0);
    let floor = ns.clamp_eps() * (1.0 + 1e-9);
    let e = ns.treatment_prob(table, &target)?;
    let g0 = ns.exposure_dist(table, &target, 0)?;
    let g1 = ns.exposure_dist(table, &target, 1)?;
    let h1 = ns.trial_prob(table, &target)?;

    let mut violations = 0;
    let mut clamped = 0;
    let mut exposure_target_min = f64::INFINITY;
    let mut flags: BTreeMap<String, (usize, Vec<String>)> = BTreeMap::new();
    let labels = Labeler::new(table);
    for (k, &i) in target.iter().enumerate() {
        let mut reasons = Vec::new();
        if e[k] < eps {
            reasons.push(format!("treatment probability {:.3e} < {eps}", e[k]));
        }
        for (m, (&p0, &p1)) in g0[k].iter().zip(&g1[k]).enumerate() {
            if p1 > eps {
                exposure_target_min = exposure_target_min.min(p0);
                if p0 < eps {
                    reasons.push(format!("target exposure probability {p0:.3e} < {eps} at level {m}"));
                }
            }
        }
        if h1[k] < eps {
            reasons.push(format!("trial membership probability {:.3e} < {eps}", h1[k]));
        }
        if e[k] <= floor || h1[k] <= floor || g0[k].iter().any(|&p| p <= floor) {
            clamped += 1;
        }
        if !reasons.is_empty() {
            violations += reasons.len();
            let entry = flags.entry(labels.pattern(i)).or_insert_with(|| (0, Vec::new()));
            entry.0 += 1;
            for r in reasons {
                let kind = r.split(" probability").next().unwrap_or(&r).to_string();
                if !entry.1.iter().any(|x: &String| x.starts_with(&kind)) {
                    entry.1.push(r);
                }
            }
        }
    }
    let flagged_truncated = flags.len().saturating_sub(MAX_FLAGGED);
    let flagged = flags
        .into_iter()
        .take(MAX_FLAGGED)
        .map(|(pattern, (rows, reasons))| FlaggedStratum { pattern, rows, reasons })
        .collect();

    let w1_rows: Vec<usize> = if ns.spec().pooled_outcome {
        (0..table.n()).filter(|&i| table.outcome()[i].is_some()).collect()
    } else {
        target.clone()
    };
    let w1: Vec<f64> = ns.predict(table, &w1_rows)?.w1_all();
    let level = ns.treatment_level();
    let w2_rows: Vec<usize> =
        table.rows_in_source(1).into_iter().filter(|&i| table.treatment()[i] == Some(level)).collect();
    let e2 = ns.treatment_prob(table, &w2_rows)?;
    let h2 = ns.trial_prob(table, &w2_rows)?;
    clamped += e2.iter().zip(&h2).filter(|(&e, &h)| e <= floor || h <= floor).count();
    let w2: Vec<f64> = e2.iter().zip(&h2).map(|(&e, &h)| crate::nuisance::w2(h, e)).collect();

    let range = |v: &[f64]| {
        v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
    };
    let (treatment_min, treatment_max) = range(&e);
    Ok(PositivityReport {
        eps,
        treatment_min,
        treatment_max,
        exposure_target_min,
        trial_prob_min: range(&h1).0,
        violations,
        clamped,
        flagged,
        flagged_truncated,
        w1: WeightSummary::new(&w1),
        w2: WeightSummary::new(&w2),
    })
}

struct Labeler<'a> {
    table: &'a ObservationTable,
    discrete: bool,
}

impl<'a> Labeler<'a> {
    fn new(table: &'a ObservationTable) -> Self {
        let discrete = table.covariates().iter().all(|c| c.kind.is_discrete());
        Self { table, discrete }
    }

    fn pattern(&self, row: usize) -> String {
        if !self.discrete {
            return format!("row {row}");
        }
        let parts: Vec<String> = self
            .table
            .covariates()
            .iter()
            .map(|c| match &c.kind {
                Kind::Continuous => unreachable!(),
                k => format!("{}={}", c.name, k.label(c.values[row] as u32)),
            })
            .collect();
        if parts.is_empty() {
            "(all)".into()
        } else {
            parts.join(",")
        }
    }
}

//! Efficient influence function: per-observation terms on samples, and exact
//! functionals (g-formula, efficiency bound) on finite laws.

mod law;
mod truth;

pub use law::{Cell, DiscreteLaw};
pub use truth::{
    efficiency_bound, efficiency_bound_parts, gformula_exact, gformula_pooled_exact, BoundParts, LawNuisances,
};

use serde::{Deserialize, Serialize};

use crate::data::ObservationTable;
use crate::error::{Error, Result};
use crate::nuisance::{NuisanceSet, Parameterization};

/// Which representation of the first term is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EifForm {
    /// Source-specific weights `f_a g_M(1) / (e_a g_M(0))`.
    SourceSpecific,
    /// Exposure density ratio `p(M | S=1, A=a, L) / p(M | S=0, L)`.
    ExposureDensity,
    /// Pooled outcome regression; the first term uses every row with an
    /// outcome.
    Pooled,
}

impl EifForm {
    pub fn of(ns: &NuisanceSet) -> Self {
        if ns.spec().pooled_outcome {
            Self::Pooled
        } else {
            match ns.spec().parameterization {
                Parameterization::SourceSpecific => Self::SourceSpecific,
                Parameterization::ExposureDensity => Self::ExposureDensity,
            }
        }
    }
}

/// Inputs to the influence function at one observation, on the unit
/// outcome scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EifRow {
    pub source: u8,
    /// `S = 1` and `A = a`.
    pub at_level: bool,
    pub outcome: Option<f64>,
    pub w1: f64,
    pub w2: f64,
    /// Outcome regression at the observed exposure.
    pub t1: f64,
    /// Sequential regression at the target treatment level.
    pub t2: f64,
}

/// Per-observation influence function terms.
#[derive(Debug, Clone, PartialEq)]
pub struct EifComponents {
    pub form: EifForm,
    pub term1: Vec<f64>,
    pub term2: Vec<f64>,
    pub term3: Vec<f64>,
    pub total: Vec<f64>,
}

impl EifComponents {
    pub fn len(&self) -> usize {
        self.total.len()
    }

    pub fn is_empty(&self) -> bool {
        self.total.is_empty()
    }

    /// Mean of the totals: the estimating-equation residual.
    pub fn residual(&self) -> f64 {
        crate::stats::mean(&self.total)
    }

    /// Plug-in standard error `sqrt(mean(total^2) / n)`.
    pub fn std_err(&self) -> f64 {
        let n = self.total.len() as f64;
        (self.total.iter().map(|v| v * v).sum::<f64>() / n / n).sqrt()
    }
}

/// Evaluate the three terms for every row. `gamma` is `1 / P(S=0)`, usually
/// `n / n_0`; `psi` centres the third term.
pub fn eif_terms(rows: &[EifRow], form: EifForm, gamma: f64, psi: f64) -> EifComponents {
    let n = rows.len();
    let mut c = EifComponents {
        form,
        term1: Vec::with_capacity(n),
        term2: Vec::with_capacity(n),
        term3: Vec::with_capacity(n),
        total: Vec::with_capacity(n),
    };
    for r in rows {
        let first = form == EifForm::Pooled || r.source == 0;
        let t1 = match (first, r.outcome) {
            (true, Some(y)) => gamma * r.w1 * (y - r.t1),
            _ => 0.0,
        };
        let t2 = if r.source == 1 && r.at_level { gamma * r.w2 * (r.t1 - r.t2) } else { 0.0 };
        let t3 = if r.source == 0 { gamma * (r.t2 - psi) } else { 0.0 };
        c.term1.push(t1);
        c.term2.push(t2);
        c.term3.push(t3);
        c.total.push(t1 + t2 + t3);
    }
    c
}

/// Influence function at every table row using the set's weights and
/// outcome regression, the supplied sequential regression values
/// `t2[i] = T2(L_i, a)` and `psi_hat`, all on the unit outcome scale.
pub fn eif_eval(
    table: &ObservationTable,
    ns: &NuisanceSet,
    a: u32,
    psi_hat: f64,
    t2: &[f64],
) -> Result<EifComponents> {
    if a != ns.treatment_level() {
        return Err(Error::Config(format!(
            "nuisances were fitted for treatment level {}, not {a}",
            ns.treatment_level()
        )));
    }
    if t2.len() != table.n() {
        return Err(Error::Dimension(format!("{} sequential values for {} rows", t2.len(), table.n())));
    }
    let rows: Vec<usize> = (0..table.n()).collect();
    let pred = ns.predict(table, &rows)?;
    let scale = ns.scale();
    let eif_rows: Vec<EifRow> = rows
        .iter()
        .map(|&i| EifRow {
            source: table.source()[i],
            at_level: table.source()[i] == 1 && table.treatment()[i] == Some(a),
            outcome: table.outcome()[i].map(|y| scale.to_unit(y)),
            w1: pred.w1(i),
            w2: pred.w2(i),
            t1: pred.outcome[i],
            t2: t2[i],
        })
        .collect();
    let (n0, _) = table.source_counts();
    Ok(eif_terms(&eif_rows, EifForm::of(ns), table.n() as f64 / n0 as f64, psi_hat))
}

//! Exact functionals of a [`DiscreteLaw`]: conditional nuisances, the
//! g-formula, the influence function and its variance.

use super::law::{Cell, DiscreteLaw};
use super::EifForm;
use crate::error::{Error, Result};

/// Nuisance functions tabulated over covariate patterns `l` and exposure
/// levels `m`. Conditionals on zero-mass strata are `NaN`.
#[derive(Debug, Clone, PartialEq)]
pub struct LawNuisances {
    pub treatment_level: usize,
    /// `P(S=0)`; fixed by the law, never perturbed.
    pub target_prob: f64,
    /// `e_a[l]`.
    pub treatment: Vec<f64>,
    /// `f_a[l][m]`.
    pub treatment_given_exposure: Vec<Vec<f64>>,
    /// `g_M[s][l][m]`.
    pub exposure: [Vec<Vec<f64>>; 2],
    /// `p(m | S=1, A=a, l)`.
    pub trial_exposure: Vec<Vec<f64>>,
    /// `P(S=1 | l)`.
    pub trial_prob: Vec<f64>,
    /// `T1[l][m]`.
    pub outcome: Vec<Vec<f64>>,
    /// `T2[l]` at the treatment level.
    pub sequential: Vec<f64>,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else {
        f64::NAN
    }
}

fn describe(law: &DiscreteLaw, l: usize) -> String {
    let codes = law.pattern_codes(l);
    if codes.is_empty() {
        "L=()".into()
    } else {
        let parts: Vec<String> = codes.iter().enumerate().map(|(j, c)| format!("L{}={c}", j + 1)).collect();
        parts.join(",")
    }
}

impl LawNuisances {
    /// True nuisances of `law` at treatment level `a`. With `pooled`, the
    /// outcome regression is `E(Y | l, m)` over both sources.
    pub fn truth(law: &DiscreteLaw, a: usize, pooled: bool) -> Result<Self> {
        if a >= law.treatment_levels() {
            return Err(Error::InvalidInput(format!("treatment level {a} out of range")));
        }
        let (nl, nm) = (law.patterns(), law.exposure_levels());
        let ys = law.outcome_values();
        let mut q_slam = vec![0.0; 2 * nl * law.treatment_levels() * nm];
        let mut qy_slm = vec![0.0; 2 * nl * nm];
        let idx = |s: usize, l: usize, a: usize, m: usize| ((s * nl + l) * law.treatment_levels() + a) * nm + m;
        for (c, p) in law.support() {
            q_slam[idx(c.s, c.l, c.a, c.m)] += p;
            qy_slm[(c.s * nl + c.l) * nm + c.m] += p * ys[c.y];
        }
        let q_sla = |s: usize, l: usize, a: usize| (0..nm).map(|m| q_slam[idx(s, l, a, m)]).sum::<f64>();
        let q_slm = |s: usize, l: usize, m: usize| (0..law.treatment_levels()).map(|a| q_slam[idx(s, l, a, m)]).sum::<f64>();
        let q_sl = |s: usize, l: usize| (0..nm).map(|m| q_slm(s, l, m)).sum::<f64>();

        let treatment: Vec<f64> = (0..nl).map(|l| ratio(q_sla(1, l, a), q_sl(1, l))).collect();
        let treatment_given_exposure = (0..nl)
            .map(|l| (0..nm).map(|m| ratio(q_slam[idx(1, l, a, m)], q_slm(1, l, m))).collect())
            .collect();
        let exposure = [0, 1].map(|s| {
            (0..nl).map(|l| (0..nm).map(|m| ratio(q_slm(s, l, m), q_sl(s, l))).collect()).collect()
        });
        let trial_exposure: Vec<Vec<f64>> = (0..nl)
            .map(|l| (0..nm).map(|m| ratio(q_slam[idx(1, l, a, m)], q_sla(1, l, a))).collect())
            .collect();
        let trial_prob = (0..nl).map(|l| ratio(q_sl(1, l), q_sl(0, l) + q_sl(1, l))).collect();
        let outcome: Vec<Vec<f64>> = (0..nl)
            .map(|l| {
                (0..nm)
                    .map(|m| {
                        let t0 = (qy_slm[l * nm + m], q_slm(0, l, m));
                        if pooled {
                            let t1 = (qy_slm[(nl + l) * nm + m], q_slm(1, l, m));
                            ratio(t0.0 + t1.0, t0.1 + t1.1)
                        } else {
                            ratio(t0.0, t0.1)
                        }
                    })
                    .collect()
            })
            .collect();
        let sequential = (0..nl)
            .map(|l| {
                (0..nm)
                    .filter(|&m| trial_exposure[l][m] > 0.0 || trial_exposure[l][m].is_nan())
                    .map(|m| trial_exposure[l][m] * outcome[l][m])
                    .sum()
            })
            .collect();
        Ok(Self {
            treatment_level: a,
            target_prob: law.source_prob(0),
            treatment,
            treatment_given_exposure,
            exposure,
            trial_exposure,
            trial_prob,
            outcome,
            sequential,
        })
    }

    /// First weight at `(l, m)` for the given EIF form.
    pub fn w1(&self, form: EifForm, l: usize, m: usize) -> f64 {
        let g0 = self.exposure[0][l][m];
        match form {
            EifForm::SourceSpecific => {
                self.treatment_given_exposure[l][m] * self.exposure[1][l][m] / (self.treatment[l] * g0)
            }
            EifForm::ExposureDensity => self.trial_exposure[l][m] / g0,
            EifForm::Pooled => {
                let h1 = self.trial_prob[l];
                let h0 = 1.0 - h1;
                h0 * self.trial_exposure[l][m] / (g0 * h0 + self.exposure[1][l][m] * h1)
            }
        }
    }

    /// Second weight at `l`.
    pub fn w2(&self, l: usize) -> f64 {
        let h1 = self.trial_prob[l];
        (1.0 - h1) / (self.treatment[l] * h1)
    }

    /// Influence-function terms at one cell, centred at `psi`.
    pub fn terms(&self, law: &DiscreteLaw, form: EifForm, c: Cell, psi: f64) -> [f64; 3] {
        let gamma = 1.0 / self.target_prob;
        let y = law.outcome_values()[c.y];
        let t1 = self.outcome[c.l][c.m];
        let t2 = self.sequential[c.l];
        let observed_y = c.s == 0 || form == EifForm::Pooled;
        let term1 = if observed_y { gamma * self.w1(form, c.l, c.m) * (y - t1) } else { 0.0 };
        let term2 = if c.s == 1 && c.a == self.treatment_level { gamma * self.w2(c.l) * (t1 - t2) } else { 0.0 };
        let term3 = if c.s == 0 { gamma * (t2 - psi) } else { 0.0 };
        [term1, term2, term3]
    }

    /// Exact expectation under `law` of the uncentred influence function
    /// (terms 1 and 2 plus `gamma (1 - S) T2`). Equals the g-formula value
    /// whenever one of the robustness model groups is correct.
    pub fn uncentered_mean(&self, law: &DiscreteLaw, form: EifForm) -> f64 {
        law.support()
            .map(|(c, p)| {
                let [t1, t2, t3] = self.terms(law, form, c, 0.0);
                p * (t1 + t2 + t3)
            })
            .sum()
    }
}

/// Exact `E(Y^a | S=0)` by summation over the law:
/// `sum_{l,m} E(Y | m, l, S=0) P(m | l, a, S=1) P(l | S=0)`.
pub fn gformula_exact(law: &DiscreteLaw, a: usize) -> Result<f64> {
    gformula(law, a, false)
}

/// The same functional with the outcome regression pooled over sources,
/// `E(Y | m, l)`.
pub fn gformula_pooled_exact(law: &DiscreteLaw, a: usize) -> Result<f64> {
    gformula(law, a, true)
}

fn gformula(law: &DiscreteLaw, a: usize, pooled: bool) -> Result<f64> {
    let nu = LawNuisances::truth(law, a, pooled)?;
    let q0 = nu.target_prob;
    let mut psi = 0.0;
    for l in 0..law.patterns() {
        let p_l = law.mass(|c| c.s == 0 && c.l == l) / q0;
        if p_l == 0.0 {
            continue;
        }
        if nu.trial_exposure[l].iter().any(|v| v.is_nan()) {
            return Err(Error::Positivity(format!(
                "stratum {}: no trial mass at treatment level {a}",
                describe(law, l)
            )));
        }
        for m in 0..law.exposure_levels() {
            let pm = nu.trial_exposure[l][m];
            if pm == 0.0 {
                continue;
            }
            let t1 = nu.outcome[l][m];
            if t1.is_nan() {
                let source = if pooled { "either source" } else { "the target source" };
                return Err(Error::Positivity(format!(
                    "stratum {},M={m}: no mass in {source} to define the outcome regression",
                    describe(law, l)
                )));
            }
            psi += p_l * pm * t1;
        }
    }
    Ok(psi)
}

/// The two components of the efficiency bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParts {
    /// `P(S=0)^-1 E[W1^2 var(Y) + (T2 - psi)^2 | S=0]`, the bound when
    /// `E(Y^a | S=0)` would be identified from the target source alone.
    pub target: f64,
    /// `P(S=1) P(S=0)^-2 E[h0^2 var(T1 | L, A=a, S=1) / (h1^2 e_a) | S=1]`.
    pub trial: f64,
    /// The trial expectation with a `P(S=0)^-1` factor instead.
    pub trial_unit_factor: f64,
}

impl BoundParts {
    pub fn total(&self) -> f64 {
        self.target + self.trial
    }
}

/// Nonparametric efficiency bound at treatment level `a`; the exact
/// variance of the influence function under `law`.
pub fn efficiency_bound(law: &DiscreteLaw, a: usize) -> Result<f64> {
    efficiency_bound_parts(law, a).map(|b| b.total())
}

pub fn efficiency_bound_parts(law: &DiscreteLaw, a: usize) -> Result<BoundParts> {
    let psi = gformula_exact(law, a)?;
    let nu = LawNuisances::truth(law, a, false)?;
    let (q0, q1) = (nu.target_prob, 1.0 - nu.target_prob);
    let ys = law.outcome_values();
    // E[W1^2 var(Y) + (T2 - psi)^2 | S=0]
    let mut target = 0.0;
    for (c, p) in law.support().filter(|(c, _)| c.s == 0) {
        let (l, m) = (c.l, c.m);
        let w1 = nu.w1(EifForm::ExposureDensity, l, m);
        if w1 != 0.0 {
            target += p / q0 * w1 * w1 * (ys[c.y] - nu.outcome[l][m]).powi(2);
        }
        target += p / q0 * (nu.sequential[l] - psi).powi(2);
    }
    // E[h0^2 var(T1 | l, A=a, S=1) / (h1^2 e_a) | S=1]
    let mut trial = 0.0;
    for l in 0..law.patterns() {
        let p_l = law.mass(|c| c.s == 1 && c.l == l) / q1;
        if p_l == 0.0 {
            continue;
        }
        let (e, h1) = (nu.treatment[l], nu.trial_prob[l]);
        if !(e > 0.0 && h1 > 0.0) {
            return Err(Error::Positivity(format!(
                "stratum {}: zero probability of treatment level {a} in the trial",
                describe(law, l)
            )));
        }
        let var: f64 = (0..law.exposure_levels())
            .filter(|&m| nu.trial_exposure[l][m] > 0.0)
            .map(|m| nu.trial_exposure[l][m] * (nu.outcome[l][m] - nu.sequential[l]).powi(2))
            .sum();
        let h0 = 1.0 - h1;
        trial += p_l * h0 * h0 / (h1 * h1 * e) * var;
    }
    Ok(BoundParts { target: target / q0, trial: q1 / (q0 * q0) * trial, trial_unit_factor: trial / q0 })
}

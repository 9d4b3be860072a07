use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::glm::{GlmOptions, Interactions, TermSpec};

/// Which form of the first EIF term (and of the IPW weight) to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Parameterization {
    /// `f_a(M,L) g_M(1,L) / (e_a(L) g_M(0,L))`.
    #[default]
    SourceSpecific,
    /// `p(M | S=1, A=a, L) / p(M | S=0, L)`.
    ExposureDensity,
}

/// How `p(M | S, L)` is fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExposureFit {
    /// One model with S as a regressor.
    #[default]
    Joint,
    /// Separate models per source.
    Stratified,
}

/// Working model for `T2(L, A) = E{T1(L, M) | L, A, S=1}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequentialModel {
    /// Regress the (targeted) T1 predictions on `(L, A)` in the trial.
    Regression(TermSpec),
    /// Integrate T1 over a fitted model for `p(M | L, A, S=1)`.
    ExposureIntegral(TermSpec),
}

impl Default for SequentialModel {
    fn default() -> Self {
        Self::Regression(TermSpec::main_effects())
    }
}

/// Working models for every nuisance function plus the options that decide
/// which of them are fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NuisanceSpec {
    /// `e_a(L) = P(A=a | S=1, L)`.
    pub treatment: TermSpec,
    /// `f_a(M, L) = P(A=a | S=1, M, L)`.
    pub treatment_given_exposure: TermSpec,
    /// `g_M(S, L) = p(M | S, L)`.
    pub exposure: TermSpec,
    pub exposure_fit: ExposureFit,
    /// `p(M | S=1, A, L)`, used by the `exposure-density` parameterization.
    pub trial_exposure: TermSpec,
    /// `h_s(L) = P_q(S=s | L)`.
    pub source: TermSpec,
    /// `T1 = E(Y | L, M, S=0)`, or `E(Y | L, M)` when pooling.
    pub outcome: TermSpec,
    pub sequential: SequentialModel,
    /// Known trial randomization probability for the target level; bypasses
    /// the `e_a` regression.
    pub known_randomization: Option<f64>,
    pub parameterization: Parameterization,
    pub pooled_outcome: bool,
    /// Symmetric quantile truncation of the weights (e.g. 0.995). Off by default.
    pub weight_truncation: Option<f64>,
    pub glm: GlmOptions,
}

impl Default for NuisanceSpec {
    fn default() -> Self {
        Self::main_effects()
    }
}

impl NuisanceSpec {
    /// Every nuisance with the same term spec.
    pub fn uniform(t: TermSpec) -> Self {
        Self {
            treatment: t.clone(),
            treatment_given_exposure: t.clone(),
            exposure: t.clone(),
            exposure_fit: ExposureFit::Joint,
            trial_exposure: t.clone(),
            source: t.clone(),
            outcome: t.clone(),
            sequential: SequentialModel::Regression(t),
            known_randomization: None,
            parameterization: Parameterization::SourceSpecific,
            pooled_outcome: false,
            weight_truncation: None,
            glm: GlmOptions::default(),
        }
    }

    /// Linear main effects for every model.
    pub fn main_effects() -> Self {
        Self::uniform(TermSpec::main_effects())
    }

    /// Main effects plus all pairwise interactions.
    pub fn pairwise() -> Self {
        Self::uniform(TermSpec::main_effects().with_interactions(Interactions::Pairwise))
    }

    /// Fully interacted models; on discrete data every fit reproduces the
    /// empirical conditional frequencies.
    pub fn saturated() -> Self {
        Self::uniform(TermSpec::saturated())
    }

    /// Additive natural splines for continuous covariates and main effects
    /// for factors (the generalized-additive-model surrogate).
    pub fn additive_splines() -> Self {
        Self::uniform(TermSpec::additive_splines())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(p) = self.known_randomization {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("known randomization probability {p} not in (0, 1)")));
            }
        }
        if let Some(q) = self.weight_truncation {
            if !(q > 0.5 && q < 1.0) {
                return Err(Error::Config(format!("weight truncation level {q} not in (0.5, 1)")));
            }
        }
        for t in [
            &self.treatment,
            &self.treatment_given_exposure,
            &self.exposure,
            &self.trial_exposure,
            &self.source,
            &self.outcome,
        ] {
            t.validate()?;
        }
        match &self.sequential {
            SequentialModel::Regression(t) | SequentialModel::ExposureIntegral(t) => t.validate(),
        }
    }
}

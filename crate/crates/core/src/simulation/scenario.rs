use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Coefficients of `P(S=1 | L) = expit(b0 + l1 L1 + l2 L2 + l3 L3 + l3_sq L3^2)`;
/// the intercept is calibrated, not configured.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionModel {
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l3_sq: f64,
}

impl Default for SelectionModel {
    fn default() -> Self {
        Self { l1: 1.0, l2: 1.0, l3: 1.0, l3_sq: -0.5 }
    }
}

/// `P(M=1 | A, L) = expit(intercept + treatment[A-1] + l1 L1 + l2 L2 + l3 L3)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExposureModel {
    pub intercept: f64,
    /// Effect of each non-reference treatment level.
    pub treatment: Vec<f64>,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
}

impl Default for ExposureModel {
    fn default() -> Self {
        Self { intercept: -3.0, treatment: vec![2.0], l1: 2.0, l2: 1.0, l3: 1.0 }
    }
}

/// `P(Y=1 | M, L, S) = expit(intercept + exposure M + l1 L1 + l2 L2 + l3 L3
/// + l2_l3 L2 L3 + l2_sq L2^2 + source S)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutcomeModel {
    pub intercept: f64,
    pub exposure: f64,
    pub l1: f64,
    pub l2: f64,
    pub l3: f64,
    pub l2_l3: f64,
    pub l2_sq: f64,
    pub source: f64,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        Self { intercept: 1.0, exposure: 2.0, l1: 1.0, l2: 1.0, l3: -1.0, l2_l3: -1.0, l2_sq: -1.0, source: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Arms {
    /// `A in {0, 1}`, randomized 1:1 in the trial.
    #[default]
    Binary,
    /// `A in {0, 1, 2}`, randomized 1:1:1 in the trial.
    ThreeArm,
}

impl Arms {
    pub fn levels(self) -> usize {
        match self {
            Arms::Binary => 2,
            Arms::ThreeArm => 3,
        }
    }
}

/// One simulation scenario: cohort, sample sizes and structural models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub cohort_size: usize,
    /// Expected number of trial participants; sets the selection intercept.
    pub n_trial: usize,
    /// Size of the simple random sample of non-participants.
    pub n_target: usize,
    pub reps: usize,
    pub seed: u64,
    pub arms: Arms,
    /// Trial randomization probabilities per level; uniform when absent.
    pub randomization: Option<Vec<f64>>,
    pub selection: SelectionModel,
    pub exposure: ExposureModel,
    pub outcome: OutcomeModel,
    /// Also draw outcomes for trial participants (pooled-outcome mode).
    pub outcome_in_trial: bool,
    /// Cohort draws for the truth oracle.
    pub oracle_size: usize,
    /// Covariate draws for the intercept calibration.
    pub calibration_size: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            cohort_size: 100_000,
            n_trial: 2000,
            n_target: 2500,
            reps: 1000,
            seed: 20240601,
            arms: Arms::Binary,
            randomization: None,
            selection: SelectionModel::default(),
            exposure: ExposureModel::default(),
            outcome: OutcomeModel::default(),
            outcome_in_trial: false,
            oracle_size: 10_000_000,
            calibration_size: 1_000_000,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if self.reps < 1 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if self.n_trial == 0 || self.n_trial >= self.cohort_size {
            return Err(Error::Config(format!(
                "expected trial size {} must lie in (0, cohort size {})",
                self.n_trial, self.cohort_size
            )));
        }
        if self.n_target == 0 || self.n_target + self.n_trial > self.cohort_size {
            return Err(Error::Config(format!(
                "target sample {} plus expected trial size {} exceeds cohort size {}",
                self.n_target, self.n_trial, self.cohort_size
            )));
        }
        if self.exposure.treatment.len() + 1 != self.arms.levels() {
            return Err(Error::Config(format!(
                "exposure model has {} treatment effects for {} arms",
                self.exposure.treatment.len(),
                self.arms.levels()
            )));
        }
        let probs = self.randomization_probs();
        if probs.len() != self.arms.levels()
            || probs.iter().any(|&p| !(p > 0.0))
            || (probs.iter().sum::<f64>() - 1.0).abs() > 1e-9
        {
            return Err(Error::Config("randomization probabilities must be positive, one per arm, and sum to 1".into()));
        }
        if self.oracle_size == 0 || self.calibration_size == 0 {
            return Err(Error::Config("oracle and calibration sizes must be positive".into()));
        }
        Ok(())
    }

    pub fn randomization_probs(&self) -> Vec<f64> {
        self.randomization
            .clone()
            .unwrap_or_else(|| vec![1.0 / self.arms.levels() as f64; self.arms.levels()])
    }

    /// Default scenario with three arms.
    pub fn three_arm() -> Self {
        Self {
            arms: Arms::ThreeArm,
            exposure: ExposureModel { treatment: vec![2.0, 1.0], ..ExposureModel::default() },
            ..Self::default()
        }
    }
}

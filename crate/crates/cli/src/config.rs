//! Run configuration: a TOML file whose keys mirror the command-line flags,
//! with flags taking precedence.

use std::path::{Path, PathBuf};

use clap::ValueEnum;
use lte_core::{ColumnSpec, EstimatorKind, NuisanceSpec, ObservabilityMode, TableSpec};
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Named nuisance model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Models {
    MainEffects,
    Pairwise,
    Saturated,
    AdditiveSplines,
}

impl Models {
    pub fn spec(self) -> NuisanceSpec {
        match self {
            Models::MainEffects => NuisanceSpec::main_effects(),
            Models::Pairwise => NuisanceSpec::pairwise(),
            Models::Saturated => NuisanceSpec::saturated(),
            Models::AdditiveSplines => NuisanceSpec::additive_splines(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Variance {
    Eif,
    Bootstrap,
}

/// Every setting a run can take. All keys are optional in the file; flags
/// override them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct RunConfig {
    pub data: Option<PathBuf>,
    pub mode: Option<ObservabilityMode>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<ColumnSpec>,
    pub estimator: Option<EstimatorKind>,
    pub treatment_level: Option<String>,
    pub variance: Option<Variance>,
    pub boot_reps: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub threads: Option<usize>,
    pub models: Option<Models>,
    /// Full nuisance specification; overrides `models`.
    pub nuisance: Option<NuisanceSpec>,
    pub positivity_eps: Option<f64>,
    pub preset: Option<String>,
    pub reps: Option<usize>,
    pub oracle_size: Option<usize>,
}

pub const DEFAULT_BOOT_REPS: usize = 500;
pub const DEFAULT_POSITIVITY_EPS: f64 = 0.01;

impl RunConfig {
    /// Read a config file. Relative `data` paths resolve against the file's
    /// directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: RunConfig = toml::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config {}: {e}", path.display())))?;
        if let (Some(data), Some(dir)) = (&cfg.data, path.parent()) {
            if data.is_relative() {
                cfg.data = Some(dir.join(data));
            }
        }
        Ok(cfg)
    }

    /// Overlay `other`'s set fields onto `self`.
    pub fn merge(mut self, other: RunConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(
            data, mode, estimator, treatment_level, variance, boot_reps, seed, out, threads, models, nuisance,
            positivity_eps, preset, reps, oracle_size
        );
        if !other.columns.is_empty() {
            self.columns = other.columns;
        }
        self
    }

    pub fn table_spec(&self) -> Result<TableSpec, CliError> {
        if self.columns.is_empty() {
            return Err(CliError::Validation("no column declarations (`[[columns]]` in the config)".into()));
        }
        Ok(TableSpec::new(self.columns.clone())?)
    }

    pub fn mode(&self) -> Result<ObservabilityMode, CliError> {
        self.mode.ok_or_else(|| CliError::Validation("observability `mode` is required".into()))
    }

    pub fn data_path(&self) -> Result<&Path, CliError> {
        let p = self.data.as_deref().ok_or_else(|| CliError::Validation("`data` path is required".into()))?;
        if !p.is_file() {
            return Err(CliError::Validation(format!("data file {} does not exist", p.display())));
        }
        Ok(p)
    }

    pub fn nuisance_spec(&self) -> NuisanceSpec {
        match (&self.nuisance, self.models) {
            (Some(spec), _) => spec.clone(),
            (None, Some(m)) => m.spec(),
            (None, None) => NuisanceSpec::default(),
        }
    }

    pub fn positivity_eps(&self) -> f64 {
        self.positivity_eps.unwrap_or(DEFAULT_POSITIVITY_EPS)
    }

    /// The settings that determine results: output location and thread
    /// count are dropped, and the data path is replaced by the data hash.
    pub fn canonical(&self) -> RunConfig {
        RunConfig { data: None, out: None, threads: None, ..self.clone() }
    }
}

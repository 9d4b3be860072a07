use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What a column means in the observed data `O = (S, L, A*, M, Y*)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Role {
    Source,
    Treatment,
    Exposure,
    Outcome,
    Covariate,
}

/// Value domain of a column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    /// Values `0` / `1`.
    Binary,
    /// Finite set of labels; the first level is the reference.
    Categorical(Vec<String>),
    Continuous,
}

impl Kind {
    /// Number of levels for discrete kinds.
    pub fn levels(&self) -> Option<usize> {
        match self {
            Kind::Binary => Some(2),
            Kind::Categorical(l) => Some(l.len()),
            Kind::Continuous => None,
        }
    }

    pub fn is_discrete(&self) -> bool {
        !matches!(self, Kind::Continuous)
    }

    /// Label of a level code, as written to CSV.
    pub fn label(&self, code: u32) -> String {
        match self {
            Kind::Categorical(l) => l[code as usize].clone(),
            _ => code.to_string(),
        }
    }

    /// Level code of a label.
    pub fn code(&self, label: &str) -> Option<u32> {
        let label = label.trim();
        match self {
            Kind::Binary => match label.parse::<f64>() {
                Ok(v) if v == 0.0 => Some(0),
                Ok(v) if v == 1.0 => Some(1),
                _ => None,
            },
            Kind::Categorical(levels) => levels.iter().position(|l| l == label).map(|p| p as u32),
            Kind::Continuous => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    pub role: Role,
    pub kind: Kind,
}

impl ColumnSpec {
    pub fn new(name: impl Into<String>, role: Role, kind: Kind) -> Self {
        Self { name: name.into(), role, kind }
    }
}

/// Which cells of A and Y are observed in each source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObservabilityMode {
    /// A observed only in the trial, Y observed only in the target source.
    TreatmentUnmeasured,
    /// A observed everywhere but constant in the target source; Y only in the target source.
    TreatmentZeroSupport,
    /// Y observed in both sources; A observed in the trial.
    PooledOutcome,
}

impl ObservabilityMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::TreatmentUnmeasured => "treatment-unmeasured",
            Self::TreatmentZeroSupport => "treatment-zero-support",
            Self::PooledOutcome => "pooled-outcome",
        }
    }
}

impl std::str::FromStr for ObservabilityMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "treatment-unmeasured" => Ok(Self::TreatmentUnmeasured),
            "treatment-zero-support" => Ok(Self::TreatmentZeroSupport),
            "pooled-outcome" => Ok(Self::PooledOutcome),
            other => Err(Error::Config(format!("unknown observability mode `{other}`"))),
        }
    }
}

/// A validated set of column declarations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<ColumnSpec>", into = "Vec<ColumnSpec>")]
pub struct TableSpec {
    columns: Vec<ColumnSpec>,
}

impl TableSpec {
    pub fn new(columns: Vec<ColumnSpec>) -> Result<Self> {
        for role in [Role::Source, Role::Treatment, Role::Exposure, Role::Outcome] {
            let count = columns.iter().filter(|c| c.role == role).count();
            if count != 1 {
                return Err(Error::Schema(format!(
                    "expected exactly one {role:?} column, found {count}"
                )));
            }
        }
        for (i, c) in columns.iter().enumerate() {
            if c.name.trim().is_empty() {
                return Err(Error::Schema(format!("column {i} has an empty name")));
            }
            if columns[..i].iter().any(|d| d.name == c.name) {
                return Err(Error::Schema(format!("duplicate column `{}`", c.name)));
            }
            if let Kind::Categorical(levels) = &c.kind {
                if levels.is_empty() {
                    return Err(Error::Schema(format!("`{}` has no categorical levels", c.name)));
                }
                for (j, l) in levels.iter().enumerate() {
                    if levels[..j].contains(l) {
                        return Err(Error::Schema(format!("`{}` repeats level `{l}`", c.name)));
                    }
                }
            }
            let ok = match c.role {
                Role::Source => c.kind == Kind::Binary,
                Role::Treatment | Role::Exposure => c.kind.is_discrete(),
                Role::Outcome => matches!(c.kind, Kind::Binary | Kind::Continuous),
                Role::Covariate => true,
            };
            if !ok {
                return Err(Error::Schema(format!(
                    "column `{}`: kind {:?} not supported for role {:?}",
                    c.name, c.kind, c.role
                )));
            }
        }
        Ok(Self { columns })
    }

    pub fn columns(&self) -> &[ColumnSpec] {
        &self.columns
    }

    pub fn by_role(&self, role: Role) -> &ColumnSpec {
        self.columns
            .iter()
            .find(|c| c.role == role)
            .expect("validated spec has every singleton role")
    }

    pub fn source(&self) -> &ColumnSpec {
        self.by_role(Role::Source)
    }

    pub fn treatment(&self) -> &ColumnSpec {
        self.by_role(Role::Treatment)
    }

    pub fn exposure(&self) -> &ColumnSpec {
        self.by_role(Role::Exposure)
    }

    pub fn outcome(&self) -> &ColumnSpec {
        self.by_role(Role::Outcome)
    }

    pub fn covariates(&self) -> impl Iterator<Item = &ColumnSpec> {
        self.columns.iter().filter(|c| c.role == Role::Covariate)
    }

    /// Resolve a treatment label (e.g. `"1"` or `"sts"`) to its level code.
    pub fn treatment_code(&self, label: &str) -> Result<u32> {
        let col = self.treatment();
        col.kind.code(label).ok_or_else(|| {
            Error::Config(format!("`{label}` is not a level of treatment column `{}`", col.name))
        })
    }
}

impl TryFrom<Vec<ColumnSpec>> for TableSpec {
    type Error = Error;

    fn try_from(columns: Vec<ColumnSpec>) -> Result<Self> {
        Self::new(columns)
    }
}

impl From<TableSpec> for Vec<ColumnSpec> {
    fn from(spec: TableSpec) -> Self {
        spec.columns
    }
}

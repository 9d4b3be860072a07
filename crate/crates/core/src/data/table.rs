use serde::Serialize;

use super::spec::{Kind, ObservabilityMode, TableSpec};
use crate::error::{Error, Result};

/// One covariate column. Discrete values are stored as level codes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Covariate {
    pub name: String,
    pub kind: Kind,
    pub values: Vec<f64>,
}

/// One observation, used for row-wise construction.
#[derive(Debug, Clone, PartialEq)]
pub struct Row {
    pub source: u8,
    pub covariates: Vec<f64>,
    pub treatment: Option<u32>,
    pub exposure: u32,
    pub outcome: Option<f64>,
}

/// Column-oriented table contents prior to validation.
#[derive(Debug, Clone, Default)]
pub struct Columns {
    pub source: Vec<u8>,
    /// One vector per covariate, in spec order.
    pub covariates: Vec<Vec<f64>>,
    pub treatment: Vec<Option<u32>>,
    pub exposure: Vec<u32>,
    pub outcome: Vec<Option<f64>>,
}

/// Validated multi-source dataset. Immutable once built.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationTable {
    spec: TableSpec,
    mode: ObservabilityMode,
    source: Vec<u8>,
    covariates: Vec<Covariate>,
    treatment: Vec<Option<u32>>,
    exposure: Vec<u32>,
    outcome: Vec<Option<f64>>,
}

impl ObservationTable {
    pub fn from_columns(spec: TableSpec, mode: ObservabilityMode, cols: Columns) -> Result<Self> {
        let n = cols.source.len();
        let cov_specs: Vec<_> = spec.covariates().cloned().collect();
        if cols.covariates.len() != cov_specs.len() {
            return Err(Error::Schema(format!(
                "spec declares {} covariates, got {}",
                cov_specs.len(),
                cols.covariates.len()
            )));
        }
        let lens = [cols.treatment.len(), cols.exposure.len(), cols.outcome.len()];
        if lens.iter().any(|&l| l != n) || cols.covariates.iter().any(|c| c.len() != n) {
            return Err(Error::Dimension("columns have unequal lengths".into()));
        }

        let covariates = cov_specs
            .into_iter()
            .zip(cols.covariates)
            .map(|(c, values)| Covariate { name: c.name, kind: c.kind, values })
            .collect();
        let table = Self {
            spec,
            mode,
            source: cols.source,
            covariates,
            treatment: cols.treatment,
            exposure: cols.exposure,
            outcome: cols.outcome,
        };
        table.validate()?;
        Ok(table)
    }

    pub fn from_rows(spec: TableSpec, mode: ObservabilityMode, rows: &[Row]) -> Result<Self> {
        let k = spec.covariates().count();
        let mut cols = Columns { covariates: vec![Vec::with_capacity(rows.len()); k], ..Default::default() };
        for (i, r) in rows.iter().enumerate() {
            if r.covariates.len() != k {
                return Err(Error::Dimension(format!(
                    "row {i} has {} covariates, expected {k}",
                    r.covariates.len()
                )));
            }
            cols.source.push(r.source);
            for (c, v) in cols.covariates.iter_mut().zip(&r.covariates) {
                c.push(*v);
            }
            cols.treatment.push(r.treatment);
            cols.exposure.push(r.exposure);
            cols.outcome.push(r.outcome);
        }
        Self::from_columns(spec, mode, cols)
    }

    fn validate(&self) -> Result<()> {
        let n_a = self.spec.treatment().kind.levels().unwrap_or(0) as u32;
        let n_m = self.spec.exposure().kind.levels().unwrap_or(0) as u32;
        let binary_y = self.spec.outcome().kind == Kind::Binary;
        let mut target_treatment: Option<u32> = None;

        for i in 0..self.n() {
            let s = self.source[i];
            if s > 1 {
                return Err(Error::Presence { row: i, rule: format!("source must be 0 or 1, got {s}") });
            }
            for c in &self.covariates {
                let v = c.values[i];
                if !v.is_finite() {
                    return Err(Error::Presence { row: i, rule: format!("covariate `{}` is not finite", c.name) });
                }
                if let Some(k) = c.kind.levels() {
                    if v.fract() != 0.0 || v < 0.0 || v >= k as f64 {
                        return Err(Error::Presence {
                            row: i,
                            rule: format!("covariate `{}` has invalid level code {v}", c.name),
                        });
                    }
                }
            }
            if let Some(a) = self.treatment[i] {
                if a >= n_a {
                    return Err(Error::Presence { row: i, rule: format!("treatment code {a} out of range") });
                }
            }
            if self.exposure[i] >= n_m {
                return Err(Error::Presence {
                    row: i,
                    rule: format!("exposure code {} out of range", self.exposure[i]),
                });
            }
            if let Some(y) = self.outcome[i] {
                if !y.is_finite() {
                    return Err(Error::Presence { row: i, rule: "outcome is not finite".into() });
                }
                if binary_y && y != 0.0 && y != 1.0 {
                    return Err(Error::Presence { row: i, rule: format!("binary outcome must be 0 or 1, got {y}") });
                }
            }

            let (a, y) = (self.treatment[i].is_some(), self.outcome[i].is_some());
            let violation = match (self.mode, s) {
                (ObservabilityMode::TreatmentUnmeasured, 0) if a => {
                    Some("treatment must be unobserved in the target source (S=0)")
                }
                (ObservabilityMode::TreatmentUnmeasured | ObservabilityMode::TreatmentZeroSupport, 0) if !y => {
                    Some("outcome must be observed in the target source (S=0)")
                }
                (ObservabilityMode::TreatmentUnmeasured | ObservabilityMode::TreatmentZeroSupport, 1) if y => {
                    Some("outcome must be unobserved in the trial source (S=1)")
                }
                (ObservabilityMode::TreatmentZeroSupport, 0) if !a => {
                    Some("treatment must be observed in the target source (S=0)")
                }
                (_, 1) if !a => Some("treatment must be observed in the trial source (S=1)"),
                (ObservabilityMode::PooledOutcome, _) if !y => {
                    Some("outcome must be observed in both sources")
                }
                _ => None,
            };
            if let Some(rule) = violation {
                return Err(Error::Presence { row: i, rule: format!("observability pattern violated for {} data: {rule}", self.mode.name()) });
            }

            if self.mode == ObservabilityMode::TreatmentZeroSupport && s == 0 {
                let a = self.treatment[i].expect("checked above");
                match target_treatment {
                    None => target_treatment = Some(a),
                    Some(t) if t != a => {
                        return Err(Error::Presence {
                            row: i,
                            rule: "treatment must take a single level in the target source (S=0) \
                                   under treatment-zero-support"
                                .into(),
                        })
                    }
                    _ => {}
                }
            }
        }

        let (n0, n1) = self.source_counts();
        if n0 == 0 || n1 == 0 {
            return Err(Error::EmptyStratum(format!("need rows from both sources, got n0={n0}, n1={n1}")));
        }
        Ok(())
    }

    pub fn spec(&self) -> &TableSpec {
        &self.spec
    }

    pub fn mode(&self) -> ObservabilityMode {
        self.mode
    }

    pub fn n(&self) -> usize {
        self.source.len()
    }

    /// `(n_{s=0}, n_{s=1})`.
    pub fn source_counts(&self) -> (usize, usize) {
        let n1 = self.source.iter().filter(|&&s| s == 1).count();
        (self.n() - n1, n1)
    }

    pub fn source(&self) -> &[u8] {
        &self.source
    }

    pub fn covariates(&self) -> &[Covariate] {
        &self.covariates
    }

    pub fn treatment(&self) -> &[Option<u32>] {
        &self.treatment
    }

    pub fn exposure(&self) -> &[u32] {
        &self.exposure
    }

    pub fn outcome(&self) -> &[Option<f64>] {
        &self.outcome
    }

    pub fn treatment_levels(&self) -> usize {
        self.spec.treatment().kind.levels().expect("discrete treatment")
    }

    pub fn exposure_levels(&self) -> usize {
        self.spec.exposure().kind.levels().expect("discrete exposure")
    }

    pub fn row(&self, i: usize) -> Row {
        Row {
            source: self.source[i],
            covariates: self.covariates.iter().map(|c| c.values[i]).collect(),
            treatment: self.treatment[i],
            exposure: self.exposure[i],
            outcome: self.outcome[i],
        }
    }

    pub fn rows_in_source(&self, s: u8) -> Vec<usize> {
        (0..self.n()).filter(|&i| self.source[i] == s).collect()
    }

    /// Observed outcome range `(min, max)` over rows with Y present.
    pub fn outcome_range(&self) -> Option<(f64, f64)> {
        self.outcome.iter().flatten().fold(None, |acc, &y| match acc {
            None => Some((y, y)),
            Some((lo, hi)) => Some((lo.min(y), hi.max(y))),
        })
    }

    /// New table made of the given rows (repeats allowed), re-validated.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        let pick_u8 = |v: &[u8]| idx.iter().map(|&i| v[i]).collect::<Vec<_>>();
        let cols = Columns {
            source: pick_u8(&self.source),
            covariates: self.covariates.iter().map(|c| idx.iter().map(|&i| c.values[i]).collect()).collect(),
            treatment: idx.iter().map(|&i| self.treatment[i]).collect(),
            exposure: idx.iter().map(|&i| self.exposure[i]).collect(),
            outcome: idx.iter().map(|&i| self.outcome[i]).collect(),
        };
        Self::from_columns(self.spec.clone(), self.mode, cols)
    }

    /// Whether the row satisfies its mode's presence pattern; always true for
    /// a constructed table, exposed for property tests.
    pub fn presence_holds(&self, i: usize) -> bool {
        let (a, y) = (self.treatment[i].is_some(), self.outcome[i].is_some());
        match (self.mode, self.source[i]) {
            (ObservabilityMode::TreatmentUnmeasured, 0) => !a && y,
            (ObservabilityMode::TreatmentUnmeasured, _) => a && !y,
            (ObservabilityMode::TreatmentZeroSupport, 0) => a && y,
            (ObservabilityMode::TreatmentZeroSupport, _) => a && !y,
            (ObservabilityMode::PooledOutcome, 0) => y,
            (ObservabilityMode::PooledOutcome, _) => a && y,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::spec::{ColumnSpec, Role};

    pub(crate) fn spec() -> TableSpec {
        TableSpec::new(vec![
            ColumnSpec::new("S", Role::Source, Kind::Binary),
            ColumnSpec::new("A", Role::Treatment, Kind::Binary),
            ColumnSpec::new("M", Role::Exposure, Kind::Binary),
            ColumnSpec::new("Y", Role::Outcome, Kind::Binary),
            ColumnSpec::new("L", Role::Covariate, Kind::Continuous),
        ])
        .unwrap()
    }

    fn row(s: u8, a: Option<u32>, y: Option<f64>) -> Row {
        Row { source: s, covariates: vec![0.3], treatment: a, exposure: 1, outcome: y }
    }

    #[test]
    fn unmeasured_mode_rejects_target_treatment() {
        let rows = [row(0, Some(1), Some(1.0)), row(1, Some(0), None)];
        let err = ObservationTable::from_rows(spec(), ObservabilityMode::TreatmentUnmeasured, &rows).unwrap_err();
        assert!(matches!(err, Error::Presence { row: 0, .. }), "{err}");
    }

    #[test]
    fn zero_support_requires_constant_target_treatment() {
        let ok = [row(0, Some(0), Some(1.0)), row(0, Some(0), Some(0.0)), row(1, Some(1), None)];
        let t = ObservationTable::from_rows(spec(), ObservabilityMode::TreatmentZeroSupport, &ok).unwrap();
        assert_eq!(t.source_counts(), (2, 1));

        let bad = [row(0, Some(0), Some(1.0)), row(0, Some(1), Some(0.0)), row(1, Some(1), None)];
        let err = ObservationTable::from_rows(spec(), ObservabilityMode::TreatmentZeroSupport, &bad).unwrap_err();
        assert!(matches!(err, Error::Presence { row: 1, .. }));
    }

    #[test]
    fn pooled_mode_needs_outcomes_everywhere() {
        let rows = [row(0, None, Some(1.0)), row(1, Some(1), None)];
        assert!(ObservationTable::from_rows(spec(), ObservabilityMode::PooledOutcome, &rows).is_err());
        let rows = [row(0, None, Some(1.0)), row(1, Some(1), Some(0.0))];
        assert!(ObservationTable::from_rows(spec(), ObservabilityMode::PooledOutcome, &rows).is_ok());
    }

    #[test]
    fn each_source_needs_a_row() {
        let rows = [row(0, None, Some(1.0))];
        let err = ObservationTable::from_rows(spec(), ObservabilityMode::TreatmentUnmeasured, &rows).unwrap_err();
        assert!(matches!(err, Error::EmptyStratum(_)));
    }

    #[test]
    fn non_binary_outcome_rejected() {
        let rows = [row(0, None, Some(0.5)), row(1, Some(1), None)];
        assert!(ObservationTable::from_rows(spec(), ObservabilityMode::TreatmentUnmeasured, &rows).is_err());
    }

    #[test]
    fn select_allows_repeats() {
        let rows = [row(0, None, Some(1.0)), row(1, Some(1), None), row(0, None, Some(0.0))];
        let t = ObservationTable::from_rows(spec(), ObservabilityMode::TreatmentUnmeasured, &rows).unwrap();
        let b = t.select(&[0, 0, 1, 1]).unwrap();
        assert_eq!(b.n(), 4);
        assert_eq!(b.source_counts(), (2, 2));
        assert!(t.select(&[0, 2]).is_err());
    }
}

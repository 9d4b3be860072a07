//! Finite joint laws `q(s, l, a, m, y)` with exact conditionals.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::data::{Columns, ColumnSpec, Kind, ObservabilityMode, ObservationTable, Role, TableSpec};
use crate::error::{Error, Result};

/// Joint probability table over `(S, L, A, M, Y)` with discrete `L`
/// (a vector of factors, indexed by its mixed-radix pattern), `A`, `M`, and
/// a finite set of outcome values.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteLaw {
    covariate_levels: Vec<usize>,
    treatment_levels: usize,
    exposure_levels: usize,
    outcome_values: Vec<f64>,
    prob: Vec<f64>,
}

/// One cell of a law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub s: usize,
    pub l: usize,
    pub a: usize,
    pub m: usize,
    pub y: usize,
}

#[derive(Debug, Serialize, Deserialize)]
struct CsvCell {
    s: u8,
    l: String,
    a: u32,
    m: u32,
    y: f64,
    probability: f64,
}

impl DiscreteLaw {
    /// Build from cell probabilities (indexed as [`DiscreteLaw::index`]).
    /// Probabilities must be non-negative and sum to one; both sources must
    /// have positive mass.
    pub fn new(
        covariate_levels: Vec<usize>,
        treatment_levels: usize,
        exposure_levels: usize,
        outcome_values: Vec<f64>,
        prob: Vec<f64>,
    ) -> Result<Self> {
        if covariate_levels.iter().any(|&k| k < 1) || treatment_levels < 1 || exposure_levels < 1 {
            return Err(Error::InvalidInput("every support must have at least one level".into()));
        }
        if outcome_values.is_empty() || outcome_values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("outcome values must be finite and non-empty".into()));
        }
        let law = Self { covariate_levels, treatment_levels, exposure_levels, outcome_values, prob: Vec::new() };
        if prob.len() != law.cells() {
            return Err(Error::Dimension(format!("law has {} cells, got {} probabilities", law.cells(), prob.len())));
        }
        if prob.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidInput("probabilities must be finite and non-negative".into()));
        }
        let total: f64 = prob.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput(format!("probabilities sum to {total}, not 1")));
        }
        let law = Self { prob, ..law };
        let q1 = law.source_prob(1);
        if !(q1 > 0.0 && q1 < 1.0) {
            return Err(Error::InvalidInput("both sources need positive probability".into()));
        }
        Ok(law)
    }

    /// Build from integer cell counts; probabilities are `count / total`.
    pub fn from_counts(
        covariate_levels: Vec<usize>,
        treatment_levels: usize,
        exposure_levels: usize,
        outcome_values: Vec<f64>,
        counts: &[u64],
    ) -> Result<Self> {
        let total: u64 = counts.iter().sum();
        if total == 0 {
            return Err(Error::InvalidInput("counts sum to zero".into()));
        }
        let prob = counts.iter().map(|&c| c as f64 / total as f64).collect();
        Self::new(covariate_levels, treatment_levels, exposure_levels, outcome_values, prob)
    }

    pub fn covariate_levels(&self) -> &[usize] {
        &self.covariate_levels
    }

    /// Number of covariate patterns.
    pub fn patterns(&self) -> usize {
        self.covariate_levels.iter().product()
    }

    pub fn treatment_levels(&self) -> usize {
        self.treatment_levels
    }

    pub fn exposure_levels(&self) -> usize {
        self.exposure_levels
    }

    pub fn outcome_values(&self) -> &[f64] {
        &self.outcome_values
    }

    pub fn cells(&self) -> usize {
        2 * self.patterns() * self.treatment_levels * self.exposure_levels * self.outcome_values.len()
    }

    pub fn index(&self, c: Cell) -> usize {
        (((c.s * self.patterns() + c.l) * self.treatment_levels + c.a) * self.exposure_levels + c.m)
            * self.outcome_values.len()
            + c.y
    }

    pub fn cell(&self, mut idx: usize) -> Cell {
        let ny = self.outcome_values.len();
        let y = idx % ny;
        idx /= ny;
        let m = idx % self.exposure_levels;
        idx /= self.exposure_levels;
        let a = idx % self.treatment_levels;
        idx /= self.treatment_levels;
        let l = idx % self.patterns();
        Cell { s: idx / self.patterns(), l, a, m, y }
    }

    pub fn prob(&self, c: Cell) -> f64 {
        self.prob[self.index(c)]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    /// Factor codes of covariate pattern `l`.
    pub fn pattern_codes(&self, mut l: usize) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.covariate_levels.len());
        for &k in self.covariate_levels.iter().rev() {
            out.push((l % k) as u32);
            l /= k;
        }
        out.reverse();
        out
    }

    /// Pattern index of factor codes.
    pub fn pattern_index(&self, codes: &[u32]) -> usize {
        codes.iter().zip(&self.covariate_levels).fold(0, |acc, (&c, &k)| acc * k + c as usize)
    }

    /// Sum of `q` over cells matching the predicate.
    pub fn mass(&self, pred: impl Fn(Cell) -> bool) -> f64 {
        self.prob.iter().enumerate().filter(|(i, _)| pred(self.cell(*i))).map(|(_, p)| p).sum()
    }

    pub fn source_prob(&self, s: usize) -> f64 {
        self.mass(|c| c.s == s)
    }

    /// Iterate over `(cell, probability)` for cells with positive mass.
    pub fn support(&self) -> impl Iterator<Item = (Cell, f64)> + '_ {
        self.prob.iter().enumerate().filter(|(_, &p)| p > 0.0).map(|(i, &p)| (self.cell(i), p))
    }

    /// Expand to an observation table in which every cell appears
    /// `q * total` times. Fails unless every such count is an integer.
    pub fn to_table(&self, mode: ObservabilityMode, total: u64) -> Result<ObservationTable> {
        let mut cols = Columns {
            covariates: vec![Vec::new(); self.covariate_levels.len()],
            ..Columns::default()
        };
        for (c, p) in self.support() {
            let exact = p * total as f64;
            let count = exact.round();
            if (count - exact).abs() > 1e-6 * exact.max(1.0) {
                return Err(Error::InvalidInput(format!("cell mass {p} times {total} is not an integer")));
            }
            let codes = self.pattern_codes(c.l);
            let (show_a, show_y) = match (mode, c.s) {
                (ObservabilityMode::TreatmentUnmeasured, 0) => (false, true),
                (ObservabilityMode::PooledOutcome, _) => (true, true),
                (_, 0) => (true, true),
                (_, _) => (true, false),
            };
            for _ in 0..count as u64 {
                cols.source.push(c.s as u8);
                for (j, &code) in codes.iter().enumerate() {
                    cols.covariates[j].push(f64::from(code));
                }
                cols.treatment.push(show_a.then_some(c.a as u32));
                cols.exposure.push(c.m as u32);
                cols.outcome.push(show_y.then_some(self.outcome_values[c.y]));
            }
        }
        ObservationTable::from_columns(self.table_spec(), mode, cols)
    }

    /// Column layout used by [`DiscreteLaw::to_table`]: `S, L1..Lk, A, M, Y`.
    pub fn table_spec(&self) -> TableSpec {
        let factor = |k: usize| {
            if k <= 2 {
                Kind::Binary
            } else {
                Kind::Categorical((0..k).map(|v| v.to_string()).collect())
            }
        };
        let binary_y = self.outcome_values.iter().all(|&y| y == 0.0 || y == 1.0);
        let mut cols = vec![ColumnSpec::new("S", Role::Source, Kind::Binary)];
        for (j, &k) in self.covariate_levels.iter().enumerate() {
            cols.push(ColumnSpec::new(format!("L{}", j + 1), Role::Covariate, factor(k)));
        }
        cols.push(ColumnSpec::new("A", Role::Treatment, factor(self.treatment_levels)));
        cols.push(ColumnSpec::new("M", Role::Exposure, factor(self.exposure_levels)));
        cols.push(ColumnSpec::new(
            "Y",
            Role::Outcome,
            if binary_y { Kind::Binary } else { Kind::Continuous },
        ));
        TableSpec::new(cols).expect("law table spec is valid by construction")
    }

    /// Write positive-mass cells as CSV rows `s,l,a,m,y,probability`, with
    /// `l` the covariate codes joined by `:`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for (c, p) in self.support() {
            let l = self.pattern_codes(c.l).iter().map(u32::to_string).collect::<Vec<_>>().join(":");
            w.serialize(CsvCell {
                s: c.s as u8,
                l,
                a: c.a as u32,
                m: c.m as u32,
                y: self.outcome_values[c.y],
                probability: p,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Read the format of [`DiscreteLaw::write_csv`]. Supports are the
    /// smallest consistent with the listed cells.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rows = Vec::new();
        for rec in csv::Reader::from_reader(reader).deserialize::<CsvCell>() {
            let rec = rec?;
            let l: Vec<u32> = if rec.l.is_empty() {
                Vec::new()
            } else {
                rec.l
                    .split(':')
                    .map(|v| v.parse().map_err(|_| Error::InvalidInput(format!("bad covariate pattern {:?}", rec.l))))
                    .collect::<Result<_>>()?
            };
            rows.push((rec, l));
        }
        let width = rows.first().map_or(0, |(_, l)| l.len());
        if rows.iter().any(|(_, l)| l.len() != width) {
            return Err(Error::InvalidInput("covariate patterns have different lengths".into()));
        }
        let mut levels = vec![1usize; width];
        let (mut na, mut nm) = (1usize, 1usize);
        let mut ys: Vec<f64> = Vec::new();
        for (r, l) in &rows {
            for (k, &c) in levels.iter_mut().zip(l) {
                *k = (*k).max(c as usize + 1);
            }
            na = na.max(r.a as usize + 1);
            nm = nm.max(r.m as usize + 1);
            if r.s > 1 {
                return Err(Error::InvalidInput(format!("source {} not in {{0, 1}}", r.s)));
            }
            ys.push(r.y);
        }
        ys.sort_by(f64::total_cmp);
        ys.dedup();
        let shell = Self {
            covariate_levels: levels.clone(),
            treatment_levels: na,
            exposure_levels: nm,
            outcome_values: ys.clone(),
            prob: Vec::new(),
        };
        let mut prob = vec![0.0; shell.cells()];
        for (r, l) in &rows {
            let y = ys.iter().position(|&v| v == r.y).expect("collected above");
            let idx = shell.index(Cell { s: r.s as usize, l: shell.pattern_index(l), a: r.a as usize, m: r.m as usize, y });
            prob[idx] += r.probability;
        }
        Self::new(levels, na, nm, ys, prob)
    }
}

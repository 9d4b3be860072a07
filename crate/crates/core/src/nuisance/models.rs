//! Fitted regression surfaces and feature-frame construction from tables.

use serde::Serialize;

use crate::data::{Kind, ObservationTable};
use crate::error::{Error, Result};
use crate::glm::{
    fit_logistic, fit_multinomial, linear_predictor, predict, predict_multinomial, DesignBasis, FeatureFrame,
    GlmFit, GlmOptions, MultinomialFit, TermSpec,
};

/// Convergence summary for one fitted model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelReport {
    pub name: String,
    pub rows: usize,
    pub columns: usize,
    pub converged: bool,
    pub separated: bool,
    pub ridge: bool,
    pub iterations: usize,
}

impl ModelReport {
    fn new(name: &str, rows: usize, columns: usize, fit: &GlmFit) -> Self {
        Self {
            name: name.to_string(),
            rows,
            columns,
            converged: fit.converged,
            separated: fit.separated,
            ridge: fit.ridge,
            iterations: fit.iterations,
        }
    }
}

/// Binary (or fractional) regression `P(target = 1 | features)`.
#[derive(Debug, Clone)]
pub struct BinaryModel {
    basis: DesignBasis,
    fit: GlmFit,
    clamp_eps: f64,
    report: ModelReport,
}

impl BinaryModel {
    pub fn fit(name: &str, spec: &TermSpec, frame: &FeatureFrame, y: &[f64], opts: &GlmOptions) -> Result<Self> {
        if frame.n() == 0 {
            return Err(Error::EmptyStratum(format!("no rows to fit {name}")));
        }
        let basis = DesignBasis::fit(spec, frame)?;
        let x = basis.build(frame)?;
        let w = vec![1.0; frame.n()];
        let fit = fit_logistic(&x, y, &w, None, opts)?;
        let report = ModelReport::new(name, frame.n(), x.ncols(), &fit);
        Ok(Self { basis, fit, clamp_eps: opts.clamp_eps, report })
    }

    /// Clamped probabilities.
    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        predict(&self.fit, &self.basis.build(frame)?, None, self.clamp_eps)
    }

    pub fn linear_predictor(&self, frame: &FeatureFrame) -> Result<Vec<f64>> {
        linear_predictor(&self.fit, &self.basis.build(frame)?, None)
    }

    pub fn report(&self) -> &ModelReport {
        &self.report
    }

    pub fn basis(&self) -> &DesignBasis {
        &self.basis
    }

    pub fn glm(&self) -> &GlmFit {
        &self.fit
    }
}

#[derive(Debug, Clone)]
enum CategoricalFit {
    Logistic(GlmFit),
    Multinomial(MultinomialFit),
}

/// Conditional distribution of a discrete target over `levels` codes.
#[derive(Debug, Clone)]
pub struct CategoricalModel {
    basis: DesignBasis,
    levels: usize,
    fit: CategoricalFit,
    clamp_eps: f64,
    reports: Vec<ModelReport>,
}

impl CategoricalModel {
    pub fn fit(
        name: &str,
        spec: &TermSpec,
        frame: &FeatureFrame,
        y: &[u32],
        levels: usize,
        opts: &GlmOptions,
    ) -> Result<Self> {
        if frame.n() == 0 {
            return Err(Error::EmptyStratum(format!("no rows to fit {name}")));
        }
        let basis = DesignBasis::fit(spec, frame)?;
        let x = basis.build(frame)?;
        let w = vec![1.0; frame.n()];
        let (fit, reports) = if levels == 2 {
            let yf: Vec<f64> = y.iter().map(|&c| f64::from(c)).collect();
            let f = fit_logistic(&x, &yf, &w, None, opts)?;
            let r = vec![ModelReport::new(name, frame.n(), x.ncols(), &f)];
            (CategoricalFit::Logistic(f), r)
        } else {
            let f = fit_multinomial(&x, y, levels, &w, opts)?;
            let r = f
                .fits
                .iter()
                .enumerate()
                .map(|(k, g)| ModelReport::new(&format!("{name}[{}]", k + 1), frame.n(), x.ncols(), g))
                .collect();
            (CategoricalFit::Multinomial(f), r)
        };
        Ok(Self { basis, levels, fit, clamp_eps: opts.clamp_eps, reports })
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    /// Row-wise probability vectors, each summing to one.
    pub fn predict(&self, frame: &FeatureFrame) -> Result<Vec<Vec<f64>>> {
        let x = self.basis.build(frame)?;
        match &self.fit {
            CategoricalFit::Logistic(f) => {
                Ok(predict(f, &x, None, self.clamp_eps)?.into_iter().map(|p| vec![1.0 - p, p]).collect())
            }
            CategoricalFit::Multinomial(f) => predict_multinomial(f, &x, self.clamp_eps),
        }
    }

    /// Probability of each row's own code.
    pub fn predict_at(&self, frame: &FeatureFrame, codes: &[u32]) -> Result<Vec<f64>> {
        Ok(self.predict(frame)?.iter().zip(codes).map(|(p, &c)| p[c as usize]).collect())
    }

    pub fn reports(&self) -> &[ModelReport] {
        &self.reports
    }
}

/// Which value the treatment or exposure feature takes in a frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Level {
    Observed,
    Fixed(u32),
}

/// Builds feature frames for subsets of a table's rows. Features are named
/// after the table's columns.
#[derive(Debug, Clone, Copy)]
pub struct Frames<'a> {
    table: &'a ObservationTable,
}

impl<'a> Frames<'a> {
    pub fn new(table: &'a ObservationTable) -> Self {
        Self { table }
    }

    pub fn covariates(&self, rows: &[usize]) -> FeatureFrame {
        let mut frame = FeatureFrame::new(rows.len());
        for c in self.table.covariates() {
            let values = rows.iter().map(|&i| c.values[i]);
            match &c.kind {
                Kind::Continuous => {
                    frame.push_continuous(&c.name, values.collect());
                }
                k => {
                    let levels = k.levels().unwrap_or(2) as u32;
                    frame.push_factor(&c.name, values.map(|v| v as u32).collect(), levels);
                }
            }
        }
        frame
    }

    pub fn with_source(&self, mut frame: FeatureFrame, rows: &[usize], source: Option<u8>) -> FeatureFrame {
        let s = self.table.source();
        let codes = rows.iter().map(|&i| u32::from(source.unwrap_or(s[i]))).collect();
        frame.push_factor(&self.table.spec().source().name, codes, 2);
        frame
    }

    pub fn with_treatment(&self, mut frame: FeatureFrame, rows: &[usize], level: Level) -> Result<FeatureFrame> {
        let t = self.table.treatment();
        let codes = rows
            .iter()
            .map(|&i| match level {
                Level::Fixed(a) => Ok(a),
                Level::Observed => t[i].ok_or_else(|| {
                    Error::InvalidInput(format!("row {i}: treatment required but not observed"))
                }),
            })
            .collect::<Result<Vec<u32>>>()?;
        frame.push_factor(&self.table.spec().treatment().name, codes, self.table.treatment_levels() as u32);
        Ok(frame)
    }

    pub fn with_exposure(&self, mut frame: FeatureFrame, rows: &[usize], level: Level) -> FeatureFrame {
        let m = self.table.exposure();
        let codes = rows
            .iter()
            .map(|&i| match level {
                Level::Fixed(v) => v,
                Level::Observed => m[i],
            })
            .collect();
        frame.push_factor(&self.table.spec().exposure().name, codes, self.table.exposure_levels() as u32);
        frame
    }
}

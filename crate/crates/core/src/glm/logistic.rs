//! Weighted logistic / quasi-binomial regression with offsets, fitted by
//! iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use crate::error::{Error, Result};
use crate::stats::{expit, softplus};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GlmOptions {
    pub max_iter: usize,
    /// Convergence when every weighted score component is at most this.
    pub score_tol: f64,
    /// Separation guard: coefficients are clipped to this magnitude.
    pub coef_cap: f64,
    /// Predictions are clamped to `[clamp_eps, 1 - clamp_eps]`.
    pub clamp_eps: f64,
}

impl Default for GlmOptions {
    fn default() -> Self {
        Self { max_iter: 100, score_tol: 1e-8, coef_cap: 30.0, clamp_eps: 1e-6 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlmFit {
    pub coefficients: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub deviance: f64,
    /// Largest absolute weighted score component at the returned coefficients.
    pub max_score: f64,
    /// A coefficient hit the separation cap.
    pub separated: bool,
    /// The Newton system was singular and a ridge term was added.
    pub ridge: bool,
}

fn check_inputs(x: &DesignMatrix, y: &[f64], w: &[f64], offset: Option<&[f64]>) -> Result<()> {
    let n = x.nrows();
    if y.len() != n || w.len() != n || offset.is_some_and(|o| o.len() != n) {
        return Err(Error::Dimension(format!(
            "design has {n} rows; y {}, w {}, offset {:?}",
            y.len(),
            w.len(),
            offset.map(<[f64]>::len)
        )));
    }
    if let Some(bad) = y.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        return Err(Error::InvalidInput(format!("response {bad} outside [0, 1]")));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(Error::InvalidInput("weights must be finite and non-negative".into()));
    }
    if !w.iter().any(|&v| v > 0.0) {
        return Err(Error::InvalidInput("all weights are zero".into()));
    }
    if offset.is_some_and(|o| o.iter().any(|v| !v.is_finite())) {
        return Err(Error::InvalidInput("offset must be finite".into()));
    }
    Ok(())
}

#[inline]
fn eta_at(x: &DesignMatrix, beta: &[f64], offset: Option<&[f64]>, i: usize) -> f64 {
    let r = x.row(i);
    let mut e = offset.map_or(0.0, |o| o[i]);
    for j in 0..beta.len() {
        e += r[j] * beta[j];
    }
    e
}

#[inline]
fn xlogx(v: f64) -> f64 {
    if v > 0.0 {
        v * v.ln()
    } else {
        0.0
    }
}

/// Weighted quasi-binomial log-likelihood `sum w [y log p + (1-y) log(1-p)]`.
pub fn log_likelihood(x: &DesignMatrix, y: &[f64], w: &[f64], offset: Option<&[f64]>, beta: &[f64]) -> f64 {
    (0..x.nrows())
        .map(|i| {
            let e = eta_at(x, beta, offset, i);
            -w[i] * (y[i] * softplus(-e) + (1.0 - y[i]) * softplus(e))
        })
        .sum()
}

fn deviance(x: &DesignMatrix, y: &[f64], w: &[f64], offset: Option<&[f64]>, beta: &[f64]) -> f64 {
    let sat: f64 = (0..x.nrows()).map(|i| w[i] * (xlogx(y[i]) + xlogx(1.0 - y[i]))).sum();
    2.0 * (sat - log_likelihood(x, y, w, offset, beta))
}

/// Weighted score `X' diag(w) (y - p)`.
pub fn score(x: &DesignMatrix, y: &[f64], w: &[f64], offset: Option<&[f64]>, beta: &[f64]) -> Vec<f64> {
    let p = x.ncols();
    let mut g = vec![0.0; p];
    for i in 0..x.nrows() {
        let r = w[i] * (y[i] - expit(eta_at(x, beta, offset, i)));
        for (gj, xj) in g.iter_mut().zip(x.row(i)) {
            *gj += r * xj;
        }
    }
    g
}

/// Solve `h d = g` for symmetric positive (semi)definite `h`, adding a ridge
/// if the Cholesky factorisation fails. Returns the solution and whether a
/// ridge was needed.
pub(crate) fn solve_spd(h: Vec<f64>, g: &[f64]) -> (Vec<f64>, bool) {
    let p = g.len();
    let mut m = DMatrix::from_row_slice(p, p, &h);
    let rhs = DVector::from_column_slice(g);
    if let Some(ch) = m.clone().cholesky() {
        return (ch.solve(&rhs).as_slice().to_vec(), false);
    }
    let scale = (0..p).map(|j| m[(j, j)].abs()).fold(0.0_f64, f64::max).max(1e-300);
    let mut lambda = 1e-10 * scale;
    loop {
        for j in 0..p {
            m[(j, j)] += lambda;
        }
        if let Some(ch) = m.clone().cholesky() {
            return (ch.solve(&rhs).as_slice().to_vec(), true);
        }
        lambda *= 10.0;
    }
}

/// Maximise the weighted quasi-binomial likelihood with linear predictor
/// `X beta + offset`. Responses may be fractional.
///
/// Non-convergence, separation and singular systems are reported through
/// flags on the returned fit rather than as errors.
pub fn fit_logistic(
    x: &DesignMatrix,
    y: &[f64],
    w: &[f64],
    offset: Option<&[f64]>,
    opts: &GlmOptions,
) -> Result<GlmFit> {
    check_inputs(x, y, w, offset)?;
    let (n, p) = (x.nrows(), x.ncols());
    let mut beta = vec![0.0; p];
    let mut fit = GlmFit {
        coefficients: Vec::new(),
        converged: false,
        iterations: 0,
        deviance: f64::NAN,
        max_score: f64::NAN,
        separated: false,
        ridge: false,
    };
    let mut dev = deviance(x, y, w, offset, &beta);

    loop {
        // Score and Fisher information at the current iterate.
        let mut g = vec![0.0; p];
        let mut h = vec![0.0; p * p];
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            let r = x.row(i);
            let mu = expit(eta_at(x, &beta, offset, i));
            let resid = w[i] * (y[i] - mu);
            let v = w[i] * mu * (1.0 - mu);
            for j in 0..p {
                g[j] += resid * r[j];
                let a = v * r[j];
                let hj = &mut h[j * p..j * p + j + 1];
                for (k, hk) in hj.iter_mut().enumerate() {
                    *hk += a * r[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                h[k * p + j] = h[j * p + k];
            }
        }
        fit.max_score = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        fit.deviance = dev;
        if fit.max_score <= opts.score_tol {
            fit.converged = true;
            break;
        }
        if fit.iterations >= opts.max_iter {
            break;
        }

        let (step, ridged) = solve_spd(h, &g);
        fit.ridge |= ridged;
        fit.iterations += 1;

        // Step halving on deviance increase.
        let mut t = 1.0;
        let mut next = beta.clone();
        let mut next_dev;
        let mut capped;
        loop {
            capped = false;
            for j in 0..p {
                let v = beta[j] + t * step[j];
                next[j] = if v.abs() > opts.coef_cap {
                    capped = true;
                    opts.coef_cap.copysign(v)
                } else {
                    v
                };
            }
            next_dev = deviance(x, y, w, offset, &next);
            if next_dev <= dev + 1e-12 * dev.abs().max(1.0) || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        fit.separated |= capped;
        let moved = next.iter().zip(&beta).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        beta = next;
        dev = next_dev;
        if moved <= 1e-15 * (1.0 + beta.iter().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            // Stalled at machine precision (or pinned at the cap): report the
            // score at this point and stop.
            let g = score(x, y, w, offset, &beta);
            fit.max_score = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            fit.converged = fit.max_score <= opts.score_tol;
            fit.deviance = dev;
            break;
        }
    }
    fit.coefficients = beta;
    Ok(fit)
}

/// Linear predictor `X beta + offset`.
pub fn linear_predictor(fit: &GlmFit, x: &DesignMatrix, offset: Option<&[f64]>) -> Result<Vec<f64>> {
    if x.ncols() != fit.coefficients.len() {
        return Err(Error::Dimension(format!(
            "design has {} columns, fit has {} coefficients",
            x.ncols(),
            fit.coefficients.len()
        )));
    }
    if offset.is_some_and(|o| o.len() != x.nrows()) {
        return Err(Error::Dimension("offset length".into()));
    }
    Ok((0..x.nrows()).map(|i| eta_at(x, &fit.coefficients, offset, i)).collect())
}

/// Fitted probabilities `expit(X beta + offset)` clamped to
/// `[clamp_eps, 1 - clamp_eps]`.
pub fn predict(fit: &GlmFit, x: &DesignMatrix, offset: Option<&[f64]>, clamp_eps: f64) -> Result<Vec<f64>> {
    Ok(linear_predictor(fit, x, offset)?
        .into_iter()
        .map(|e| expit(e).clamp(clamp_eps, 1.0 - clamp_eps))
        .collect())
}

//! Baseline-category multinomial logit, fitted jointly by Newton-Raphson.

use serde::{Deserialize, Serialize};

use super::design::DesignMatrix;
use super::logistic::{solve_spd, GlmFit, GlmOptions};
use crate::error::{Error, Result};

/// `K - 1` coefficient vectors against baseline level 0. Convergence flags
/// describe the joint fit and are repeated on every member.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialFit {
    pub levels: usize,
    pub fits: Vec<GlmFit>,
}

fn class_probs(x: &DesignMatrix, betas: &[Vec<f64>], i: usize, out: &mut [f64]) {
    let r = x.row(i);
    out[0] = 0.0;
    for (k, b) in betas.iter().enumerate() {
        out[k + 1] = r.iter().zip(b).map(|(a, c)| a * c).sum();
    }
    let m = out.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for v in out.iter_mut() {
        *v = (*v - m).exp();
        z += *v;
    }
    for v in out.iter_mut() {
        *v /= z;
    }
}

fn neg2_loglik(x: &DesignMatrix, y: &[u32], w: &[f64], betas: &[Vec<f64>], buf: &mut [f64]) -> f64 {
    let mut ll = 0.0;
    for i in 0..x.nrows() {
        if w[i] == 0.0 {
            continue;
        }
        class_probs(x, betas, i, buf);
        ll += w[i] * buf[y[i] as usize].max(f64::MIN_POSITIVE).ln();
    }
    -2.0 * ll
}

pub fn fit_multinomial(
    x: &DesignMatrix,
    y: &[u32],
    levels: usize,
    w: &[f64],
    opts: &GlmOptions,
) -> Result<MultinomialFit> {
    let (n, p) = (x.nrows(), x.ncols());
    if levels < 2 {
        return Err(Error::InvalidInput("multinomial needs at least two levels".into()));
    }
    if y.len() != n || w.len() != n {
        return Err(Error::Dimension(format!("design has {n} rows; y {}, w {}", y.len(), w.len())));
    }
    if y.iter().any(|&c| c as usize >= levels) {
        return Err(Error::InvalidInput("response level out of range".into()));
    }
    if w.iter().any(|v| !v.is_finite() || *v < 0.0) || !w.iter().any(|&v| v > 0.0) {
        return Err(Error::InvalidInput("weights must be non-negative, finite and not all zero".into()));
    }

    let km1 = levels - 1;
    let q = km1 * p;
    let mut betas = vec![vec![0.0; p]; km1];
    let mut buf = vec![0.0; levels];
    let mut dev = neg2_loglik(x, y, w, &betas, &mut buf);
    let (mut converged, mut iterations, mut separated, mut ridge) = (false, 0, false, false);
    let mut max_score;

    loop {
        let mut g = vec![0.0; q];
        let mut h = vec![0.0; q * q];
        for i in 0..n {
            if w[i] == 0.0 {
                continue;
            }
            let r = x.row(i);
            class_probs(x, &betas, i, &mut buf);
            for k in 0..km1 {
                let pk = buf[k + 1];
                let yk = if y[i] as usize == k + 1 { 1.0 } else { 0.0 };
                for j in 0..p {
                    g[k * p + j] += w[i] * (yk - pk) * r[j];
                }
                for l in 0..=k {
                    let pl = buf[l + 1];
                    let c = w[i] * pk * (if k == l { 1.0 } else { 0.0 } - pl);
                    for j in 0..p {
                        let a = c * r[j];
                        for m in 0..p {
                            h[(k * p + j) * q + l * p + m] += a * r[m];
                        }
                    }
                }
            }
        }
        // Only blocks (k, l) with l <= k were accumulated; mirror them.
        for a in 0..q {
            for b in (a + 1)..q {
                h[a * q + b] = h[b * q + a];
            }
        }
        max_score = g.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if max_score <= opts.score_tol {
            converged = true;
            break;
        }
        if iterations >= opts.max_iter {
            break;
        }
        let (step, r) = solve_spd(h, &g);
        ridge |= r;
        iterations += 1;

        let mut t = 1.0;
        let mut next = betas.clone();
        let mut next_dev;
        let mut capped;
        loop {
            capped = false;
            for k in 0..km1 {
                for j in 0..p {
                    let v = betas[k][j] + t * step[k * p + j];
                    next[k][j] = if v.abs() > opts.coef_cap {
                        capped = true;
                        opts.coef_cap.copysign(v)
                    } else {
                        v
                    };
                }
            }
            next_dev = neg2_loglik(x, y, w, &next, &mut buf);
            if next_dev <= dev + 1e-12 * dev.abs().max(1.0) || t < 1e-10 {
                break;
            }
            t *= 0.5;
        }
        separated |= capped;
        let moved = next
            .iter()
            .flatten()
            .zip(betas.iter().flatten())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()));
        betas = next;
        dev = next_dev;
        if moved <= 1e-15 * (1.0 + betas.iter().flatten().fold(0.0_f64, |m, v| m.max(v.abs()))) {
            break;
        }
    }

    let fits = betas
        .into_iter()
        .map(|coefficients| GlmFit {
            coefficients,
            converged,
            iterations,
            deviance: dev,
            max_score,
            separated,
            ridge,
        })
        .collect();
    Ok(MultinomialFit { levels, fits })
}

/// Class probabilities per row (`n x K`), each clamped below at `clamp_eps`
/// and renormalised so rows sum to one.
pub fn predict_multinomial(fit: &MultinomialFit, x: &DesignMatrix, clamp_eps: f64) -> Result<Vec<Vec<f64>>> {
    let p = fit.fits.first().map_or(0, |f| f.coefficients.len());
    if x.ncols() != p {
        return Err(Error::Dimension(format!("design has {} columns, fit expects {p}", x.ncols())));
    }
    let betas: Vec<Vec<f64>> = fit.fits.iter().map(|f| f.coefficients.clone()).collect();
    let mut out = Vec::with_capacity(x.nrows());
    let mut buf = vec![0.0; fit.levels];
    for i in 0..x.nrows() {
        class_probs(x, &betas, i, &mut buf);
        let mut row: Vec<f64> = buf.iter().map(|v| v.max(clamp_eps)).collect();
        let z: f64 = row.iter().sum();
        row.iter_mut().for_each(|v| *v /= z);
        out.push(row);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::glm::logistic::{fit_logistic, predict};

    #[test]
    fn uniform_three_levels_intercept_only() {
        let y: Vec<u32> = (0..30).map(|i| i % 3).collect();
        let x = DesignMatrix::intercept(30);
        let fit = fit_multinomial(&x, &y, 3, &vec![1.0; 30], &GlmOptions::default()).unwrap();
        assert!(fit.fits[0].converged);
        let p = predict_multinomial(&fit, &x, 1e-6).unwrap();
        for row in p {
            for v in row {
                assert!((v - 1.0 / 3.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn two_levels_match_logistic() {
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![1.0, (i as f64 * 0.37).sin(), (i % 5) as f64]).collect();
        let y: Vec<u32> = (0..40).map(|i| ((i * 7 + i / 3) % 2) as u32).collect();
        let w: Vec<f64> = (0..40).map(|i| 0.5 + (i % 4) as f64).collect();
        let names = vec!["1".into(), "a".into(), "b".into()];
        let x = DesignMatrix::from_rows(&rows, names).unwrap();
        let o = GlmOptions::default();
        let m = fit_multinomial(&x, &y, 2, &w, &o).unwrap();
        let yf: Vec<f64> = y.iter().map(|&v| v as f64).collect();
        let l = fit_logistic(&x, &yf, &w, None, &o).unwrap();
        let pm = predict_multinomial(&m, &x, 1e-12).unwrap();
        let pl = predict(&l, &x, None, 1e-12).unwrap();
        for (a, b) in pm.iter().zip(&pl) {
            assert!((a[1] - b).abs() < 1e-10);
        }
    }

    #[test]
    fn probabilities_sum_to_one() {
        let rows: Vec<Vec<f64>> = (0..60).map(|i| vec![1.0, (i as f64).cos()]).collect();
        let y: Vec<u32> = (0..60).map(|i| ((i * 5 + i / 7) % 4) as u32).collect();
        let x = DesignMatrix::from_rows(&rows, vec!["1".into(), "c".into()]).unwrap();
        let fit = fit_multinomial(&x, &y, 4, &vec![1.0; 60], &GlmOptions::default()).unwrap();
        for row in predict_multinomial(&fit, &x, 1e-6).unwrap() {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rejects_bad_levels() {
        let x = DesignMatrix::intercept(2);
        assert!(fit_multinomial(&x, &[0, 3], 3, &[1.0, 1.0], &GlmOptions::default()).is_err());
        assert!(fit_multinomial(&x, &[0, 0], 1, &[1.0, 1.0], &GlmOptions::default()).is_err());
    }
}

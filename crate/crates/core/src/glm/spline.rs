//! Natural cubic spline basis in truncated-power form.

use crate::stats::quantile_sorted;

/// Default interior knot positions, as covariate quantiles.
pub const DEFAULT_KNOT_QUANTILES: [f64; 3] = [0.25, 0.5, 0.75];

/// Knot vector `[min, interior..., max]` resolved from training data.
/// Returns `None` when the data has too few distinct values to support a
/// nonlinear basis.
pub fn resolve_knots(values: &[f64], interior: Option<&[f64]>) -> Option<Vec<f64>> {
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.total_cmp(b));
    let (lo, hi) = (*sorted.first()?, *sorted.last()?);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() < 3 {
        return None;
    }
    let mut knots = vec![lo];
    match interior {
        Some(k) => knots.extend(k.iter().copied().filter(|&v| v > lo && v < hi)),
        None => knots.extend(
            DEFAULT_KNOT_QUANTILES
                .iter()
                .map(|&q| quantile_sorted(&sorted, q))
                .filter(|&v| v > lo && v < hi),
        ),
    }
    knots.push(hi);
    knots.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * (1.0 + b.abs()));
    (knots.len() >= 3).then_some(knots)
}

/// Number of basis columns (excluding the intercept) for `k` knots.
pub fn basis_size(knots: &[f64]) -> usize {
    knots.len() - 1
}

/// Evaluate `x, d_1 - d_{K-1}, ..., d_{K-2} - d_{K-1}` at one point.
/// Linear beyond the boundary knots.
pub fn eval(knots: &[f64], x: f64, out: &mut Vec<f64>) {
    let k = knots.len();
    let last = knots[k - 1];
    let d = |j: usize| {
        let a = (x - knots[j]).max(0.0).powi(3);
        let b = (x - last).max(0.0).powi(3);
        (a - b) / (last - knots[j])
    };
    out.push(x);
    let d_km1 = d(k - 2);
    for j in 0..k - 2 {
        out.push(d(j) - d_km1);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_knots_with_boundaries() {
        let v: Vec<f64> = (0..=100).map(f64::from).collect();
        let k = resolve_knots(&v, None).unwrap();
        assert_eq!(k, vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert_eq!(basis_size(&k), 4);
    }

    #[test]
    fn degenerate_data_has_no_basis() {
        assert!(resolve_knots(&[1.0, 1.0, 1.0], None).is_none());
        assert!(resolve_knots(&[0.0, 1.0], None).is_none());
    }

    #[test]
    fn linear_outside_boundary() {
        let knots = [0.0, 1.0, 2.0, 3.0];
        let f = |x: f64| {
            let mut o = Vec::new();
            eval(&knots, x, &mut o);
            o
        };
        // Second differences vanish past the last knot.
        let (a, b, c) = (f(4.0), f(5.0), f(6.0));
        for j in 0..a.len() {
            assert!((a[j] - 2.0 * b[j] + c[j]).abs() < 1e-9);
        }
        let (a, b, c) = (f(-3.0), f(-2.0), f(-1.0));
        for j in 0..a.len() {
            assert!((a[j] - 2.0 * b[j] + c[j]).abs() < 1e-9);
        }
    }

    #[test]
    fn continuous_second_derivative_at_knots() {
        let knots = [0.0, 0.7, 1.3, 2.0];
        let h = 1e-4;
        let f = |x: f64| {
            let mut o = Vec::new();
            eval(&knots, x, &mut o);
            o
        };
        for &t in &knots[1..3] {
            let left = f(t - 2.0 * h);
            let mid_l = f(t - h);
            let mid = f(t);
            let mid_r = f(t + h);
            let right = f(t + 2.0 * h);
            for j in 0..mid.len() {
                let d2l = (left[j] - 2.0 * mid_l[j] + mid[j]) / (h * h);
                let d2r = (mid[j] - 2.0 * mid_r[j] + right[j]) / (h * h);
                assert!((d2l - d2r).abs() < 1e-2, "jump in f'' at {t}");
            }
        }
    }
}

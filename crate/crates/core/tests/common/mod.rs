#![allow(dead_code)]

use lte_core::eif::DiscreteLaw;
use rand::Rng;

/// Random full-support law from integer counts in `1..=max_count`.
pub fn random_law(rng: &mut impl Rng, covariates: &[usize], max_count: u64) -> (DiscreteLaw, Vec<u64>) {
    let patterns: usize = covariates.iter().product();
    let cells = 2 * patterns * 2 * 2 * 2;
    let counts: Vec<u64> = (0..cells).map(|_| rng.random_range(1..=max_count)).collect();
    let law = DiscreteLaw::from_counts(covariates.to_vec(), 2, 2, vec![0.0, 1.0], &counts).unwrap();
    (law, counts)
}

/// Brute-force g-formula straight from cell counts indexed
/// `[s][l][a][m][y]` with binary A, M, Y.
pub fn brute_force_gformula(counts: &[u64], patterns: usize, a: usize) -> f64 {
    let c = |s: usize, l: usize, aa: usize, m: usize, y: usize| counts[(((s * patterns + l) * 2 + aa) * 2 + m) * 2 + y] as f64;
    let mut n_target = 0.0;
    for l in 0..patterns {
        for aa in 0..2 {
            for m in 0..2 {
                for y in 0..2 {
                    n_target += c(0, l, aa, m, y);
                }
            }
        }
    }
    let mut psi = 0.0;
    for l in 0..patterns {
        let mut n_l0 = 0.0;
        let mut n_l1a = 0.0;
        for aa in 0..2 {
            for m in 0..2 {
                for y in 0..2 {
                    n_l0 += c(0, l, aa, m, y);
                    if aa == a {
                        n_l1a += c(1, l, aa, m, y);
                    }
                }
            }
        }
        for m in 0..2 {
            let n_m1a: f64 = (0..2).map(|y| c(1, l, a, m, y)).sum();
            let mut n_lm0 = 0.0;
            let mut n_lm0_y1 = 0.0;
            for aa in 0..2 {
                n_lm0 += c(0, l, aa, m, 0) + c(0, l, aa, m, 1);
                n_lm0_y1 += c(0, l, aa, m, 1);
            }
            psi += (n_l0 / n_target) * (n_m1a / n_l1a) * (n_lm0_y1 / n_lm0);
        }
    }
    psi
}

/// Covariate level codes of table row `i` as a law pattern index.
pub fn row_pattern(law: &DiscreteLaw, table: &lte_core::data::ObservationTable, i: usize) -> usize {
    let codes: Vec<u32> = table.covariates().iter().map(|c| c.values[i] as u32).collect();
    law.pattern_index(&codes)
}

/// Expand a count-built law into a table, one row per unit of count.
pub fn law_table(law: &DiscreteLaw, counts: &[u64], mode: lte_core::data::ObservabilityMode) -> lte_core::data::ObservationTable {
    law.to_table(mode, counts.iter().sum()).unwrap()
}

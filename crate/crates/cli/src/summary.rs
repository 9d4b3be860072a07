//! Plain-text summaries printed to stdout and saved next to the JSON.

use std::fmt::Write;

use lte_core::diagnostics::WeightSummary;
use lte_core::{EstimateReport, McMetrics, ObservationTable, PositivityReport, VarianceMethod};

use crate::commands::Provenance;

fn header(out: &mut String, p: &Provenance) {
    let _ = writeln!(out, "lte {} ({})", p.version, p.command);
    let _ = writeln!(out, "config sha256: {}", p.config_sha256);
    if let Some(d) = &p.data_sha256 {
        let _ = writeln!(out, "data sha256:   {d}");
    }
    match p.seed {
        Some(s) => {
            let _ = writeln!(out, "seed:          {s}");
        }
        None => {
            let _ = writeln!(out, "seed:          none");
        }
    }
}

fn weights(out: &mut String, name: &str, w: &WeightSummary) {
    let _ = writeln!(
        out,
        "  {name}: n={} median={:.3} p90={:.3} p99={:.3} max={:.3}",
        w.n, w.median, w.p90, w.p99, w.max
    );
}

fn positivity(out: &mut String, r: &PositivityReport) {
    let _ = writeln!(out, "positivity (eps = {}):", r.eps);
    let _ = writeln!(
        out,
        "  treatment probability in target rows: [{:.4}, {:.4}]",
        r.treatment_min, r.treatment_max
    );
    let _ = writeln!(out, "  min target exposure probability:      {:.4}", r.exposure_target_min);
    let _ = writeln!(out, "  min trial membership probability:     {:.4}", r.trial_prob_min);
    weights(out, "exposure weight", &r.w1);
    weights(out, "trial weight", &r.w2);
    if r.ok() {
        let _ = writeln!(out, "  no violations");
    } else {
        let _ = writeln!(out, "  {} violations, {} rows at the probability clamp", r.violations, r.clamped);
        for f in &r.flagged {
            let _ = writeln!(out, "  - {} ({} rows): {}", f.pattern, f.rows, f.reasons.join("; "));
        }
        if r.flagged_truncated > 0 {
            let _ = writeln!(out, "  ... {} more patterns", r.flagged_truncated);
        }
    }
}

pub fn estimate(table: &ObservationTable, r: &EstimateReport, pos: &PositivityReport, p: &Provenance) -> String {
    let mut out = String::new();
    header(&mut out, p);
    let (n_target, n_trial) = table.source_counts();
    let _ = writeln!(out, "rows: {n_target} target, {n_trial} trial ({})", table.mode().name());
    let _ = writeln!(out);
    let _ = writeln!(out, "estimator:       {}", r.estimator);
    let _ = writeln!(out, "treatment level: {}", table.spec().treatment().kind.label(r.treatment_level));
    let _ = writeln!(out, "estimate:        {:.6}", r.psi_hat);
    let _ = writeln!(out, "std. error:      {:.6}", r.std_err);
    let method = match r.variance {
        VarianceMethod::EifPlugin => "influence function".to_string(),
        VarianceMethod::Bootstrap { reps, .. } => format!("percentile bootstrap, {reps} reps"),
    };
    let _ = writeln!(out, "95% CI:          [{:.6}, {:.6}] ({method})", r.ci[0], r.ci[1]);
    if r.ci_adjusted {
        let _ = writeln!(out, "  interval widened to contain the estimate");
    }
    if let Some(b) = &r.bootstrap {
        if b.failed > 0 {
            let _ = writeln!(out, "  {} of {} bootstrap replicates failed", b.failed, b.reps);
        }
    }
    if r.degenerate_outcome {
        let _ = writeln!(out, "  outcome is constant; the estimate is that constant");
    }
    if !r.targeting_converged {
        let _ = writeln!(out, "  warning: targeting did not converge");
    }
    let _ = writeln!(out, "eif mean:        {:.3e}", r.eif_residual);
    for m in &r.nuisance.models {
        if !m.converged || m.separated {
            let _ = writeln!(
                out,
                "  model {}: converged={} separated={} ridge={}",
                m.name, m.converged, m.separated, m.ridge
            );
        }
    }
    let _ = writeln!(out);
    positivity(&mut out, pos);
    out
}

pub fn diagnose(table: &ObservationTable, level: u32, pos: &PositivityReport, p: &Provenance) -> String {
    let mut out = String::new();
    header(&mut out, p);
    let (n_target, n_trial) = table.source_counts();
    let _ = writeln!(out, "rows: {n_target} target, {n_trial} trial ({})", table.mode().name());
    let _ = writeln!(out, "treatment level: {}", table.spec().treatment().kind.label(level));
    let _ = writeln!(out);
    positivity(&mut out, pos);
    out
}

pub fn simulate(metrics: &[McMetrics], p: &Provenance) -> String {
    let mut out = String::new();
    header(&mut out, p);
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<12} {:>6} {:>6} {:>5} {:>9} {:>8} {:>8} {:>9}",
        "estimator", "n_s1", "n_s0", "reps", "bias100", "se100", "rmse100", "coverage"
    );
    for m in metrics {
        let cov = m.coverage.map_or("-".to_string(), |c| format!("{c:.1}"));
        let _ = writeln!(
            out,
            "{:<12} {:>6} {:>6} {:>5} {:>9.3} {:>8.3} {:>8.3} {:>9}",
            m.estimator, m.n_trial, m.n_target, m.reps, m.bias100, m.se100, m.mse100, cov
        );
    }
    out
}

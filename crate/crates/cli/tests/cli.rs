use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_lte");

/// Exact g-formula values of the fixture under treated = 1 and treated = 0,
/// summed with rational arithmetic from the cell counts.
const FIXTURE_PSI_TREATED: f64 = 28767239.0 / 55212300.0;
const FIXTURE_PSI_CONTROL: f64 = 31541.0 / 61776.0;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn lte(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn report(dir: &Path) -> Value {
    serde_json::from_slice(&fs::read(dir.join("report.json")).unwrap()).unwrap()
}

#[test]
fn saturated_estimates_match_fixture_gformula() {
    let config = fixture("saturated.toml");
    let tmp = tempfile::tempdir().unwrap();
    for (level, truth) in [("1", FIXTURE_PSI_TREATED), ("0", FIXTURE_PSI_CONTROL)] {
        for est in ["ice", "ipw", "tmle"] {
            let out = tmp.path().join(format!("{est}-{level}"));
            let o = lte(&[
                "estimate",
                "--config",
                config.to_str().unwrap(),
                "--estimator",
                est,
                "--treatment-level",
                level,
                "--out",
                out.to_str().unwrap(),
            ]);
            assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
            let r = report(&out);
            let psi = r["report"]["psi_hat"].as_f64().unwrap();
            assert!((psi - truth).abs() < 1e-8, "{est} level {level}: {psi} vs {truth}");
            assert_eq!(r["report"]["estimator"], est);
            let ci = r["report"]["ci"].as_array().unwrap();
            assert!(ci[0].as_f64().unwrap() <= psi && psi <= ci[1].as_f64().unwrap());
            assert!(r["positivity"]["violations"].as_u64() == Some(0));
            assert_eq!(r["provenance"]["command"], "estimate");
            assert_eq!(r["provenance"]["config_sha256"].as_str().unwrap().len(), 64);
        }
    }
}

#[test]
fn summary_is_printed_and_saved() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lte(&[
        "estimate",
        "--config",
        fixture("saturated.toml").to_str().unwrap(),
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let stdout = String::from_utf8(o.stdout).unwrap();
    assert!(stdout.contains("estimate:") && stdout.contains("positivity"));
    assert_eq!(stdout, fs::read_to_string(tmp.path().join("summary.txt")).unwrap());
}

#[test]
fn mode_data_mismatch_exits_2() {
    let o = lte(&[
        "estimate",
        "--config",
        fixture("saturated.toml").to_str().unwrap(),
        "--mode",
        "pooled-outcome",
    ]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("observability pattern"), "{err}");

    let o = lte(&[
        "estimate",
        "--config",
        fixture("saturated.toml").to_str().unwrap(),
        "--mode",
        "treatment-zero-support",
    ]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn invalid_inputs_exit_2() {
    let config = fixture("saturated.toml");
    let config = config.to_str().unwrap();
    // Missing data file.
    assert_eq!(lte(&["estimate", "--config", config, "--data", "/nonexistent.csv"]).status.code(), Some(2));
    // Bootstrap without a seed.
    assert_eq!(lte(&["estimate", "--config", config, "--variance", "bootstrap"]).status.code(), Some(2));
    // Unknown treatment label.
    assert_eq!(lte(&["estimate", "--config", config, "--treatment-level", "7"]).status.code(), Some(2));
    // Unknown estimator.
    assert_eq!(lte(&["estimate", "--config", config, "--estimator", "aipw"]).status.code(), Some(2));
    // No column declarations.
    let data = fixture("trial_target.csv");
    let o = lte(&["estimate", "--data", data.to_str().unwrap(), "--mode", "treatment-unmeasured"]);
    assert_eq!(o.status.code(), Some(2));

    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "estimator = \"tmle\"\nunknown-key = 1\n").unwrap();
    assert_eq!(lte(&["estimate", "--config", bad.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn arm_absent_from_trial_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(fixture("trial_target.csv")).unwrap();
    let mut lines = text.lines();
    let mut csv = format!("{}\n", lines.next().unwrap());
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        if f[0] == "1" && f[3] == "0" {
            continue;
        }
        csv.push_str(line);
        csv.push('\n');
    }
    let data = tmp.path().join("one_arm.csv");
    fs::write(&data, csv).unwrap();
    let o = lte(&[
        "estimate",
        "--config",
        fixture("saturated.toml").to_str().unwrap(),
        "--data",
        data.to_str().unwrap(),
        "--treatment-level",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |dir: &str| {
        let out = tmp.path().join(dir);
        let o = lte(&[
            "estimate",
            "--config",
            fixture("saturated.toml").to_str().unwrap(),
            "--variance",
            "bootstrap",
            "--boot-reps",
            "60",
            "--seed",
            "11",
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
        (fs::read(out.join("report.json")).unwrap(), fs::read(out.join("summary.txt")).unwrap())
    };
    let a = run("a");
    let b = run("b");
    assert_eq!(a, b);
    let r: Value = serde_json::from_slice(&a.0).unwrap();
    assert_eq!(r["provenance"]["seed"], 11);
    assert_eq!(r["report"]["bootstrap"]["reps"], 60);
}

#[test]
fn config_hash_tracks_settings_not_paths() {
    let tmp = tempfile::tempdir().unwrap();
    let config = fixture("saturated.toml");
    let hash = |extra: &[&str], dir: &str| {
        let out = tmp.path().join(dir);
        let mut args = vec!["estimate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
        args.extend_from_slice(extra);
        assert!(lte(&args).status.success());
        report(&out)["provenance"]["config_sha256"].as_str().unwrap().to_owned()
    };
    let base = hash(&[], "x");
    assert_eq!(base, hash(&["--threads", "1"], "y"));
    assert_ne!(base, hash(&["--estimator", "ice"], "z"));
}

#[test]
fn diagnose_writes_positivity_report() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lte(&[
        "diagnose",
        "--config",
        fixture("saturated.toml").to_str().unwrap(),
        "--positivity-eps",
        "0.45",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let d: Value = serde_json::from_slice(&fs::read(tmp.path().join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(d["n_trial"], 94);
    assert_eq!(d["n_target"], 96);
    // A threshold above the smallest fitted probabilities flags strata.
    assert!(d["positivity"]["violations"].as_u64().unwrap() > 0);
    let flagged = d["positivity"]["flagged"].as_array().unwrap();
    assert!(flagged[0]["pattern"].as_str().unwrap().contains("older="));
}

#[test]
fn smoke_preset_writes_two_replicate_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lte(&[
        "simulate",
        "--preset",
        "smoke",
        "--reps",
        "2",
        "--seed",
        "5",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    let mut lines = csv.lines();
    let header = lines.next().unwrap();
    for col in ["estimator", "bias100", "se100", "mse100", "coverage", "mc_se_bias100"] {
        assert!(header.split(',').any(|h| h == col), "missing {col}");
    }
    let rows: Vec<_> = lines.collect();
    assert_eq!(rows.len(), 3);
    let reps_col = header.split(',').position(|h| h == "reps").unwrap();
    for r in &rows {
        assert_eq!(r.split(',').nth(reps_col), Some("2"));
    }
    let p: Value = serde_json::from_slice(&fs::read(tmp.path().join("provenance.json")).unwrap()).unwrap();
    assert_eq!(p["seed"], 5);
    assert_eq!(p["config"]["preset"], "smoke");

    let again = tempfile::tempdir().unwrap();
    let o = lte(&[
        "simulate",
        "--preset",
        "smoke",
        "--reps",
        "2",
        "--seed",
        "5",
        "--out",
        again.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(csv, fs::read_to_string(again.path().join("results.csv")).unwrap());
}

#[test]
fn simulate_requires_known_preset_and_seed() {
    let o = lte(&["simulate", "--preset", "table9", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown preset"));
    assert_eq!(lte(&["simulate", "--preset", "smoke"]).status.code(), Some(2));
    assert_eq!(lte(&["simulate", "--seed", "1"]).status.code(), Some(2));
}

#[test]
fn table2_preset_emits_full_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let o = lte(&[
        "simulate",
        "--preset",
        "table2",
        "--reps",
        "2",
        "--oracle-size",
        "100000",
        "--seed",
        "3",
        "--out",
        tmp.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(tmp.path().join("results.csv")).unwrap();
    let rows: Vec<Vec<&str>> = csv.lines().skip(1).map(|l| l.split(',').collect()).collect();
    // Three target sizes, six trial sizes, three estimators.
    assert_eq!(rows.len(), 3 * 6 * 3);
    let mut cells: Vec<(&str, &str)> = rows.iter().map(|r| (r[1], r[2])).collect();
    cells.dedup();
    assert_eq!(cells.len(), 18);
    assert!(cells.contains(&("250", "2500")) && cells.contains(&("2000", "5000")));
}

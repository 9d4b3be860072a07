use std::fs;
use std::io::Write;
use std::path::Path;

use lte_core::data::load_csv;
use lte_core::estimators::{estimate_with, TargetingOptions};
use lte_core::simulation::{run_plan, write_metrics_csv};
use lte_core::{
    fit_nuisances, positivity_report, EstimateReport, EstimatorConfig, EstimatorKind, ObservationTable,
    PositivityReport, SimulationPlan, VarianceMethod,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Variance, DEFAULT_BOOT_REPS};
use crate::summary;
use crate::CliError;

/// Everything needed to reproduce a run.
#[derive(Debug, Serialize)]
pub struct Provenance {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub data_sha256: Option<String>,
    pub seed: Option<u64>,
    pub config: RunConfig,
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

impl Provenance {
    fn new(command: &'static str, cfg: &RunConfig, data: Option<&[u8]>) -> Self {
        let config = cfg.canonical();
        let json = serde_json::to_vec(&config).expect("config serializes");
        Self {
            tool: "lte",
            version: env!("CARGO_PKG_VERSION"),
            command,
            config_sha256: hex(&Sha256::digest(&json)),
            data_sha256: data.map(|d| hex(&Sha256::digest(d))),
            seed: cfg.seed,
            config,
        }
    }
}

#[derive(Serialize)]
struct EstimateOutput<'a> {
    provenance: &'a Provenance,
    report: &'a EstimateReport,
    positivity: &'a PositivityReport,
}

#[derive(Serialize)]
struct DiagnoseOutput<'a> {
    provenance: &'a Provenance,
    n_trial: usize,
    n_target: usize,
    treatment_level: u32,
    positivity: &'a PositivityReport,
}

struct Loaded {
    table: ObservationTable,
    bytes: Vec<u8>,
    level: u32,
}

fn load(cfg: &RunConfig) -> Result<Loaded, CliError> {
    let spec = cfg.table_spec()?;
    let mode = cfg.mode()?;
    let path = cfg.data_path()?;
    let bytes = fs::read(path).map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
    let table = load_csv(path, &spec, mode)?;
    let level = spec.treatment_code(cfg.treatment_level.as_deref().unwrap_or("1"))?;
    Ok(Loaded { table, bytes, level })
}

fn write_out(dir: &Path, name: &str, contents: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Estimation(format!("cannot create {}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| CliError::Estimation(format!("cannot write {}: {e}", path.display())))
}

fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("report serializes");
    v.push(b'\n');
    v
}

pub fn estimate(cfg: &RunConfig) -> Result<(), CliError> {
    let Loaded { table, bytes, level } = load(cfg)?;
    let variance = match cfg.variance.unwrap_or(Variance::Eif) {
        Variance::Eif => VarianceMethod::EifPlugin,
        Variance::Bootstrap => {
            let seed = cfg
                .seed
                .ok_or_else(|| CliError::Validation("--seed is required with --variance bootstrap".into()))?;
            VarianceMethod::Bootstrap { reps: cfg.boot_reps.unwrap_or(DEFAULT_BOOT_REPS), seed }
        }
    };
    let config = EstimatorConfig {
        kind: cfg.estimator.unwrap_or(EstimatorKind::Tmle),
        treatment_level: level,
        nuisance: cfg.nuisance_spec(),
        variance,
        targeting: TargetingOptions::default(),
    };
    config.nuisance.validate()?;
    let ns = fit_nuisances(&table, &config.nuisance_spec(), level)?;
    let report = estimate_with(&table, &ns, &config)?;
    let positivity = positivity_report(&table, &ns, cfg.positivity_eps())?;
    let provenance = Provenance::new("estimate", cfg, Some(&bytes));

    let text = summary::estimate(&table, &report, &positivity, &provenance);
    print!("{text}");
    if let Some(dir) = &cfg.out {
        let out = EstimateOutput { provenance: &provenance, report: &report, positivity: &positivity };
        write_out(dir, "report.json", &to_json(&out))?;
        write_out(dir, "summary.txt", text.as_bytes())?;
    }
    Ok(())
}

pub fn diagnose(cfg: &RunConfig) -> Result<(), CliError> {
    let Loaded { table, bytes, level } = load(cfg)?;
    let mut spec = cfg.nuisance_spec();
    spec.pooled_outcome = cfg.estimator == Some(EstimatorKind::TmlePooled);
    spec.validate()?;
    let ns = fit_nuisances(&table, &spec, level)?;
    let positivity = positivity_report(&table, &ns, cfg.positivity_eps())?;
    let provenance = Provenance::new("diagnose", cfg, Some(&bytes));

    let text = summary::diagnose(&table, level, &positivity, &provenance);
    print!("{text}");
    if let Some(dir) = &cfg.out {
        let (n_trial, n_target) = (table.rows_in_source(1).len(), table.rows_in_source(0).len());
        let out = DiagnoseOutput {
            provenance: &provenance,
            n_trial,
            n_target,
            treatment_level: level,
            positivity: &positivity,
        };
        write_out(dir, "diagnostics.json", &to_json(&out))?;
        write_out(dir, "summary.txt", text.as_bytes())?;
    }
    Ok(())
}

pub fn simulate(cfg: &RunConfig) -> Result<(), CliError> {
    let name = cfg
        .preset
        .as_deref()
        .ok_or_else(|| CliError::Validation("--preset is required for simulate".into()))?;
    let mut plan = SimulationPlan::preset(name)?;
    plan.scenario.seed = cfg.seed.ok_or_else(|| CliError::Validation("--seed is required for simulate".into()))?;
    if let Some(r) = cfg.reps {
        plan.scenario.reps = r;
    }
    if let Some(o) = cfg.oracle_size {
        plan.scenario.oracle_size = o;
    }
    plan.validate()?;

    let cells = plan.n_trial_grid.len() * plan.n_target_grid.len();
    let progress = |cell: usize, done: usize, total: usize| {
        let step = (total / 10).max(1);
        if done % step == 0 || done == total {
            eprintln!("cell {}/{cells}: {done}/{total} replicates", cell + 1);
        }
    };
    let metrics = run_plan(&plan, Some(&progress))?;

    let mut csv = Vec::new();
    write_metrics_csv(&metrics, &mut csv)?;
    let provenance = Provenance::new("simulate", cfg, None);
    match &cfg.out {
        Some(dir) => {
            write_out(dir, "results.csv", &csv)?;
            write_out(dir, "provenance.json", &to_json(&provenance))?;
            print!("{}", summary::simulate(&metrics, &provenance));
        }
        None => {
            eprint!("{}", String::from_utf8_lossy(&to_json(&provenance)));
            std::io::stdout()
                .write_all(&csv)
                .map_err(|e| CliError::Estimation(format!("cannot write results: {e}")))?;
        }
    }
    Ok(())
}

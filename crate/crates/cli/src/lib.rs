//! `shg`: config-driven experiment runner for the sinhgordon toolkit.

pub mod config;
pub mod error;
pub mod records;
pub mod runner;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use config::RunConfig;
use error::CliError;
use records::{write_records, Manifest};

/// Overrides applied on top of the config file.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub fast: bool,
    pub workers: usize,
}

/// Run one experiment and write `records.jsonl`, one CSV per curve and
/// `manifest.json` into `out_dir`.
pub fn run(mut cfg: RunConfig, out_dir: &Path, opts: &RunOptions) -> Result<Manifest, CliError> {
    if let Some(s) = opts.seed {
        cfg.estimator.seed = s;
    }
    if opts.fast {
        cfg.make_fast();
    }
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let started = Instant::now();
    let outcome = runner::run_experiment(&cfg)?;
    let mut files = vec!["records.jsonl".to_string()];
    write_records(&out_dir.join("records.jsonl"), &outcome.records)?;
    for c in &outcome.curves {
        let p: PathBuf = c.write(out_dir)?;
        files.push(p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default());
    }
    let manifest = Manifest {
        tool: "shg".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        experiment: cfg.experiment.name().into(),
        seed: cfg.estimator.seed,
        workers: opts.workers,
        fast: opts.fast,
        config: cfg,
        wall_ms: started.elapsed().as_millis() as u64,
        records: outcome.records.len(),
        files,
        passed: outcome.passed,
        coupling: outcome.coupling,
    };
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::write(out_dir.join("manifest.json"), text + "\n")?;
    Ok(manifest)
}

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sinhgordon_cli::config::RunConfig;
use sinhgordon_cli::error::CliError;
use sinhgordon_cli::records::{merge_records, read_records, write_records};
use sinhgordon_cli::{run, RunOptions};

#[derive(Parser)]
#[command(name = "shg", version, about = "Monte Carlo experiments for the Sinh-Gordon model on a cylinder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides estimator.seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; falls back to SHG_WORKERS, then all cores.
        #[arg(long)]
        workers: Option<usize>,
        /// CI profile: 16 modes, 10³ replicas, short chains.
        #[arg(long)]
        fast: bool,
        #[arg(long, default_value = "shg-out")]
        out_dir: PathBuf,
    },
    /// Merge record files that share parameter fingerprints.
    Merge {
        #[arg(required = true)]
        files: Vec<PathBuf>,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn workers(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(w) = flag {
        return Ok(w);
    }
    match std::env::var("SHG_WORKERS") {
        Ok(v) => v.parse().map_err(|_| CliError::Config(format!("SHG_WORKERS must be a count, got {v:?}"))),
        Err(_) => Ok(0),
    }
}

fn dispatch(cli: Cli) -> Result<bool, CliError> {
    match cli.command {
        Command::Run { config, seed, workers: w, fast, out_dir } => {
            let cfg = RunConfig::load(&config)?;
            let w = workers(w)?;
            if w > 0 {
                rayon::ThreadPoolBuilder::new()
                    .num_threads(w)
                    .build_global()
                    .map_err(|e| CliError::Runtime(e.to_string()))?;
            }
            let opts = RunOptions { seed, fast, workers: rayon::current_num_threads() };
            let m = run(cfg, &out_dir, &opts)?;
            eprintln!(
                "{}: {} records in {} ms, {} -> {}",
                m.experiment,
                m.records,
                m.wall_ms,
                if m.passed { "ok" } else { "check failed" },
                out_dir.display()
            );
            Ok(m.passed)
        }
        Command::Merge { files, out } => {
            let mut all = Vec::new();
            for f in &files {
                all.extend(read_records(f)?);
            }
            let merged = merge_records(&all)?;
            match out {
                Some(p) => write_records(&p, &merged)?,
                None => {
                    for r in &merged {
                        println!("{}", serde_json::to_string(r).map_err(|e| CliError::Runtime(e.to_string()))?);
                    }
                }
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("shg: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `malab solve | build-example | analyze`: reproducible experiments writing JSON, CSV
//! and MAGF1 files plus a manifest of content hashes.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::error;
use thiserror::Error;

use malab::config::{Command, ExperimentConfig};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("solver did not converge: {0}")]
    Solver(String),
    #[error("failing checks: {0}")]
    Check(String),
    #[error(transparent)]
    Lab(#[from] malab::MalabError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Solver(_) => 3,
            CliError::Check(_) => 4,
            CliError::Lab(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "malab", version, about = "Monge-Ampere laboratory experiments")]
struct Cli {
    #[command(subcommand)]
    command: Stage,
    /// JSON experiment config; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides the config).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads for the inner parallel loops.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Seed for randomized sampling (overrides the config).
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Stage {
    /// Solve a Dirichlet problem; writes solution.magf and report.json.
    Solve,
    /// Build and check the singular example; writes cantor.json, example-checks.json and solution.magf.
    BuildExample,
    /// Sections and estimates of a stored solution; writes sections.json and estimates/*.csv.
    Analyze,
}

impl Stage {
    fn command(self) -> Command {
        match self {
            Stage::Solve => Command::Solve,
            Stage::BuildExample => Command::BuildExample,
            Stage::Analyze => Command::Analyze,
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig, CliError> {
    let wanted = cli.command.command();
    let mut cfg = match &cli.config {
        None => ExperimentConfig::new(wanted),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
            ExperimentConfig::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
        }
    };
    if cfg.command != wanted {
        return Err(CliError::Config(format!("config is for {:?}, not {:?}", cfg.command, wanted)));
    }
    if let Some(out) = &cli.out {
        cfg.output_dir = out.display().to_string();
    }
    if let Some(t) = cli.threads {
        cfg.threads = Some(t);
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    cfg.validate().map_err(|e| CliError::Config(e.to_string()))?;
    Ok(cfg.resolved())
}

fn run(cli: &Cli) -> Result<(), CliError> {
    let cfg = load_config(cli)?;
    if let Some(n) = cfg.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("thread pool: {e}")))?;
    }
    match cfg.command {
        Command::Solve => commands::solve(&cfg),
        Command::BuildExample => commands::build_example(&cfg),
        Command::Analyze => commands::analyze(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            error!("{e}");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

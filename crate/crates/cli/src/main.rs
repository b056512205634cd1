mod artifacts;
mod build;
mod config;
mod error;
mod fom;
mod report;
mod rom;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use artifacts::{write_json, Layout};
use config::ExperimentConfig;
use error::CliError;

/// Offline/online driver for hyper-reduced manifold ROM experiments.
#[derive(Parser)]
#[command(name = "hrom", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Full-order runs for all train and test parameters.
    Fom(Common),
    /// Normalisation, rSVD, autoencoder training and point selection.
    Build(Common),
    /// ROM runs on the test parameters with error and timing tables.
    Rom(Common),
    /// Magic-point sets of the configured variants from existing build artifacts.
    SelectPoints(Common),
    /// Merge metrics of several `rom` output directories.
    Report(ReportArgs),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Experiment directory (overrides `output` in the config).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Args)]
struct ReportArgs {
    /// Directory for the merged tables.
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    threads: Option<usize>,
    /// `rom` output directories (or experiment directories containing `rom/`).
    #[arg(required = true)]
    reports: Vec<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (name, fallback_out) = match &cli.command {
        Command::Fom(c) => ("fom", c.out.clone()),
        Command::Build(c) => ("build", c.out.clone()),
        Command::Rom(c) => ("rom", c.out.clone()),
        Command::SelectPoints(c) => ("select-points", c.out.clone()),
        Command::Report(r) => ("report", Some(r.out.clone())),
    };
    let mut out_dir = fallback_out.unwrap_or_else(|| PathBuf::from("."));
    match dispatch(&cli.command, &mut out_dir) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hrom {name}: {e}");
            let layout = Layout::new(&out_dir);
            if let Err(w) = write_json(&layout.error_record(), &e.record(name)) {
                eprintln!("hrom {name}: could not write error record: {w}");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: &Command, out_dir: &mut PathBuf) -> Result<(), CliError> {
    match command {
        Command::Report(r) => {
            set_threads(r.threads)?;
            report::run(&r.reports, &r.out)
        }
        Command::Fom(c) | Command::Build(c) | Command::Rom(c) | Command::SelectPoints(c) => {
            let mut cfg = ExperimentConfig::load(&c.config)?;
            if let Some(seed) = c.seed {
                cfg.seed = seed;
            }
            if let Some(out) = &c.out {
                cfg.output = out.clone();
            }
            *out_dir = cfg.output.clone();
            set_threads(c.threads)?;
            let layout = Layout::new(&cfg.output);
            artifacts::ensure_dir(&cfg.output)?;
            let stale = layout.error_record();
            if stale.exists() {
                std::fs::remove_file(&stale).map_err(|e| CliError::io(&stale, e))?;
            }
            match command {
                Command::Fom(_) => fom::run(&cfg, &layout),
                Command::Build(_) => build::run(&cfg, &layout),
                Command::Rom(_) => rom::run(&cfg, &layout),
                _ => build::select_points(&cfg, &layout),
            }
        }
    }
}

fn set_threads(threads: Option<usize>) -> Result<(), CliError> {
    let Some(n) = threads else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Config("--threads must be positive".into()));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Config(format!("could not configure {n} threads: {e}")))
}

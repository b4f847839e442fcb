use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use camsim::config::ExperimentConfig;
use camsim::device::{tlm_fit, TlmDataset};
use camsim::runner::{self, describe_fit, RunOptions};
use camsim::Error;

#[derive(Parser)]
#[command(name = "camsim", version, about = "Resistive-matchline CAM array simulator")]
struct Cli {
    /// Worker threads for sweeps and Monte Carlo trials.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Overrides the config's output_dir.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Overrides study.seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dump voltage traces at the reference HDist.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the study described by a TOML config (or a run_manifest.json).
    Run { config: PathBuf },
    /// Extract sheet and contact resistance from a TLM CSV.
    TlmFit {
        csv: PathBuf,
        #[arg(long)]
        width_um: f64,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            report(&e);
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> camsim::Result<()> {
    let opts = RunOptions {
        output_dir: cli.output_dir,
        seed: cli.seed,
        trace: cli.trace,
        jobs: cli.jobs,
    };
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = runner::run(&cfg, &opts)?;
            for l in &summary.lines {
                println!("{l}");
            }
            println!(
                "wrote {} artifacts to {}",
                summary.artifacts.len() + 1,
                summary.output_dir.display()
            );
        }
        Command::TlmFit { csv, width_um } => {
            let fit = tlm_fit(&TlmDataset::from_csv_path(&csv, width_um)?)?;
            println!("{}", describe_fit(&fit));
        }
        Command::Validate { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let resolved = runner::prepare(&cfg, &opts)?;
            println!("{}: ok", config.display());
            print!("{}", toml::to_string(&resolved).map_err(|e| Error::Config(e.to_string()))?);
        }
    }
    Ok(())
}

fn report(e: &Error) {
    let issues = e.field_issues();
    if issues.is_empty() {
        eprintln!("error: {e}");
        let mut src = std::error::Error::source(e);
        while let Some(s) = src {
            eprintln!("  caused by: {s}");
            src = s.source();
        }
    } else {
        eprintln!("error: {} invalid field(s)", issues.len());
        for i in issues {
            eprintln!("  {}: {}", i.field, i.message);
        }
    }
}

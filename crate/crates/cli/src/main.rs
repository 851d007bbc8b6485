use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ptrs::report::{self, ExperimentConfig, ReportError};

#[derive(Parser)]
#[command(name = "ptrs", version, about = "Pre-test risk stratification benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
    /// Overrides `synth.seed` (synth only).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic cohort and its ground-truth sidecar.
    Synth(Common),
    /// Ingest, curate, evaluate the model x group grid and write the bundle.
    Run(Common),
    /// Re-render the results tables from an existing bundle.
    Tables(Common),
    /// Re-render the plot data from an existing bundle.
    Plotdata(Common),
}

fn load(common: &Common) -> Result<ExperimentConfig, ReportError> {
    match &common.config {
        Some(path) => ExperimentConfig::load(path),
        None => ExperimentConfig::from_toml("", std::env::current_dir().unwrap_or_default()),
    }
}

fn dispatch(command: Command) -> Result<(), ReportError> {
    match command {
        Command::Synth(c) => {
            let mut config = load(&c)?;
            if let Some(seed) = c.seed {
                config.synth.seed = seed;
            }
            let (csv, sidecar) = report::cmd_synth(&config.synth, &c.out)?;
            println!("wrote {} and {}", csv.display(), sidecar.display());
        }
        Command::Run(c) => {
            let config = load(&c)?;
            let manifest = report::cmd_run(&config, &c.out)?;
            println!("wrote {} files to {}", manifest.files.len(), c.out.display());
        }
        Command::Tables(c) => {
            let config = load(&c)?;
            report::cmd_tables(&config, &c.out)?;
            println!("tables written to {}", c.out.join("tables").display());
        }
        Command::Plotdata(c) => {
            let config = load(&c)?;
            report::cmd_plotdata(&config, &c.out)?;
            println!("plot data written to {}", c.out.join("plotdata").display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("ptrs: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

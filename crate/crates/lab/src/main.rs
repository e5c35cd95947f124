use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use regnoise_lab::{emit_plot_data, list_experiments, run_experiment, validate, ExperimentConfig, LabError, PlotKind};

#[derive(Parser)]
#[command(name = "regnoise", version, about = "Run regularisation-by-noise experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run { config: PathBuf },
    /// List experiments with their parameters and criteria.
    List,
    /// Emit a plot table (`tidy` or `loglog`) from a run directory.
    Plot { run_dir: PathBuf, kind: String },
    /// Check a config without running it.
    Validate { config: PathBuf },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, LabError> {
    match cmd {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let summary = run_experiment(&cfg)?;
            println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
            Ok(if summary.manifest.diverged { 3 } else { 0 })
        }
        Command::List => {
            for e in list_experiments() {
                let field = if e.field { " + [field]" } else { "" };
                println!("{:<26} criterion {:>2}  {}", e.name, e.criterion, e.claim);
                println!("{:<26} parameters: {}{field}", "", e.parameters.join(", "));
            }
            Ok(0)
        }
        Command::Plot { run_dir, kind } => {
            let path = emit_plot_data(&run_dir, kind.parse::<PlotKind>()?)?;
            println!("{}", path.display());
            Ok(0)
        }
        Command::Validate { config } => {
            validate(&ExperimentConfig::load(&config)?)?;
            println!("ok");
            Ok(0)
        }
    }
}

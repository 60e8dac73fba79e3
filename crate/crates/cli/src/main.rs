use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod output;

use commands::Options;
use config::ScenarioConfig;
use error::CliError;

/// Simulate unbiased extremum seeking through delay and diffusion actuators.
#[derive(Debug, Parser)]
#[command(name = "ues", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Scenario file (`key = value` lines); benchmark defaults when omitted.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override one config key; may be repeated.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Directory for relative output paths.
    #[arg(long, value_name = "PATH", default_value = ".")]
    out_dir: PathBuf,
    /// Omit wall-clock runtime from summaries so outputs are byte-reproducible.
    #[arg(long)]
    canonical: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the closed loop and write the trajectory CSV and a JSON summary.
    Run(Common),
    /// Check the convergence conditions; exits 0 only if all hold.
    Validate(Common),
    /// Write closed-form and integrated averaged-system trajectories.
    Oracle(Common),
    /// Repeat `run` over a list of values for one config key.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Config key to vary, e.g. `dither.omega`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 0..)]
        values: Vec<String>,
    },
}

fn load(common: &Common) -> Result<(ScenarioConfig, Options), CliError> {
    let mut config = match &common.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
            ScenarioConfig::parse(&text)?
        }
        None => ScenarioConfig::default(),
    };
    for assignment in &common.overrides {
        config.apply_override(assignment)?;
    }
    Ok((config, Options { out_dir: common.out_dir.clone(), canonical: common.canonical }))
}

fn dispatch(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Run(common) => {
            let (config, opts) = load(&common)?;
            commands::cmd_run(&config, &opts)?;
        }
        Command::Validate(common) => {
            let (config, _) = load(&common)?;
            if !commands::cmd_validate(&config) {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Oracle(common) => {
            let (config, opts) = load(&common)?;
            commands::cmd_oracle(&config, &opts)?;
        }
        Command::Sweep { common, param, values } => {
            let (config, opts) = load(&common)?;
            let values: Vec<String> = values.into_iter().map(|v| v.trim().to_string()).filter(|v| !v.is_empty()).collect();
            let summary = commands::cmd_sweep(&config, &param, &values, &opts)?;
            if summary.rows.iter().any(|r| r.status != "ok") {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

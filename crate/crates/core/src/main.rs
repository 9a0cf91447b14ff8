use std::fs;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use pbs_entangle::cli::{self, CliError, Command, ConfigError, ExperimentConfig, OutputFormat};

#[derive(Parser)]
#[command(
    name = "pbs-entangle",
    version,
    about = "Simulate the two-source PBS entangler, Bell tests and QKD sessions"
)]
struct Args {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Compare the network output with the closed-form target states.
    Derive(Common),
    /// Evaluate CHSH on the post-selected two-photon branch.
    Bell(Common),
    /// Run key distribution sessions.
    Qkd(Common),
    /// Photon-number distribution of one output arm.
    Dist(Common),
}

#[derive(clap::Args)]
struct Common {
    /// TOML config file.
    #[arg(long)]
    config: PathBuf,
    /// Override a config key, e.g. `--set r=0.5`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Result file; stdout when omitted here and in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_name = "records|csv")]
    format: Option<String>,
}

fn load(command: Command, common: &Common) -> Result<ExperimentConfig, CliError> {
    let text = fs::read_to_string(&common.config)
        .map_err(|e| ConfigError(format!("cannot read {}: {e}", common.config.display())))?;
    let overrides = common
        .overrides
        .iter()
        .map(|s| cli::parse_override(s))
        .collect::<Result<Vec<_>, _>>()?;
    let mut config = ExperimentConfig::load(&text, &overrides)?;
    config.command = Some(command);
    if let Some(out) = &common.out {
        config.out = Some(out.clone());
    }
    if let Some(format) = &common.format {
        config.format = Some(format.parse::<OutputFormat>()?);
    }
    Ok(config)
}

fn execute(command: Command, common: &Common) -> Result<(), CliError> {
    let config = load(command, common)?;
    let record = cli::run(command, &config)?;
    let body = record.render(config.format.unwrap_or_default());
    match &config.out {
        Some(path) => cli::write_atomically(path, &body).map_err(|e| {
            CliError::Runtime(pbs_entangle::Error::InvalidParameter(format!(
                "cannot write {}: {e}",
                path.display()
            )))
        }),
        None => std::io::stdout()
            .write_all(body.as_bytes())
            .map_err(|e| CliError::Runtime(pbs_entangle::Error::InvalidParameter(e.to_string()))),
    }
}

fn main() -> ExitCode {
    let args = Args::parse();
    let (command, common) = match &args.command {
        Sub::Derive(c) => (Command::Derive, c),
        Sub::Bell(c) => (Command::Bell, c),
        Sub::Qkd(c) => (Command::Qkd, c),
        Sub::Dist(c) => (Command::Dist, c),
    };
    match execute(command, common) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pbs-entangle {}: {e}", command.name());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

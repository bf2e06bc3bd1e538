mod args;
mod commands;
mod format;

use std::ffi::OsString;
use std::io::Write;
use std::path::Path;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{CommandFactory, FromArgMatches};
use mmc_core::control::ControlError;
use mmc_core::kinematics::KinematicsError;
use mmc_core::model::ModelError;
use mmc_core::servo::ServoError;
use thiserror::Error;

use args::Cli;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Model(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<KinematicsError> for CliError {
    fn from(e: KinematicsError) -> Self {
        match e {
            KinematicsError::Singular { .. } => {
                CliError::Numerical(format!("{e}; the manipulability Jacobian is undefined at this configuration"))
            }
            KinematicsError::DimensionMismatch { .. } | KinematicsError::NonFinite(_) => CliError::Usage(e.to_string()),
        }
    }
}

impl From<ControlError> for CliError {
    fn from(e: ControlError) -> Self {
        match e {
            ControlError::Kinematics(k) => k.into(),
            ControlError::InvalidConfig(_) | ControlError::VelocityLimitLength { .. } => CliError::Usage(e.to_string()),
            ControlError::Qp(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<ServoError> for CliError {
    fn from(e: ServoError) -> Self {
        match e {
            ServoError::Kinematics(k) => k.into(),
            ServoError::Control(c) => c.into(),
            ServoError::InvalidConfig(_) | ServoError::StartLength { .. } => CliError::Usage(e.to_string()),
            ServoError::EmptyInterval { .. } => CliError::Model(ModelError::Invalid(e.to_string())),
            ServoError::SamplingExhausted { .. } => CliError::Numerical(e.to_string()),
            ServoError::Io(_) | ServoError::Csv(_) | ServoError::Json(_) => CliError::Io(e.to_string()),
        }
    }
}

/// The `--config` path, looked up before clap runs so that the file can seed the environment.
fn config_path(args: &[OsString]) -> Option<OsString> {
    let mut it = args.iter().skip(1);
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--" {
            break;
        }
        if s == "--config" {
            return it.next().cloned();
        }
        if let Some(v) = s.strip_prefix("--config=") {
            return Some(v.into());
        }
    }
    std::env::var_os("MMC_CONFIG")
}

/// Export every `key = value` line of `path` as `MMC_KEY` unless that variable is already set.
fn load_config(path: &Path) -> Result<(), CliError> {
    let text =
        std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{} line {}: expected key = value", path.display(), i + 1)))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(CliError::Usage(format!("{} line {}: invalid key '{key}'", path.display(), i + 1)));
        }
        let var = format!("MMC_{}", key.to_ascii_uppercase().replace('-', "_"));
        if std::env::var_os(&var).is_none() {
            std::env::set_var(var, value.trim().trim_matches('"'));
        }
    }
    Ok(())
}

fn run(args: Vec<OsString>) -> Result<String, CliError> {
    if let Some(path) = config_path(&args) {
        load_config(Path::new(&path))?;
    }
    let matches = match Cli::command().try_get_matches_from(&args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => Ok(String::new()),
                _ => Err(CliError::Usage(String::new())),
            };
        }
    };
    let cli = Cli::from_arg_matches(&matches).map_err(|e| CliError::Usage(e.to_string()))?;
    let (_, sub) = matches.subcommand().expect("subcommand is required");
    commands::dispatch(cli.command, sub)
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(text) => {
            // a closed pipe (`mmc ... | head`) is not an error
            match std::io::stdout().write_all(text.as_bytes()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => {
                    eprintln!("error: {e}");
                    ExitCode::from(2)
                }
                _ => ExitCode::SUCCESS,
            }
        }
        Err(e) => {
            let msg = e.to_string();
            if !msg.is_empty() {
                eprintln!("error: {msg}");
            }
            ExitCode::from(e.exit_code())
        }
    }
}

//! `tagprint` — simulate nonlinear RF tags, fingerprint them from two-tone
//! spectra, and run the classification study from the command line.
//!
//! Subcommands: `simulate` (scenario datasets), `study` (training/evaluation
//! grid), `spectrum` (averaged spectra and peak tables), `constellation`
//! (envelope-distorted 16-QAM), `pca` (scenario projections). Every command
//! writes plot-ready CSV plus a `manifest.json` keyed by the SHA-256 of the
//! canonical config, and reruns are byte-identical.
//!
//! Exit codes: 0 success, 1 validation failure, 2 runtime failure. Errors are
//! single lines on standard error of the form `error: validation: ...` or
//! `error: runtime: ...`.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use tagprint_core::dataset::Scenario;
use tagprint_core::ml::Algorithm;

mod commands;
mod config;
mod output;

use config::{Overrides, RunConfig};

/// Failure category deciding the exit code.
#[derive(Debug)]
pub enum CliError {
    /// Bad configuration or arguments; exit code 1.
    Validation(String),
    /// Failure while executing a valid request; exit code 2.
    Runtime(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(msg) => write!(f, "validation: {msg}"),
            CliError::Runtime(msg) => write!(f, "runtime: {msg}"),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser)]
#[command(
    name = "tagprint",
    version,
    about = "Nonlinear RF tag fingerprinting: simulation, spectra, and classification study"
)]
struct Cli {
    /// TOML configuration file; defaults apply for every omitted field.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory (default: the config's out_dir, "out").
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Master seed override.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Scenario selection (static, small, large); applies to simulate and pca.
    #[arg(long, global = true, value_name = "NAME")]
    scenario: Option<Scenario>,

    /// Comma-separated classifier list; applies to study.
    #[arg(long, global = true, value_name = "LIST")]
    classifiers: Option<String>,

    /// Receiver SNR override in dB.
    #[arg(long = "snr-db", global = true, value_name = "X")]
    snr_db: Option<f64>,

    /// Device perturbation fraction override.
    #[arg(long = "perturb-frac", global = true, value_name = "X")]
    perturb_frac: Option<f64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Generate feature datasets for the configured scenarios.
    Simulate,
    /// Run the full training and evaluation grid and write reports.
    Study,
    /// Write averaged spectra, peak tables, and the device difference series.
    Spectrum,
    /// Write ideal and envelope-distorted 16-QAM constellations.
    Constellation,
    /// Project one scenario's features onto principal components.
    Pca,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Study => "study",
            Command::Spectrum => "spectrum",
            Command::Constellation => "constellation",
            Command::Pca => "pca",
        }
    }
}

/// Parses the `--classifiers` comma list.
fn parse_classifiers(list: &str) -> Result<Vec<Algorithm>, CliError> {
    let mut out = Vec::new();
    for name in list.split(',') {
        let name = name.trim();
        if name.is_empty() {
            return Err(CliError::Validation(
                "empty entry in --classifiers list".into(),
            ));
        }
        out.push(
            name.parse::<Algorithm>()
                .map_err(CliError::Validation)?,
        );
    }
    Ok(out)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if cli.scenario.is_some()
        && !matches!(cli.command, Command::Simulate | Command::Pca)
    {
        return Err(CliError::Validation(format!(
            "--scenario does not apply to the {} command",
            cli.command.name()
        )));
    }
    if cli.classifiers.is_some() && cli.command != Command::Study {
        return Err(CliError::Validation(format!(
            "--classifiers does not apply to the {} command",
            cli.command.name()
        )));
    }

    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let classifiers = cli
        .classifiers
        .as_deref()
        .map(parse_classifiers)
        .transpose()?;
    cfg.apply(&Overrides {
        out: cli.out.clone(),
        seed: cli.seed,
        scenario: cli.scenario,
        classifiers,
        snr_db: cli.snr_db,
        perturb_frac: cli.perturb_frac,
    });
    cfg.validate()?;

    match cli.command {
        Command::Simulate => commands::cmd_simulate(&cfg),
        Command::Study => commands::cmd_study(&cfg),
        Command::Spectrum => commands::cmd_spectrum(&cfg),
        Command::Constellation => commands::cmd_constellation(&cfg),
        Command::Pca => {
            let scenario = cli.scenario.unwrap_or(cfg.scenarios[0]);
            commands::cmd_pca(&cfg, scenario)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => {
                    eprintln!("error: validation: invalid command line");
                    ExitCode::from(1)
                }
            };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ CliError::Validation(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(e @ CliError::Runtime(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

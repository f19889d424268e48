//! `dmfc`: data generation, model building, sampling, conditioning, fitting
//! and evaluation from the command line.
//!
//! Every command prints one JSON line on stdout. Failures print
//! `{"error": kind, "message": ...}` on stderr and exit with 2 (usage),
//! 3 (data) or 4 (numerical failure).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand};
use serde_json::{json, Value};

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "DMFC_DATA_DIR";

#[derive(Parser, Debug)]
#[command(name = "dmfc", version, about = "Dynamic multi feature-class Gaussian process models")]
struct Cli {
    /// JSON file with per-subcommand flag values; command-line flags win.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Generate a lollipop-joint dataset (meshes, volumes, ground truth).
    GenData(commands::GenDataArgs),
    /// Build a model from a dataset directory.
    Build(commands::BuildArgs),
    /// Write a model instance for given or random coefficients.
    Sample(commands::SampleArgs),
    /// Marginalise a model to objects or feature classes.
    Marginalize(commands::MarginalizeArgs),
    /// Condition a model on point observations.
    Posterior(commands::PosteriorArgs),
    /// Build a pose-permutation model from a dataset directory.
    Permute(commands::PermuteArgs),
    /// Fit a model to a volume or surface observation.
    Fit(commands::FitArgs),
    /// Correlation table of model samples (and of the training data).
    EvalCorrelations(commands::EvalCorrelationsArgs),
    /// Specificity and generality against volume datasets.
    EvalSpecgen(commands::EvalSpecgenArgs),
    /// Orthographic line-integral projection of a volume.
    ProjectDrr(commands::ProjectDrrArgs),
}

/// Failure kinds and their exit codes.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Numerical(_) => 4,
        }
    }

    fn to_json(&self) -> Value {
        let (kind, msg) = match self {
            CliError::Usage(m) => ("usage", m),
            CliError::Data(m) => ("data", m),
            CliError::Numerical(m) => ("numerical", m),
        };
        json!({ "error": kind, "message": msg })
    }
}

impl From<dmfc_core::Error> for CliError {
    fn from(e: dmfc_core::Error) -> Self {
        let msg = e.to_string();
        if e.is_numerical() {
            CliError::Numerical(msg)
        } else if matches!(e, dmfc_core::Error::InvalidArgument(_)) {
            CliError::Usage(msg)
        } else {
            CliError::Data(msg)
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

fn subcommand_names() -> Vec<String> {
    Cli::command()
        .get_subcommands()
        .map(|c| c.get_name().to_string())
        .collect()
}

fn fail(e: CliError) -> ExitCode {
    eprintln!("{}", e.to_json());
    ExitCode::from(e.code())
}

fn main() -> ExitCode {
    let mut args: Vec<String> = std::env::args().collect();
    if let Some(path) = config::config_path(&args) {
        let names = subcommand_names();
        let names: Vec<&str> = names.iter().map(String::as_str).collect();
        match config::merge(args, &PathBuf::from(path), &names) {
            Ok(a) => args = a,
            Err(m) => return fail(CliError::Usage(m)),
        }
    }
    let cli = match Cli::try_parse_from(&args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return ExitCode::SUCCESS;
            }
            return fail(CliError::Usage(e.render().to_string().trim().to_string()));
        }
    };
    let result = match cli.command {
        Command::GenData(a) => commands::gen_data(a),
        Command::Build(a) => commands::build(a),
        Command::Sample(a) => commands::sample(a),
        Command::Marginalize(a) => commands::marginalize(a),
        Command::Posterior(a) => commands::posterior(a),
        Command::Permute(a) => commands::permute(a),
        Command::Fit(a) => commands::fit(a),
        Command::EvalCorrelations(a) => commands::eval_correlations(a),
        Command::EvalSpecgen(a) => commands::eval_specgen(a),
        Command::ProjectDrr(a) => commands::project_drr(a),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e),
    }
}

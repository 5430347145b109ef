//! Experiment harness around the `pvbqc` simulator.
//!
//! Each subcommand writes one record per trial, ordered by trial index, as
//! JSON lines (canonical) or CSV (a flat projection of the same values).
//! Every trial record carries the master seed and its trial seed.

pub mod commands;
pub mod config;

use std::fmt;
use std::io::Write;

use clap::{Parser, Subcommand};

pub use commands::run;
pub use config::{ExperimentArgs, ExperimentConfig, GraphSpec, OutputFormat};

pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_INFEASIBLE: u8 = 3;
pub const EXIT_INTERNAL: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CliError {
    pub code: u8,
    pub message: String,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_CONFIG,
            message: message.into(),
        }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INTERNAL,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for CliError {}

impl From<pvbqc::Error> for CliError {
    fn from(e: pvbqc::Error) -> Self {
        use pvbqc::Error as E;
        let code = match e {
            E::TooSmallN(_)
            | E::Infeasible(_)
            | E::LambdaOutOfRange { .. }
            | E::ThresholdExceeded { .. }
            | E::TooLarge { .. } => EXIT_INFEASIBLE,
            E::NotTwoColorable { .. }
            | E::InvalidEdge(..)
            | E::InvalidVertex { .. }
            | E::InvalidParams(_)
            | E::InvalidConfig(_)
            | E::OddBatch(_)
            | E::ThresholdOutOfRange { .. } => EXIT_CONFIG,
            E::DomainMismatch
            | E::PositionMismatch
            | E::WrongBatchSize { .. }
            | E::NoDispute
            | E::QubitMismatch { .. } => EXIT_INTERNAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::internal(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::internal(format!("csv: {e}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::internal(format!("json: {e}"))
    }
}

#[derive(Debug, Parser)]
#[command(name = "pvbqc", version, about = "Publicly verifiable blind quantum computation simulator")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the verification test on freshly prepared 2K-register batches.
    Verify(ExperimentArgs),
    /// Run the full three-party protocol.
    Protocol(ExperimentArgs),
    /// Acceptance statistics along one parameter axis.
    Sweep(commands::SweepArgs),
    /// Concentration bounds, certificates, plans and cost comparison.
    Bounds(commands::BoundsArgs),
    /// Re-run protocol transcripts and check they are reproduced exactly.
    Replay(commands::ReplayArgs),
}

/// Parse `args` and run, writing records to `out` and summaries of CSV runs
/// to `err`.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> Result<(), CliError>
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = Cli::try_parse_from(args).map_err(|e| CliError::config(e.to_string()))?;
    run(cli.command, out, err)
}

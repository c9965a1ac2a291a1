use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;
mod output;
mod report;
mod schema;

use error::CliError;
use schema::{Overrides, SchemaMode};

/// Simulate and analyze networks of grid-forming converters.
#[derive(Debug, Parser)]
#[command(name = "gridform", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Integrate a scenario; writes the trajectory CSV and metrics JSON.
    Simulate(CommonArgs),
    /// Run one scenario under several controller families mapped from one set of equivalent parameters.
    Compare(CompareArgs),
    /// Modes, damping and steady-state prediction for an identically tuned network.
    Analyze(CommonArgs),
    /// Vary one controller parameter and tabulate modes and transient metrics.
    Sweep(SweepArgs),
    /// Check a scenario file, or a report produced by this tool.
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SchemaArgs {
    /// Reject unknown keys (default).
    #[arg(long, conflicts_with = "lenient")]
    strict: bool,
    /// Warn about unknown keys instead of rejecting them.
    #[arg(long)]
    lenient: bool,
}

impl SchemaArgs {
    pub fn mode(&self) -> SchemaMode {
        if self.lenient {
            SchemaMode::Lenient
        } else {
            SchemaMode::Strict
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario JSON file.
    pub scenario: PathBuf,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long = "t-end")]
    pub t_end: Option<f64>,
    #[arg(long)]
    pub decimate: Option<usize>,
    /// dc-linear, ac-standard or ac-literal.
    #[arg(long = "flow-model")]
    pub flow_model: Option<String>,
    /// Directory for output files.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

impl CommonArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            dt: self.dt,
            t_end: self.t_end,
            decimate: self.decimate,
            flow_model: self.flow_model.clone(),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Comma-separated `family[:form]` list, e.g. `vsm,droop,matching:full`; form defaults to reduced.
    #[arg(long, value_delimiter = ',')]
    pub families: Option<Vec<String>>,
    /// Pass threshold for the max componentwise deviation.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// d, m, K_theta, K_dc, R_p or tau_f.
    #[arg(long)]
    pub param: Option<String>,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true, conflicts_with = "range")]
    pub values: Option<Vec<f64>>,
    /// `start:stop:count`, evenly spaced and inclusive.
    #[arg(long)]
    pub range: Option<String>,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    /// Scenario or report JSON file.
    pub file: PathBuf,
    #[command(flatten)]
    pub schema: SchemaArgs,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate(a) => commands::simulate::run(&a),
        Command::Compare(a) => commands::compare::run(&a),
        Command::Analyze(a) => commands::analyze::run(&a),
        Command::Sweep(a) => commands::sweep::run(&a),
        Command::Validate(a) => commands::validate::run(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

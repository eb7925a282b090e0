mod commands;
mod input;
mod report;

use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] gqf_core::Error),
    #[error("{0}")]
    Input(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    #[error("json output: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use gqf_core::Error as E;
        match self {
            CliError::Core(E::InvalidInput(_) | E::Validation { .. } | E::UnsupportedPrime(_)) => 2,
            CliError::Core(E::Budget { .. } | E::SearchBound { .. }) => 3,
            CliError::Core(E::Numerical(_)) => 4,
            CliError::Input(_) | CliError::Io { .. } => 2,
            CliError::Csv(_) | CliError::Json(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "gqf", version, about = "Generalised quadratic forms: descent, exponential sums, densities and counts")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Json,
    Csv,
}

/// Flags shared by every subcommand.
#[derive(Args, Clone, Debug, Serialize)]
pub struct Common {
    /// Builtin field ("Qsqrt:D", "cubic7") or a JSON field description.
    #[arg(long, default_value = "Qsqrt:2")]
    pub field: String,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Work cap; each module applies it to its own cost estimate.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Caps the worker pool.
    #[arg(long)]
    #[serde(skip)]
    pub threads: Option<usize>,
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<String>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Subcommand)]
enum Command {
    /// Descend a GQF to its system of rational quadratic forms.
    Descend(commands::DescendArgs),
    /// Lift a descended system back to a GQF.
    Lift(commands::LiftArgs),
    /// Count lattice points in the weighted box.
    Count(commands::CountArgs),
    /// Count and compare with the predicted main term.
    Compare(commands::CountArgs),
    /// Singular series, singular integral and the predicted count.
    Predict(commands::PredictArgs),
    /// Complete exponential sums for one ideal or a norm sweep.
    Expsum(commands::ExpsumArgs),
    /// Primitive additive characters.
    Char(commands::CharArgs),
    /// Non-degeneracy and pencil conditions for Q(X) + R(X^τ).
    CheckAssumptions(commands::AssumptionArgs),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Descend(a) => &a.common,
            Command::Lift(a) => &a.common,
            Command::Count(a) | Command::Compare(a) => &a.common,
            Command::Predict(a) => &a.common,
            Command::Expsum(a) => &a.common,
            Command::Char(a) => &a.common,
            Command::CheckAssumptions(a) => &a.common,
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(t) = cli.cmd.common().threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build_global()
            .map_err(|e| CliError::Input(format!("--threads: {e}")))?;
    }
    match cli.cmd {
        Command::Descend(a) => commands::descend(&a),
        Command::Lift(a) => commands::lift(&a),
        Command::Count(a) => commands::count(&a, false),
        Command::Compare(a) => commands::count(&a, true),
        Command::Predict(a) => commands::predict(&a),
        Command::Expsum(a) => commands::expsum(&a),
        Command::Char(a) => commands::character(&a),
        Command::CheckAssumptions(a) => commands::check_assumptions(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

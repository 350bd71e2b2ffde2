//! Error classification for the command-line tools.
//!
//! Every failure is assigned one of a small set of classes, each with its
//! own process exit code, and is reported on stderr as a single-line JSON
//! record so scripts can dispatch on failures without parsing prose.

use psr_core::CoreError;
use psr_planner::PlannerError;

/// A classified command-line failure.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, bad config file contents, or inconsistent options.
    #[error("configuration error: {0}")]
    Config(String),
    /// A referenced file is missing or unreadable, or an output could not
    /// be written.
    #[error("i/o error: {0}")]
    Io(String),
    /// A data or checkpoint file exists but its contents are malformed.
    #[error("malformed file: {0}")]
    Data(String),
    /// Inputs have incompatible shapes (e.g. checkpoint vs. dataset dims).
    #[error("shape mismatch: {0}")]
    Shape(String),
    /// The contraction condition fails (`rho >= 1`), so no ultimate bound
    /// exists.
    #[error("no bound: contraction factor rho = {rho} >= 1")]
    NoBound { rho: f64 },
    /// A numerical precondition failed (non-finite values, divergence,
    /// out-of-range parameters, or not enough data).
    #[error("numerical error: {0}")]
    Numeric(String),
    /// A requested check or search ran but did not succeed (empirical
    /// verification failed, or every planner sample was non-finite).
    #[error("infeasible: {0}")]
    Infeasible(String),
}

impl CliError {
    /// Short machine-readable class name.
    pub fn class(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Io(_) => "io",
            CliError::Data(_) => "data",
            CliError::Shape(_) => "shape",
            CliError::NoBound { .. } => "no-bound",
            CliError::Numeric(_) => "numeric",
            CliError::Infeasible(_) => "infeasible",
        }
    }

    /// Process exit code for this class (success is 0; clap uses 2 for
    /// usage errors, which we share with config problems).
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Data(_) => 4,
            CliError::Shape(_) => 5,
            CliError::NoBound { .. } => 6,
            CliError::Numeric(_) => 7,
            CliError::Infeasible(_) => 8,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Io { .. } => CliError::Io(e.to_string()),
            CoreError::MalformedFile { .. } => CliError::Data(e.to_string()),
            CoreError::DimensionMismatch { .. } => CliError::Shape(e.to_string()),
            CoreError::NoBound { rho } => CliError::NoBound { rho },
            CoreError::NonFinite(_)
            | CoreError::Diverged { .. }
            | CoreError::OutOfRange { .. }
            | CoreError::InsufficientData { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

impl From<PlannerError> for CliError {
    fn from(e: PlannerError) -> Self {
        match e {
            PlannerError::Core(c) => c.into(),
            PlannerError::Io(io) => CliError::Io(io.to_string()),
            PlannerError::MalformedScene(_) => CliError::Data(e.to_string()),
            PlannerError::InvalidScene(_)
            | PlannerError::UnknownPreset { .. }
            | PlannerError::MissingInput(_) => CliError::Config(e.to_string()),
            PlannerError::OutOfRange { .. } | PlannerError::NonFinite(_) => {
                CliError::Numeric(e.to_string())
            }
            PlannerError::InfeasibleSampling { .. } => CliError::Infeasible(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

/// Command-line result alias.
pub type Result<T> = std::result::Result<T, CliError>;

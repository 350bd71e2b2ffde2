//! Sampling-based goal-pose planner over predicted full-body motion.
//!
//! The planner optimizes velocity commands for a legged robot by sampling
//! perturbations of a low-dimensional Bezier parameterization, rolling each
//! candidate command sequence through a predictor (either the learned
//! latent-state model or a constant-velocity baseline), and scoring the
//! predicted trajectories against a voxelized environment and a goal pose.
//! The weighted-average update and first-command dispatch follow the
//! path-integral control scheme.
//!
//! Modules:
//! - [`voxel`]: sparse occupancy grid built from axis-aligned boxes.
//! - [`scene`]: serializable scene descriptions and named presets.
//! - [`bezier`]: curve evaluation and the warm-start reparameterization.
//! - [`cost`]: collision, goal-tracking, and control-effort costs.
//! - [`mppi`]: the sampling loop, softmax weighting, and nominal update.
//! - [`navigate`]: closed-loop episodes against the surrogate robot.

pub mod bezier;
pub mod cost;
pub mod mppi;
pub mod navigate;
pub mod scene;
pub mod voxel;

use thiserror::Error;

/// Errors raised by scene construction and planning.
#[derive(Debug, Error)]
pub enum PlannerError {
    /// A scene box or parameter was geometrically invalid.
    #[error("invalid scene geometry: {0}")]
    InvalidScene(String),

    /// The requested scene preset does not exist.
    #[error("unknown scene preset '{name}' (expected open, narrow_passage, or clutter)")]
    UnknownPreset { name: String },

    /// A configuration value was outside its valid range.
    #[error("{context}: value {value} outside valid range {range}")]
    OutOfRange {
        context: &'static str,
        value: f64,
        range: &'static str,
    },

    /// An input contained NaN or infinite entries.
    #[error("non-finite values encountered in {0}")]
    NonFinite(&'static str),

    /// Every sampled trajectory produced a non-finite cost.
    #[error("infeasible sampling: all {count} sampled trajectories have non-finite cost")]
    InfeasibleSampling { count: usize },

    /// A required model was not supplied for the chosen predictor.
    #[error("the learned predictor requires {0}")]
    MissingInput(&'static str),

    /// An error from the prediction or estimation core.
    #[error(transparent)]
    Core(#[from] psr_core::error::CoreError),

    /// A scene file could not be parsed.
    #[error("malformed scene file: {0}")]
    MalformedScene(String),

    /// Underlying IO failure.
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, PlannerError>;

pub use cost::GoalPose;
pub use mppi::{
    mppi_step, softmax_weights, CloudSource, MppiConfig, MppiDiagnostics, MppiState,
    PredictorChoice, RolloutSource,
};
pub use navigate::{
    nominal_stance, run_navigation, run_trial, summarize, NavigationConfig, NavigationSummary,
    NavigationTask, TrialResult,
};
pub use scene::SceneSpec;
pub use voxel::VoxelMap;

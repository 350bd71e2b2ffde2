//! Core library for proprioceptive full-body motion prediction on a
//! velocity-commanded quadruped.
//!
//! The pipeline has three stages:
//!
//! 1. An **observer** fuses a short history of proprioceptive measurements
//!    (roll, pitch, joint angles) with the commands that produced them into a
//!    latent state estimate, using a learned correction whose error dynamics
//!    are certified contractive ([`stability`]).
//! 2. A **predictor** rolls the latent state forward under a candidate
//!    command sequence and decodes the full-body configuration trajectory in
//!    a robocentric frame ([`predictor`]).
//! 3. A **training pipeline** fits both from logged trajectories while
//!    penalizing any violation of the contraction condition ([`training`]).
//!
//! Because no robot hardware is attached, a deterministic kinematic
//! surrogate ([`surrogate`]) generates the logs: it tracks planar velocity
//! commands with first-order lag, swings its legs with a speed-dependent
//! trot pattern, and reports noisy proprioceptive measurements.

pub mod baseline;
pub mod checkpoint;
pub mod dataset;
pub mod error;
pub mod model;
pub mod nn;
pub mod observer;
pub mod occupancy;
pub mod predictor;
pub mod sampling;
pub mod stability;
pub mod surrogate;
pub mod training;
pub mod types;

pub use error::{CoreError, Result};

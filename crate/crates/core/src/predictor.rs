//! Forward rollout of the latent state under candidate commands.
//!
//! During prediction no measurements exist, so the innovation-corrected
//! observer is replaced by a recurrent cell that was trained to mimic the
//! closed-loop latent flow:
//!
//! ```text
//!   x_t = f_gru(x_{t-1}, u_t),      z'_t = [C_u; C_y] x_t
//! ```
//!
//! Outputs are robocentric: position and yaw are relative to the pose at
//! which the rollout started.  `output[t]` is the configuration after
//! command `commands[t]` has acted for one control interval.
//!
//! [`batch_rollout`] evaluates many candidate command sequences; sequences
//! are mutually independent, and each one is summed in a fixed order, so
//! results are bitwise identical no matter how many worker threads run.

use nalgebra::DVector;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::model::ModelParams;
use crate::nn::{sigmoid, GruParams};
use crate::types::{Command, FullBodyConfig, RelativeConfig, JOINT_DIM, MEASUREMENT_DIM, POSE_DIM};

/// Scratch buffers for allocation-free recurrent steps.
///
/// One workspace per worker thread; reuse across steps keeps the hot loop of
/// large rollouts free of heap traffic.
#[derive(Debug, Clone)]
pub struct RolloutWorkspace {
    update: DVector<f64>,
    reset: DVector<f64>,
    hidden_side: DVector<f64>,
    candidate: DVector<f64>,
    next: DVector<f64>,
    pose_out: DVector<f64>,
    meas_out: DVector<f64>,
}

impl RolloutWorkspace {
    /// Buffers sized for a latent dimension.
    pub fn new(state_dim: usize) -> Self {
        Self {
            update: DVector::zeros(state_dim),
            reset: DVector::zeros(state_dim),
            hidden_side: DVector::zeros(state_dim),
            candidate: DVector::zeros(state_dim),
            next: DVector::zeros(state_dim),
            pose_out: DVector::zeros(POSE_DIM),
            meas_out: DVector::zeros(MEASUREMENT_DIM),
        }
    }
}

/// One recurrent step written with in-place GEMVs into the workspace;
/// numerically identical to [`GruParams::step`].
fn gru_step_into(gru: &GruParams, ws: &mut RolloutWorkspace, h: &mut DVector<f64>, u: Command) {
    let x = [u.vx, u.vy, u.wz];
    let xv = DVector::from_column_slice(&x);

    ws.update.copy_from(&gru.b_update);
    ws.update.gemv(1.0, &gru.w_update, &xv, 1.0);
    ws.update.gemv(1.0, &gru.u_update, h, 1.0);
    ws.update.apply(|v| *v = sigmoid(*v));

    ws.reset.copy_from(&gru.b_reset);
    ws.reset.gemv(1.0, &gru.w_reset, &xv, 1.0);
    ws.reset.gemv(1.0, &gru.u_reset, h, 1.0);
    ws.reset.apply(|v| *v = sigmoid(*v));

    ws.hidden_side.copy_from(&gru.b_cand_hidden);
    ws.hidden_side.gemv(1.0, &gru.u_cand, h, 1.0);

    ws.candidate.copy_from(&gru.b_cand_input);
    ws.candidate.gemv(1.0, &gru.w_cand, &xv, 1.0);
    for i in 0..h.len() {
        ws.candidate[i] = (ws.candidate[i] + ws.reset[i] * ws.hidden_side[i]).tanh();
        ws.next[i] = (1.0 - ws.update[i]) * ws.candidate[i] + ws.update[i] * h[i];
    }
    h.copy_from(&ws.next);
}

/// Decodes the robocentric configuration `[C_u x; C_y x]` from a latent
/// state.
pub fn decode_output(model: &ModelParams, x: &DVector<f64>) -> RelativeConfig {
    let pose = &model.predictor.c_u * x;
    let meas = &model.observer.c_y * x;
    assemble(&pose, &meas)
}

fn decode_into(model: &ModelParams, ws: &mut RolloutWorkspace, x: &DVector<f64>) -> RelativeConfig {
    ws.pose_out.gemv(1.0, &model.predictor.c_u, x, 0.0);
    ws.meas_out.gemv(1.0, &model.observer.c_y, x, 0.0);
    // Borrow juggling: assemble from copies of the small output buffers.
    let pose = ws.pose_out.clone_owned();
    let meas = ws.meas_out.clone_owned();
    assemble(&pose, &meas)
}

fn assemble(pose: &DVector<f64>, meas: &DVector<f64>) -> RelativeConfig {
    let mut cfg = FullBodyConfig::zeros();
    cfg.position.x = pose[0];
    cfg.position.y = pose[1];
    cfg.position.z = pose[2];
    cfg.yaw = pose[3];
    cfg.roll = meas[0];
    cfg.pitch = meas[1];
    cfg.joints.copy_from_slice(&meas.as_slice()[2..2 + JOINT_DIM]);
    RelativeConfig(cfg)
}

/// Rolls the latent state forward under a command sequence and decodes the
/// robocentric configuration at every step.
///
/// An empty command slice yields an empty trajectory.
pub fn predict(
    model: &ModelParams,
    x_start: &DVector<f64>,
    commands: &[Command],
) -> Result<Vec<RelativeConfig>> {
    let n = model.state_dim();
    if x_start.len() != n {
        return Err(CoreError::DimensionMismatch {
            context: "predict",
            expected: format!("latent state of length {n}"),
            found: format!("{}", x_start.len()),
        });
    }
    let mut ws = RolloutWorkspace::new(n);
    let mut h = x_start.clone();
    let mut out = Vec::with_capacity(commands.len());
    for u in commands {
        gru_step_into(&model.predictor.gru, &mut ws, &mut h, *u);
        out.push(decode_into(model, &mut ws, &h));
    }
    Ok(out)
}

/// Evaluates many candidate command sequences from shared or per-sequence
/// start states.
///
/// `starts` must contain either one state (broadcast to every sequence, the
/// planner case) or exactly one state per sequence.  Work is distributed
/// over available threads; the result order matches the input order and the
/// values are bitwise independent of the thread count.
pub fn batch_rollout(
    model: &ModelParams,
    starts: &[DVector<f64>],
    sequences: &[Vec<Command>],
) -> Result<Vec<Vec<RelativeConfig>>> {
    if starts.is_empty() {
        return Err(CoreError::InsufficientData {
            context: "batch_rollout starts",
            need: 1,
            have: 0,
        });
    }
    if starts.len() != 1 && starts.len() != sequences.len() {
        return Err(CoreError::DimensionMismatch {
            context: "batch_rollout",
            expected: format!("1 or {} start states", sequences.len()),
            found: format!("{}", starts.len()),
        });
    }
    sequences
        .par_iter()
        .enumerate()
        .map(|(i, seq)| {
            let x0 = if starts.len() == 1 { &starts[0] } else { &starts[i] };
            predict(model, x0, seq)
        })
        .collect()
}

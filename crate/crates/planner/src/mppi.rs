//! Path-integral command optimization over Bezier control points.
//!
//! One planning cycle samples `N` Gaussian perturbations of the nominal
//! control points, discretizes each into a clamped command sequence, rolls
//! every sequence through the chosen predictor, scores the predicted global
//! trajectories, and replaces the nominal control points with the
//! softmax-weighted average of the samples.  The first command of the
//! sequence generated from the updated nominal is dispatched.
//!
//! Two rollout sources share the loop: the learned latent-state predictor
//! (full-body prediction, per-step occupancy from the learned cloud model)
//! and a constant-velocity unicycle baseline (planar integration, static
//! nominal-stance cloud).

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use psr_core::baseline::cv_rollout;
use psr_core::dataset::global_project;
use psr_core::error::CoreError;
use psr_core::model::ModelParams;
use psr_core::occupancy::{
    fk_occupancy, BodyGeometry, OccupancyModel, OccupancySampling, OccupancySet,
};
use psr_core::predictor::batch_rollout;
use psr_core::sampling::standard_normal;
use psr_core::types::{Command, Frame, FullBodyConfig, PlanarPose, JOINT_DIM};

use crate::bezier::{command_sequence, time_shift};
use crate::cost::{control_cost, count_cloud_hits, count_flat_hits, goal_cost, GoalPose};
use crate::voxel::VoxelMap;
use crate::{PlannerError, Result};

/// Constants of the sampling planner.
///
/// Defaults: 1000 samples over a 200-step (4 s at 50 Hz) horizon, unit
/// temperature, per-coordinate sampling std 0.1 (translation) / 0.15
/// (rotation), cubic curves, weights 500 / 10 / 0.01 for collision / goal /
/// control, yaw-blend switch at 0.5 m with 0.5 m sharpness, and the
/// command box `[-0.5, 0.5]^3`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MppiConfig {
    /// Number of sampled trajectories per cycle.
    pub samples: usize,
    /// Prediction horizon in control steps.
    pub horizon: usize,
    /// Control interval \[s\].
    pub dt: f64,
    /// Softmax temperature; lower concentrates on the best sample.
    pub temperature: f64,
    /// Sampling std for the translational control-point coordinates.
    pub sigma_translation: f64,
    /// Sampling std for the rotational control-point coordinate.
    pub sigma_rotation: f64,
    /// Bezier degree; `degree + 1` control points.
    pub degree: usize,
    /// Weight of the collision cost.
    pub w_collision: f64,
    /// Weight of the goal-tracking cost.
    pub w_goal: f64,
    /// Weight of the control-effort cost.
    pub w_control: f64,
    /// Distance at which the yaw penalty switches objectives \[m\].
    pub d_switch: f64,
    /// Sharpness of the yaw-penalty switch \[m\].
    pub s_switch: f64,
    /// Half-width of the command box clamp.
    pub command_limit: f64,
    /// Collision is evaluated every this many steps along a rollout (1 =
    /// every step).
    pub collision_stride: usize,
}

impl Default for MppiConfig {
    fn default() -> Self {
        MppiConfig {
            samples: 1000,
            horizon: 200,
            dt: 0.02,
            temperature: 1.0,
            sigma_translation: 0.1,
            sigma_rotation: 0.15,
            degree: 3,
            w_collision: 500.0,
            w_goal: 10.0,
            w_control: 0.01,
            d_switch: 0.5,
            s_switch: 0.5,
            command_limit: 0.5,
            collision_stride: 1,
        }
    }
}

impl MppiConfig {
    /// Checks every field against its documented range.
    pub fn validate(&self) -> Result<()> {
        let positive: [(&'static str, f64); 6] = [
            ("MppiConfig dt", self.dt),
            ("MppiConfig temperature", self.temperature),
            ("MppiConfig sigma_translation", self.sigma_translation),
            ("MppiConfig sigma_rotation", self.sigma_rotation),
            ("MppiConfig s_switch", self.s_switch),
            ("MppiConfig command_limit", self.command_limit),
        ];
        for (context, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(PlannerError::OutOfRange {
                    context,
                    value,
                    range: "(0, inf)",
                });
            }
        }
        let nonnegative: [(&'static str, f64); 4] = [
            ("MppiConfig w_collision", self.w_collision),
            ("MppiConfig w_goal", self.w_goal),
            ("MppiConfig w_control", self.w_control),
            ("MppiConfig d_switch", self.d_switch),
        ];
        for (context, value) in nonnegative {
            if !(value.is_finite() && value >= 0.0) {
                return Err(PlannerError::OutOfRange {
                    context,
                    value,
                    range: "[0, inf)",
                });
            }
        }
        if self.samples == 0 {
            return Err(PlannerError::OutOfRange {
                context: "MppiConfig samples",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if self.horizon == 0 {
            return Err(PlannerError::OutOfRange {
                context: "MppiConfig horizon",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if self.degree == 0 {
            return Err(PlannerError::OutOfRange {
                context: "MppiConfig degree",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        if self.collision_stride == 0 {
            return Err(PlannerError::OutOfRange {
                context: "MppiConfig collision_stride",
                value: 0.0,
                range: "[1, inf)",
            });
        }
        Ok(())
    }
}

/// Which predictor drives the rollouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictorChoice {
    /// Learned latent-state predictor with full-body outputs.
    Learned,
    /// Constant-velocity unicycle baseline with a static body model.
    ConstantVelocity,
}

impl std::str::FromStr for PredictorChoice {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "learned" => Ok(PredictorChoice::Learned),
            "cv" => Ok(PredictorChoice::ConstantVelocity),
            other => Err(format!("unknown predictor '{other}' (expected learned or cv)")),
        }
    }
}

impl std::fmt::Display for PredictorChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PredictorChoice::Learned => write!(f, "learned"),
            PredictorChoice::ConstantVelocity => write!(f, "cv"),
        }
    }
}

/// How learned rollouts turn predicted joint angles into collision clouds.
#[derive(Clone, Copy)]
pub enum CloudSource<'a> {
    /// Learned occupancy network, evaluated in one batched pass.
    Model(&'a OccupancyModel),
    /// Exact forward-kinematics sampling (slower; for validation runs).
    Oracle {
        geometry: &'a BodyGeometry,
        sampling: &'a OccupancySampling,
    },
}

/// The model backing one planning cycle's rollouts.
pub enum RolloutSource<'a> {
    /// Learned predictor from the current latent state; collision clouds
    /// come from the chosen cloud source at the predicted joints.
    Learned {
        model: &'a ModelParams,
        latent: &'a DVector<f64>,
        clouds: CloudSource<'a>,
    },
    /// Unicycle integration from the current pose; collision uses a fixed
    /// nominal-stance cloud.
    ConstantVelocity { body: &'a OccupancySet },
}

/// Nominal control points carried between planning cycles.
#[derive(Debug, Clone)]
pub struct MppiState {
    /// `degree + 1` control points in command space.
    pub nominal: Vec<Vector3<f64>>,
}

impl MppiState {
    /// A zero-command nominal (the robot initially plans from rest).
    pub fn new(cfg: &MppiConfig) -> Self {
        MppiState {
            nominal: vec![Vector3::zeros(); cfg.degree + 1],
        }
    }

    /// Warm-starts the next cycle after `steps` of the horizon were
    /// executed: reparameterizes the nominal curve onto the remaining tail.
    pub fn advance(&mut self, steps: usize, horizon: usize) -> Result<()> {
        let denom = horizon.saturating_sub(1).max(1) as f64;
        let delta = (steps as f64 / denom).min(1.0);
        self.nominal = time_shift(&self.nominal, delta)?;
        Ok(())
    }
}

/// Per-cycle planner telemetry.
#[derive(Debug, Clone)]
pub struct MppiDiagnostics {
    /// Cost of every sampled trajectory.
    pub costs: Vec<f64>,
    /// Smallest sampled cost.
    pub min_cost: f64,
    /// Mean over the finite costs.
    pub mean_finite_cost: f64,
    /// Largest softmax weight.
    pub max_weight: f64,
    /// Effective sample size `1 / sum(w^2)`.
    pub effective_samples: f64,
    /// Number of finite-cost samples.
    pub finite_count: usize,
}

/// Softmax weights `w_i ∝ exp(-(J_i - J_min) / temperature)`.
///
/// The minimum finite cost is subtracted before exponentiation, which makes
/// the weights exactly invariant under a common offset of all costs and
/// keeps the largest exponent at zero.  Non-finite costs get weight zero;
/// if no cost is finite the sampling was infeasible.
pub fn softmax_weights(costs: &[f64], temperature: f64) -> Result<Vec<f64>> {
    if !(temperature.is_finite() && temperature > 0.0) {
        return Err(PlannerError::OutOfRange {
            context: "softmax_weights temperature",
            value: temperature,
            range: "(0, inf)",
        });
    }
    let min = costs
        .iter()
        .copied()
        .filter(|c| c.is_finite())
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return Err(PlannerError::InfeasibleSampling { count: costs.len() });
    }
    let mut weights: Vec<f64> = costs
        .iter()
        .map(|&c| {
            if c.is_finite() {
                (-(c - min) / temperature).exp()
            } else {
                0.0
            }
        })
        .collect();
    // The argmin has weight 1, so the sum is at least 1.
    let sum: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= sum;
    }
    Ok(weights)
}

/// Scores every command sequence under the rollout source.
///
/// Each sequence is rolled out from the current `pose` (and, for the
/// learned source, the current latent state), projected to the global
/// frame, and scored with the weighted collision / goal / control sum.
/// Collision clouds for the learned source are evaluated in one batched
/// network pass over all checked steps of all samples.
fn evaluate_sequences(
    cfg: &MppiConfig,
    map: &VoxelMap,
    goal: &GoalPose,
    source: &RolloutSource,
    pose: PlanarPose,
    base_z: f64,
    sequences: &[Vec<Command>],
) -> Result<Vec<f64>> {
    let horizon = cfg.horizon;
    let checked: Vec<usize> = (0..horizon).step_by(cfg.collision_stride).collect();

    match source {
        RolloutSource::Learned {
            model,
            latent,
            clouds,
        } => {
            let rels = batch_rollout(model, std::slice::from_ref(*latent), sequences)?;
            let frame = Frame::new(Vector3::new(pose.x, pose.y, base_z), pose.yaw);
            let globals: Vec<Vec<FullBodyConfig>> = rels
                .iter()
                .map(|seq| seq.iter().map(|r| global_project(r, &frame)).collect())
                .collect();

            let mut counts = vec![vec![0usize; horizon]; sequences.len()];
            if !map.is_empty() {
                match clouds {
                    CloudSource::Model(occupancy) => {
                        let batch = sequences.len() * checked.len();
                        let mut thetas = DMatrix::zeros(JOINT_DIM, batch);
                        for (i, g) in globals.iter().enumerate() {
                            for (c_idx, &t) in checked.iter().enumerate() {
                                let col = i * checked.len() + c_idx;
                                for j in 0..JOINT_DIM {
                                    thetas[(j, col)] = g[t].joints[j];
                                }
                            }
                        }
                        let batched = occupancy.eval_batch(&thetas)?;
                        let rows = batched.nrows();
                        let flat = batched.as_slice();
                        for (i, g) in globals.iter().enumerate() {
                            for (c_idx, &t) in checked.iter().enumerate() {
                                let col = i * checked.len() + c_idx;
                                counts[i][t] = count_flat_hits(
                                    g[t].yaw,
                                    &g[t].position,
                                    &flat[col * rows..(col + 1) * rows],
                                    map,
                                );
                            }
                        }
                    }
                    CloudSource::Oracle { geometry, sampling } => {
                        for (i, g) in globals.iter().enumerate() {
                            for &t in &checked {
                                let theta = DVector::from_row_slice(&g[t].joints);
                                let cloud = fk_occupancy(geometry, sampling, &theta)?;
                                counts[i][t] = count_cloud_hits(
                                    g[t].yaw,
                                    &g[t].position,
                                    &cloud.points,
                                    map,
                                );
                            }
                        }
                    }
                }
            }

            Ok(globals
                .iter()
                .zip(sequences.iter())
                .zip(counts.iter())
                .map(|((g, seq), c)| accumulate_cost(cfg, goal, pose, g, seq, c))
                .collect())
        }
        RolloutSource::ConstantVelocity { body } => sequences
            .iter()
            .map(|seq| {
                let poses = cv_rollout(pose, seq, cfg.dt);
                let globals: Vec<FullBodyConfig> = poses
                    .iter()
                    .map(|p| {
                        let mut cfg_t = FullBodyConfig::zeros();
                        cfg_t.position = Vector3::new(p.x, p.y, base_z);
                        cfg_t.yaw = p.yaw;
                        cfg_t
                    })
                    .collect();
                let mut counts = vec![0usize; horizon];
                if !map.is_empty() {
                    for &t in &checked {
                        counts[t] = count_cloud_hits(
                            globals[t].yaw,
                            &globals[t].position,
                            &body.points,
                            map,
                        );
                    }
                }
                Ok(accumulate_cost(cfg, goal, pose, &globals, seq, &counts))
            })
            .collect(),
    }
}

/// Weighted per-step sum given precomputed collision counts.
fn accumulate_cost(
    cfg: &MppiConfig,
    goal: &GoalPose,
    pose: PlanarPose,
    globals: &[FullBodyConfig],
    commands: &[Command],
    counts: &[usize],
) -> f64 {
    let mut prev = (pose.x, pose.y);
    let mut total = 0.0;
    for ((z, u), &hits) in globals.iter().zip(commands.iter()).zip(counts.iter()) {
        total += cfg.w_collision * hits as f64
            + cfg.w_goal
                * goal_cost(
                    z.position.x,
                    z.position.y,
                    z.yaw,
                    prev,
                    goal,
                    cfg.d_switch,
                    cfg.s_switch,
                )
            + cfg.w_control * control_cost(*u);
        prev = (z.position.x, z.position.y);
    }
    total
}

/// One planning cycle: sample, roll out, score, reweight, dispatch.
///
/// Updates `state.nominal` in place and returns the first command of the
/// optimized sequence together with cycle telemetry.  `base_z` is the
/// current base height, used to place predicted clouds in the world.
pub fn mppi_step<R: Rng + ?Sized>(
    cfg: &MppiConfig,
    map: &VoxelMap,
    goal: &GoalPose,
    source: &RolloutSource,
    pose: PlanarPose,
    base_z: f64,
    state: &mut MppiState,
    rng: &mut R,
) -> Result<(Command, MppiDiagnostics)> {
    cfg.validate()?;
    if !goal.is_finite() {
        return Err(PlannerError::NonFinite("mppi_step goal"));
    }
    if !(pose.x.is_finite() && pose.y.is_finite() && pose.yaw.is_finite() && base_z.is_finite()) {
        return Err(PlannerError::NonFinite("mppi_step pose"));
    }
    if state.nominal.len() != cfg.degree + 1 {
        return Err(PlannerError::Core(CoreError::DimensionMismatch {
            context: "mppi_step nominal control points",
            expected: format!("{}", cfg.degree + 1),
            found: format!("{}", state.nominal.len()),
        }));
    }

    // Sample perturbed control points and discretize into command
    // sequences.  Sampling is sequential in the cycle RNG, so a fixed seed
    // fixes the whole cycle regardless of thread count.
    let sigma = Vector3::new(
        cfg.sigma_translation,
        cfg.sigma_translation,
        cfg.sigma_rotation,
    );
    let samples: Vec<Vec<Vector3<f64>>> = (0..cfg.samples)
        .map(|_| {
            state
                .nominal
                .iter()
                .map(|p| {
                    Vector3::new(
                        p.x + sigma.x * standard_normal(rng),
                        p.y + sigma.y * standard_normal(rng),
                        p.z + sigma.z * standard_normal(rng),
                    )
                })
                .collect()
        })
        .collect();
    let sequences: Vec<Vec<Command>> = samples
        .iter()
        .map(|c| command_sequence(c, cfg.horizon, cfg.command_limit))
        .collect();

    let costs = evaluate_sequences(cfg, map, goal, source, pose, base_z, &sequences)?;
    let weights = softmax_weights(&costs, cfg.temperature)?;

    // Weighted-average update of the nominal control points.
    let mut updated = vec![Vector3::zeros(); cfg.degree + 1];
    for (w, sample) in weights.iter().zip(samples.iter()) {
        for (acc, p) in updated.iter_mut().zip(sample.iter()) {
            *acc += *w * p;
        }
    }
    state.nominal = updated;
    let optimal = command_sequence(&state.nominal, cfg.horizon, cfg.command_limit);

    let finite: Vec<f64> = costs.iter().copied().filter(|c| c.is_finite()).collect();
    let min_cost = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_finite_cost = finite.iter().sum::<f64>() / finite.len() as f64;
    let max_weight = weights.iter().copied().fold(0.0, f64::max);
    let effective_samples = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let diagnostics = MppiDiagnostics {
        costs,
        min_cost,
        mean_finite_cost,
        max_weight,
        effective_samples,
        finite_count: finite.len(),
    };
    Ok((optimal[0], diagnostics))
}

//! Collision, goal-tracking, and control-effort costs.
//!
//! A candidate trajectory is scored step by step:
//!
//! - collision: the predicted body point cloud is rotated by the predicted
//!   yaw (yaw only; roll and pitch are not applied to the cloud), translated
//!   by the predicted base position, and the occupied-voxel hits are
//!   counted;
//! - goal tracking: planar distance to the goal plus a yaw penalty that
//!   blends between aligning with the direction of travel (far away) and
//!   the goal yaw (nearby);
//! - control effort: squared command magnitude.
//!
//! The total is the weighted sum over the horizon.  [`trajectory_cost`] is
//! the reference implementation used by tests and small-scale calls; the
//! sampling loop computes the identical quantity with batched occupancy
//! evaluation.

use nalgebra::{DVector, Vector3};

use psr_core::error::CoreError;
use psr_core::nn::sigmoid;
use psr_core::occupancy::OccupancyModel;
use psr_core::types::{wrap_angle, Command, FullBodyConfig};

use crate::mppi::MppiConfig;
use crate::voxel::VoxelMap;
use crate::{PlannerError, Result};

/// Displacements below this \[m\] leave the heading direction undefined; the
/// heading term of the yaw cost is dropped for such steps.
pub const MIN_HEADING_STEP: f64 = 1e-3;

/// A planar goal: position and yaw.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GoalPose {
    /// Goal x \[m\].
    pub x: f64,
    /// Goal y \[m\].
    pub y: f64,
    /// Goal yaw \[rad\].
    pub yaw: f64,
}

impl GoalPose {
    /// A goal at the given planar pose.
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        GoalPose { x, y, yaw }
    }

    /// Whether every field is finite.
    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.yaw.is_finite()
    }
}

/// Counts cloud points that land in occupied voxels after the planar
/// transform `R_z(yaw) o + p`.
pub fn count_cloud_hits(
    yaw: f64,
    position: &Vector3<f64>,
    points: &[Vector3<f64>],
    map: &VoxelMap,
) -> usize {
    if map.is_empty() {
        return 0;
    }
    let (sin_yaw, cos_yaw) = yaw.sin_cos();
    points
        .iter()
        .filter(|o| {
            map.contains_xyz(
                cos_yaw * o.x - sin_yaw * o.y + position.x,
                sin_yaw * o.x + cos_yaw * o.y + position.y,
                o.z + position.z,
            )
        })
        .count()
}

/// Same count for a flattened cloud `[x0, y0, z0, x1, ...]`.
pub fn count_flat_hits(yaw: f64, position: &Vector3<f64>, flat: &[f64], map: &VoxelMap) -> usize {
    if map.is_empty() {
        return 0;
    }
    let (sin_yaw, cos_yaw) = yaw.sin_cos();
    flat.chunks_exact(3)
        .filter(|o| {
            map.contains_xyz(
                cos_yaw * o[0] - sin_yaw * o[1] + position.x,
                sin_yaw * o[0] + cos_yaw * o[1] + position.y,
                o[2] + position.z,
            )
        })
        .count()
}

/// Number of predicted body points inside occupied voxels for one
/// configuration, using the learned occupancy model for the cloud.
pub fn collision_cost(
    cfg: &FullBodyConfig,
    map: &VoxelMap,
    occupancy: &OccupancyModel,
) -> Result<usize> {
    if map.is_empty() {
        return Ok(0);
    }
    let theta = DVector::from_row_slice(&cfg.joints);
    let cloud = occupancy.eval(&theta)?;
    Ok(count_cloud_hits(cfg.yaw, &cfg.position, &cloud.points, map))
}

/// Distance-based weight that switches the yaw penalty from
/// travel-direction alignment (far, weight near 1) to goal-yaw alignment
/// (near, weight near 0).
pub fn yaw_blend(distance: f64, d_switch: f64, s_switch: f64) -> f64 {
    sigmoid((distance - d_switch) / s_switch)
}

/// Goal-tracking cost of one predicted step: planar distance plus the
/// blended yaw penalty.
///
/// The heading direction is the finite difference from the previous planar
/// position `prev` to the current one; steps shorter than
/// [`MIN_HEADING_STEP`] drop the heading term.
pub fn goal_cost(
    x: f64,
    y: f64,
    yaw: f64,
    prev: (f64, f64),
    goal: &GoalPose,
    d_switch: f64,
    s_switch: f64,
) -> f64 {
    let distance = (x - goal.x).hypot(y - goal.y);
    let blend = yaw_blend(distance, d_switch, s_switch);
    let (dx, dy) = (x - prev.0, y - prev.1);
    let heading_term = if dx.hypot(dy) < MIN_HEADING_STEP {
        0.0
    } else {
        blend * wrap_angle(yaw - dy.atan2(dx)).abs()
    };
    let goal_term = (1.0 - blend) * wrap_angle(yaw - goal.yaw).abs();
    distance + heading_term + goal_term
}

/// Control-effort cost: squared Euclidean command magnitude.
pub fn control_cost(u: Command) -> f64 {
    u.vx * u.vx + u.vy * u.vy + u.wz * u.wz
}

/// Total weighted cost of one rollout in the global frame.
///
/// `rollout[t]` is the predicted configuration after `commands[t]`;
/// `start` is the planar position at the start of the rollout (for the
/// first heading difference).  Collision is evaluated every
/// `collision_stride` steps starting at the first.
pub fn trajectory_cost(
    rollout: &[FullBodyConfig],
    commands: &[Command],
    start: (f64, f64),
    map: &VoxelMap,
    occupancy: &OccupancyModel,
    goal: &GoalPose,
    cfg: &MppiConfig,
) -> Result<f64> {
    if rollout.len() != commands.len() {
        return Err(PlannerError::Core(CoreError::DimensionMismatch {
            context: "trajectory_cost",
            expected: format!("{} commands", rollout.len()),
            found: format!("{}", commands.len()),
        }));
    }
    let mut prev = start;
    let mut total = 0.0;
    for (t, (z, u)) in rollout.iter().zip(commands.iter()).enumerate() {
        let hits = if t % cfg.collision_stride == 0 {
            collision_cost(z, map, occupancy)?
        } else {
            0
        };
        let goal_term = goal_cost(
            z.position.x,
            z.position.y,
            z.yaw,
            prev,
            goal,
            cfg.d_switch,
            cfg.s_switch,
        );
        total += cfg.w_collision * hits as f64
            + cfg.w_goal * goal_term
            + cfg.w_control * control_cost(*u);
        prev = (z.position.x, z.position.y);
    }
    Ok(total)
}

//! Constant-velocity kinematic baseline.
//!
//! The reference point for prediction quality: treat each commanded twist as
//! if it were realized instantly and integrate unicycle kinematics,
//!
//! ```text
//!   q_{k+1} = q_k + R_z(yaw_k) * (v_x, v_y) * dt,   yaw_{k+1} = yaw_k + omega * dt
//! ```
//!
//! This ignores tracking lag, standing behavior, and all body motion, which
//! is exactly the error a learned model must beat to justify itself.

use crate::types::{Command, PlanarPose};

/// Integrates commands from `start`, returning the pose after each command
/// (`result[k]` is the pose once `commands[k]` has acted for `dt`).
pub fn cv_rollout(start: PlanarPose, commands: &[Command], dt: f64) -> Vec<PlanarPose> {
    let mut out = Vec::with_capacity(commands.len());
    let mut pose = start;
    for u in commands {
        let (sin_yaw, cos_yaw) = pose.yaw.sin_cos();
        pose = PlanarPose::new(
            pose.x + (cos_yaw * u.vx - sin_yaw * u.vy) * dt,
            pose.y + (sin_yaw * u.vx + cos_yaw * u.vy) * dt,
            pose.yaw + u.wz * dt,
        );
        out.push(pose);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pure_rotation_integrates_yaw_and_keeps_position() {
        let cmds = vec![Command::new(0.0, 0.0, 1.0); 100];
        let out = cv_rollout(PlanarPose::default(), &cmds, 0.02);
        let last = out.last().unwrap();
        assert_relative_eq!(last.yaw, 2.0, epsilon = 1e-12);
        assert_relative_eq!(last.x, 0.0);
        assert_relative_eq!(last.y, 0.0);
    }

    #[test]
    fn forward_command_moves_along_heading() {
        let start = PlanarPose::new(1.0, -1.0, std::f64::consts::FRAC_PI_2);
        let cmds = vec![Command::new(0.5, 0.0, 0.0); 10];
        let out = cv_rollout(start, &cmds, 0.1);
        let last = out.last().unwrap();
        assert_relative_eq!(last.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(last.y, -1.0 + 0.5, epsilon = 1e-12);
        assert_relative_eq!(last.yaw, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn lateral_command_moves_perpendicular_to_heading() {
        let out = cv_rollout(PlanarPose::default(), &[Command::new(0.0, 0.3, 0.0)], 0.02);
        assert_relative_eq!(out[0].x, 0.0);
        assert_relative_eq!(out[0].y, 0.006, epsilon = 1e-12);
    }

    #[test]
    fn arc_returns_to_start_after_full_circle() {
        // v = 0.5 m/s, omega = 0.5 rad/s: a circle closed after 4 pi seconds.
        let dt = 0.01;
        let steps = (4.0 * std::f64::consts::PI / dt).round() as usize;
        let cmds = vec![Command::new(0.5, 0.0, 0.5); steps];
        let out = cv_rollout(PlanarPose::default(), &cmds, dt);
        let last = out.last().unwrap();
        // First-order integration closes the loop to within O(dt).
        assert!(last.distance(&PlanarPose::default()) < 0.05);
    }

    #[test]
    fn empty_command_list_yields_empty_rollout() {
        assert!(cv_rollout(PlanarPose::default(), &[], 0.02).is_empty());
    }
}

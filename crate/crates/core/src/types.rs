//! Shared vocabulary types for the observer-predictor stack.
//!
//! The robot under study is a velocity-commanded quadruped.  Three signal
//! spaces appear throughout the crate:
//!
//! ```text
//!   command   u in R^3            (v_x, v_y, omega_z) planar twist
//!   sensing   y in R^14           (roll, pitch, theta_1..theta_12)
//!   output    z in R^18           (p_x, p_y, p_z, yaw, roll, pitch, theta_1..theta_12)
//! ```
//!
//! `z` is the full-body configuration: base position, base orientation, and
//! twelve joint angles (four legs x abduction/hip/knee).  The first four
//! entries of `z` (position and yaw) are only observable through external
//! pose sensing, while the remaining fourteen are exactly the proprioceptive
//! measurement vector `y`.
//!
//! Predicted trajectories are expressed in a robocentric frame anchored at
//! the pose where prediction starts; [`RelativeConfig`] is a newtype that
//! keeps robocentric values from being mixed up with global ones.

use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};

/// Dimension of the planar velocity command `u = (v_x, v_y, omega_z)`.
pub const COMMAND_DIM: usize = 3;

/// Dimension of the proprioceptive measurement `y` (roll, pitch, 12 joints).
pub const MEASUREMENT_DIM: usize = 14;

/// Number of leg joints (4 legs x abduction, hip pitch, knee).
pub const JOINT_DIM: usize = 12;

/// Dimension of the full-body output `z` (3 position + yaw + measurement).
pub const OUTPUT_DIM: usize = 4 + MEASUREMENT_DIM;

/// Number of position-and-yaw outputs that require external pose sensing.
pub const POSE_DIM: usize = 4;

/// Wraps an angle to the half-open interval `(-pi, pi]`.
///
/// Used wherever yaw differences are formed so that frame changes never
/// introduce 2*pi jumps.
pub fn wrap_angle(theta: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut a = theta % two_pi;
    if a <= -std::f64::consts::PI {
        a += two_pi;
    } else if a > std::f64::consts::PI {
        a -= two_pi;
    }
    a
}

/// Planar velocity command: forward, lateral, and yaw-rate setpoints in the
/// body frame.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Command {
    /// Forward velocity setpoint \[m/s\].
    pub vx: f64,
    /// Lateral velocity setpoint \[m/s\].
    pub vy: f64,
    /// Yaw rate setpoint \[rad/s\].
    pub wz: f64,
}

impl Command {
    /// Creates a command from its three components.
    pub fn new(vx: f64, vy: f64, wz: f64) -> Self {
        Self { vx, vy, wz }
    }

    /// The zero command (stand still).
    pub fn zero() -> Self {
        Self::default()
    }

    /// Returns the command as a length-3 column vector `(v_x, v_y, omega_z)`.
    pub fn to_vector(self) -> DVector<f64> {
        DVector::from_column_slice(&[self.vx, self.vy, self.wz])
    }

    /// Builds a command from the first three entries of a vector.
    pub fn from_slice(v: &[f64]) -> Self {
        Self::new(v[0], v[1], v[2])
    }

    /// Euclidean norm of the command, used by control-effort costs.
    pub fn norm(self) -> f64 {
        (self.vx * self.vx + self.vy * self.vy + self.wz * self.wz).sqrt()
    }

    /// Infinity norm, used by the surrogate's standing-latch hysteresis.
    pub fn inf_norm(self) -> f64 {
        self.vx.abs().max(self.vy.abs()).max(self.wz.abs())
    }

    /// Clamps every component to `[-limit, limit]`.
    pub fn clamp(self, limit: f64) -> Self {
        Self::new(
            self.vx.clamp(-limit, limit),
            self.vy.clamp(-limit, limit),
            self.wz.clamp(-limit, limit),
        )
    }

    /// True if all components are finite.
    pub fn is_finite(self) -> bool {
        self.vx.is_finite() && self.vy.is_finite() && self.wz.is_finite()
    }
}

/// Planar base pose `(x, y, yaw)` used by the constant-velocity baseline and
/// the planner's goal description.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlanarPose {
    /// Position x \[m\].
    pub x: f64,
    /// Position y \[m\].
    pub y: f64,
    /// Heading \[rad\], wrapped to `(-pi, pi]`.
    pub yaw: f64,
}

impl PlanarPose {
    /// Creates a pose, wrapping the yaw.
    pub fn new(x: f64, y: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            yaw: wrap_angle(yaw),
        }
    }

    /// Euclidean distance between the two positions.
    pub fn distance(&self, other: &PlanarPose) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }

    /// Absolute wrapped yaw difference to another pose.
    pub fn yaw_error(&self, other: &PlanarPose) -> f64 {
        wrap_angle(self.yaw - other.yaw).abs()
    }
}

/// Anchor of a robocentric frame: the global base position and yaw at the
/// instant prediction begins.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Frame {
    /// Global base position at the anchor instant \[m\].
    pub position: Vector3<f64>,
    /// Global yaw at the anchor instant \[rad\].
    pub yaw: f64,
}

impl Frame {
    /// Builds a frame from a position and yaw.
    pub fn new(position: Vector3<f64>, yaw: f64) -> Self {
        Self { position, yaw }
    }

    /// Frame anchored at a planar pose with the base at standing height `z`.
    pub fn from_planar(pose: PlanarPose, z: f64) -> Self {
        Self::new(Vector3::new(pose.x, pose.y, z), pose.yaw)
    }
}

/// Full-body configuration `z`: global base position, base orientation
/// (yaw/roll/pitch), and the twelve joint angles.
///
/// Vector layout is `(p_x, p_y, p_z, yaw, roll, pitch, theta_1..theta_12)`;
/// the trailing fourteen entries equal the measurement vector `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullBodyConfig {
    /// Base position in the world (or anchor) frame \[m\].
    pub position: Vector3<f64>,
    /// Base yaw \[rad\].
    pub yaw: f64,
    /// Base roll \[rad\].
    pub roll: f64,
    /// Base pitch \[rad\].
    pub pitch: f64,
    /// Joint angles, legs ordered front-left, front-right, rear-left,
    /// rear-right, each contributing (abduction, hip pitch, knee) \[rad\].
    pub joints: [f64; JOINT_DIM],
}

impl FullBodyConfig {
    /// A configuration with everything at zero.
    pub fn zeros() -> Self {
        Self {
            position: Vector3::zeros(),
            yaw: 0.0,
            roll: 0.0,
            pitch: 0.0,
            joints: [0.0; JOINT_DIM],
        }
    }

    /// Flattens to an 18-vector `(p, yaw, roll, pitch, joints)`.
    pub fn to_vector(&self) -> DVector<f64> {
        let mut v = DVector::zeros(OUTPUT_DIM);
        v[0] = self.position.x;
        v[1] = self.position.y;
        v[2] = self.position.z;
        v[3] = self.yaw;
        v[4] = self.roll;
        v[5] = self.pitch;
        for (i, theta) in self.joints.iter().enumerate() {
            v[6 + i] = *theta;
        }
        v
    }

    /// Rebuilds a configuration from an 18-vector produced by
    /// [`FullBodyConfig::to_vector`].
    pub fn from_vector(v: &DVector<f64>) -> crate::error::Result<Self> {
        if v.len() != OUTPUT_DIM {
            return Err(crate::error::CoreError::DimensionMismatch {
                context: "FullBodyConfig::from_vector",
                expected: format!("{OUTPUT_DIM}"),
                found: format!("{}", v.len()),
            });
        }
        let mut joints = [0.0; JOINT_DIM];
        joints.copy_from_slice(&v.as_slice()[6..]);
        Ok(Self {
            position: Vector3::new(v[0], v[1], v[2]),
            yaw: v[3],
            roll: v[4],
            pitch: v[5],
            joints,
        })
    }

    /// The proprioceptive measurement `y = (roll, pitch, theta_1..theta_12)`
    /// implied by this configuration (noise-free).
    pub fn measured_outputs(&self) -> DVector<f64> {
        let mut y = DVector::zeros(MEASUREMENT_DIM);
        y[0] = self.roll;
        y[1] = self.pitch;
        for (i, theta) in self.joints.iter().enumerate() {
            y[2 + i] = *theta;
        }
        y
    }

    /// The planar pose `(p_x, p_y, yaw)` of the base.
    pub fn planar_pose(&self) -> PlanarPose {
        PlanarPose::new(self.position.x, self.position.y, self.yaw)
    }

    /// True if every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.yaw.is_finite()
            && self.roll.is_finite()
            && self.pitch.is_finite()
            && self.joints.iter().all(|v| v.is_finite())
    }
}

/// A full-body configuration expressed in a robocentric frame: position is
/// relative to the anchor pose (rotated by minus the anchor yaw) and yaw is
/// the wrapped difference to the anchor yaw.  Roll, pitch, and joints are
/// frame-independent and carried through unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelativeConfig(pub FullBodyConfig);

impl RelativeConfig {
    /// Flattens to an 18-vector, identical layout to [`FullBodyConfig`].
    pub fn to_vector(&self) -> DVector<f64> {
        self.0.to_vector()
    }

    /// Rebuilds from an 18-vector.
    pub fn from_vector(v: &DVector<f64>) -> crate::error::Result<Self> {
        FullBodyConfig::from_vector(v).map(RelativeConfig)
    }

    /// Planar part `(x, y, yaw)` relative to the anchor.
    pub fn planar_pose(&self) -> PlanarPose {
        self.0.planar_pose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn wrap_angle_maps_to_half_open_interval() {
        use std::f64::consts::PI;
        assert_relative_eq!(wrap_angle(0.0), 0.0);
        assert_relative_eq!(wrap_angle(PI), PI);
        assert_relative_eq!(wrap_angle(-PI), PI);
        assert_relative_eq!(wrap_angle(3.0 * PI), PI);
        assert_relative_eq!(wrap_angle(2.0 * PI + 0.25), 0.25, epsilon = 1e-12);
        assert_relative_eq!(wrap_angle(-2.0 * PI - 0.25), -0.25, epsilon = 1e-12);
        for k in -7..=7 {
            let a = 0.37 + 2.0 * PI * k as f64;
            assert_relative_eq!(wrap_angle(a), 0.37, epsilon = 1e-9);
        }
    }

    #[test]
    fn config_vector_round_trip_preserves_layout() {
        let mut cfg = FullBodyConfig::zeros();
        cfg.position = Vector3::new(1.0, -2.0, 0.4);
        cfg.yaw = 0.7;
        cfg.roll = -0.05;
        cfg.pitch = 0.02;
        for (i, j) in cfg.joints.iter_mut().enumerate() {
            *j = 0.1 * i as f64;
        }
        let v = cfg.to_vector();
        assert_eq!(v.len(), OUTPUT_DIM);
        assert_relative_eq!(v[0], 1.0);
        assert_relative_eq!(v[3], 0.7);
        assert_relative_eq!(v[4], -0.05);
        assert_relative_eq!(v[6], 0.0);
        assert_relative_eq!(v[17], 1.1);
        let back = FullBodyConfig::from_vector(&v).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn measured_outputs_are_the_trailing_fourteen_entries() {
        let mut cfg = FullBodyConfig::zeros();
        cfg.roll = 0.3;
        cfg.pitch = -0.2;
        cfg.joints[11] = 0.9;
        let y = cfg.measured_outputs();
        let z = cfg.to_vector();
        assert_eq!(y.len(), MEASUREMENT_DIM);
        for i in 0..MEASUREMENT_DIM {
            assert_relative_eq!(y[i], z[POSE_DIM + i]);
        }
    }

    #[test]
    fn from_vector_rejects_wrong_length() {
        let v = DVector::zeros(17);
        assert!(FullBodyConfig::from_vector(&v).is_err());
    }

    #[test]
    fn command_norms_and_clamp() {
        let u = Command::new(0.3, -0.4, 1.2);
        assert_relative_eq!(u.norm(), (0.09f64 + 0.16 + 1.44).sqrt());
        assert_relative_eq!(u.inf_norm(), 1.2);
        let c = u.clamp(0.5);
        assert_relative_eq!(c.wz, 0.5);
        assert_relative_eq!(c.vx, 0.3);
        assert_relative_eq!(c.vy, -0.4);
    }
}

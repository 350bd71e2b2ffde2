//! Deterministic kinematic surrogate of a velocity-commanded quadruped.
//!
//! No robot hardware backs this crate, so training and navigation run
//! against a synthetic plant with the qualitative behaviors the learning
//! problem needs and nothing more:
//!
//! * **Command tracking with lag** — the body-frame velocity follows the
//!   commanded twist through a first-order filter,
//!   `v <- v + (dt/tau)(u - v)`, and the planar pose integrates unicycle
//!   kinematics `q+ = q + R_z(yaw) v dt` with the updated velocity.
//! * **Standing latch with hysteresis** — holding `||u||_inf` below an
//!   enter threshold for a dwell time freezes the gait and decays the
//!   velocity to zero (a controller dropping into stand mode); commands
//!   above a strictly larger exit threshold release it.  Because the two
//!   thresholds differ, signals that cross only one of them can never make
//!   the latch chatter.
//! * **Speed-dependent trot** — a gait phase advances at a fixed frequency
//!   and drives hip/knee/abduction oscillations whose amplitude grows with
//!   speed, `A(s) = ramp(s) * (c0 + c1 * min(s, 0.5))`, where the ramp
//!   fades the oscillation out near standstill so a stopped robot holds its
//!   exact nominal stance.  Diagonal legs share phase (front-left with
//!   rear-right).
//! * **Velocity signatures in posture** — forward speed pitches the body,
//!   lateral speed rolls it, and turning adds lean.  These couplings leave a
//!   trace of the body-frame velocity in the proprioceptive measurement so
//!   that a state estimator fed only roll/pitch/joints can infer how the
//!   robot is actually moving.
//!
//! Measurements add white Gaussian noise; all stochastic behavior flows
//! through caller-provided RNGs, so a fixed seed reproduces a run exactly.

use nalgebra::{DVector, Vector3};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::sampling::standard_normal;
use crate::types::{wrap_angle, Command, FullBodyConfig, PlanarPose, MEASUREMENT_DIM};

/// Physical and behavioral constants of the surrogate.
///
/// Geometry fields (body box, leg lengths, hip offsets) are shared with the
/// occupancy model and stay fixed under randomization; dynamic-response
/// fields may be jittered per trajectory to diversify training data.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SurrogateConfig {
    /// Control interval \[s\].
    pub dt: f64,
    /// Velocity-tracking time constant \[s\].
    pub velocity_tau: f64,
    /// Velocity decay time constant while latched standing \[s\].
    pub standing_tau: f64,
    /// Gait frequency \[Hz\].
    pub gait_frequency: f64,
    /// Per-leg gait phase offsets \[rad\], order FL, FR, RL, RR.
    pub phase_offsets: [f64; 4],
    /// Joint oscillation amplitude at zero speed (`c0`) \[rad\].
    pub joint_amp_base: f64,
    /// Amplitude growth per unit speed (`c1`), saturating at 0.5 m/s \[rad s/m\].
    pub joint_amp_gain: f64,
    /// Speed below which oscillations ramp linearly to zero \[m/s\].
    pub oscillation_ramp_speed: f64,
    /// Knee swing relative to hip swing (dimensionless).
    pub knee_gain: f64,
    /// Abduction swing relative to hip swing (dimensionless).
    pub abduction_gain: f64,
    /// Roll oscillation per unit joint amplitude (dimensionless).
    pub roll_osc_gain: f64,
    /// Pitch oscillation per unit joint amplitude (dimensionless).
    pub pitch_osc_gain: f64,
    /// Steady roll per unit lateral velocity \[rad s/m\].
    pub roll_lateral_gain: f64,
    /// Steady roll per unit yaw rate \[rad s/rad\].
    pub roll_turn_gain: f64,
    /// Steady pitch per unit forward velocity \[rad s/m\] (nose down).
    pub pitch_forward_gain: f64,
    /// Vertical bob per unit joint amplitude \[m/rad\].
    pub bob_gain: f64,
    /// Base height when standing \[m\].
    pub standing_height: f64,
    /// Nominal hip pitch angle \[rad\].
    pub nominal_hip: f64,
    /// Nominal knee angle \[rad\].
    pub nominal_knee: f64,
    /// Latch engages after `||u||_inf` stays below this for the dwell \[m/s\].
    pub stand_enter_threshold: f64,
    /// Dwell time required to engage the latch \[s\].
    pub stand_enter_dwell: f64,
    /// Latch releases when `||u||_inf` reaches this \[m/s\]; must exceed the
    /// enter threshold.
    pub stand_exit_threshold: f64,
    /// Standard deviation of measurement noise on every channel \[rad\].
    pub measurement_noise: f64,
    /// Body collision box (length, width, height) centered on the base \[m\].
    pub body_size: [f64; 3],
    /// Upper (hip-to-knee) link length \[m\].
    pub upper_leg_length: f64,
    /// Lower (knee-to-foot) link length \[m\].
    pub lower_leg_length: f64,
    /// Hip attachment offsets from the base center (|x|, |y|, z) \[m\].
    pub hip_offset: [f64; 3],
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        Self {
            dt: 0.02,
            velocity_tau: 0.3,
            standing_tau: 0.1,
            gait_frequency: 2.0,
            phase_offsets: [0.0, std::f64::consts::PI, std::f64::consts::PI, 0.0],
            joint_amp_base: 0.04,
            joint_amp_gain: 0.5,
            oscillation_ramp_speed: 0.1,
            knee_gain: 0.8,
            abduction_gain: 0.15,
            roll_osc_gain: 0.06,
            pitch_osc_gain: 0.04,
            roll_lateral_gain: 0.10,
            roll_turn_gain: 0.05,
            pitch_forward_gain: 0.08,
            bob_gain: 0.04,
            standing_height: 0.49,
            nominal_hip: 0.6,
            nominal_knee: -1.2,
            stand_enter_threshold: 0.05,
            stand_enter_dwell: 0.5,
            stand_exit_threshold: 0.1,
            measurement_noise: 0.005,
            body_size: [0.8, 0.35, 0.3],
            upper_leg_length: 0.25,
            lower_leg_length: 0.28,
            hip_offset: [0.3, 0.14, -0.05],
        }
    }
}

impl SurrogateConfig {
    /// Validates the configuration invariants.
    pub fn validate(&self) -> Result<()> {
        let positive: [(&str, f64); 6] = [
            ("dt", self.dt),
            ("velocity_tau", self.velocity_tau),
            ("standing_tau", self.standing_tau),
            ("gait_frequency", self.gait_frequency),
            ("upper_leg_length", self.upper_leg_length),
            ("lower_leg_length", self.lower_leg_length),
        ];
        for (name, v) in positive {
            if !(v > 0.0) {
                return Err(CoreError::OutOfRange {
                    context: "SurrogateConfig::validate",
                    value: v,
                    range: match name {
                        "dt" => "dt > 0",
                        "velocity_tau" => "velocity_tau > 0",
                        "standing_tau" => "standing_tau > 0",
                        "gait_frequency" => "gait_frequency > 0",
                        "upper_leg_length" => "upper_leg_length > 0",
                        _ => "lower_leg_length > 0",
                    },
                });
            }
        }
        if self.dt >= self.velocity_tau {
            return Err(CoreError::OutOfRange {
                context: "SurrogateConfig::validate",
                value: self.dt,
                range: "dt < velocity_tau (filter stability)",
            });
        }
        if self.stand_exit_threshold <= self.stand_enter_threshold {
            return Err(CoreError::OutOfRange {
                context: "SurrogateConfig::validate",
                value: self.stand_exit_threshold,
                range: "stand_exit_threshold > stand_enter_threshold (hysteresis)",
            });
        }
        if self.measurement_noise < 0.0 {
            return Err(CoreError::OutOfRange {
                context: "SurrogateConfig::validate",
                value: self.measurement_noise,
                range: "measurement_noise >= 0",
            });
        }
        Ok(())
    }

    /// Copy with the dynamic-response constants jittered by independent
    /// factors in `[1 - spread, 1 + spread]`.
    ///
    /// Geometry, the control interval, thresholds, and noise are left
    /// untouched so that datasets drawn from randomized plants stay
    /// compatible with a single occupancy model and measurement pipeline.
    pub fn randomized<R: Rng + ?Sized>(&self, spread: f64, rng: &mut R) -> Self {
        assert!((0.0..1.0).contains(&spread), "spread must be in [0, 1)");
        let mut jitter = |v: f64| v * rng.gen_range(1.0 - spread..1.0 + spread);
        let mut out = self.clone();
        out.velocity_tau = jitter(out.velocity_tau);
        out.standing_tau = jitter(out.standing_tau);
        out.gait_frequency = jitter(out.gait_frequency);
        out.joint_amp_base = jitter(out.joint_amp_base);
        out.joint_amp_gain = jitter(out.joint_amp_gain);
        out.knee_gain = jitter(out.knee_gain);
        out.abduction_gain = jitter(out.abduction_gain);
        out.roll_osc_gain = jitter(out.roll_osc_gain);
        out.pitch_osc_gain = jitter(out.pitch_osc_gain);
        out.roll_lateral_gain = jitter(out.roll_lateral_gain);
        out.roll_turn_gain = jitter(out.roll_turn_gain);
        out.pitch_forward_gain = jitter(out.pitch_forward_gain);
        out.bob_gain = jitter(out.bob_gain);
        out
    }
}

/// Mutable state of the surrogate.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateState {
    /// Planar base pose in the world frame.
    pub pose: PlanarPose,
    /// Body-frame velocity `(v_x, v_y, omega_z)` actually realized.
    pub velocity: Vector3<f64>,
    /// Gait phase \[rad\], wrapped to `[0, 2 pi)`.
    pub gait_phase: f64,
    /// Whether the standing latch is engaged.
    pub latched: bool,
    /// Time `||u||_inf` has stayed below the enter threshold \[s\].
    pub low_command_time: f64,
}

/// Kinematic quadruped surrogate.
#[derive(Debug, Clone)]
pub struct Surrogate {
    cfg: SurrogateConfig,
}

impl Surrogate {
    /// Builds a surrogate after validating its configuration.
    pub fn new(cfg: SurrogateConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    /// The configuration in use.
    pub fn config(&self) -> &SurrogateConfig {
        &self.cfg
    }

    /// At-rest state at a pose.
    pub fn initial_state(&self, pose: PlanarPose) -> SurrogateState {
        SurrogateState {
            pose,
            velocity: Vector3::zeros(),
            gait_phase: 0.0,
            latched: false,
            low_command_time: 0.0,
        }
    }

    /// Advances the state by one control interval under command `u`.
    pub fn step(&self, state: &mut SurrogateState, u: Command) {
        let c = &self.cfg;

        // Latch bookkeeping from the raw command.
        if state.latched {
            if u.inf_norm() >= c.stand_exit_threshold {
                state.latched = false;
                state.low_command_time = 0.0;
            }
        } else if u.inf_norm() < c.stand_enter_threshold {
            state.low_command_time += c.dt;
            if state.low_command_time >= c.stand_enter_dwell {
                state.latched = true;
            }
        } else {
            state.low_command_time = 0.0;
        }

        // Velocity tracking / decay, then pose integration with the updated
        // velocity.
        if state.latched {
            let decay = 1.0 - c.dt / c.standing_tau;
            state.velocity *= decay.max(0.0);
        } else {
            let gain = c.dt / c.velocity_tau;
            state.velocity.x += gain * (u.vx - state.velocity.x);
            state.velocity.y += gain * (u.vy - state.velocity.y);
            state.velocity.z += gain * (u.wz - state.velocity.z);
            state.gait_phase = (state.gait_phase
                + 2.0 * std::f64::consts::PI * c.gait_frequency * c.dt)
                .rem_euclid(2.0 * std::f64::consts::PI);
        }
        let (sin_yaw, cos_yaw) = state.pose.yaw.sin_cos();
        let (vx, vy) = (state.velocity.x, state.velocity.y);
        state.pose = PlanarPose::new(
            state.pose.x + (cos_yaw * vx - sin_yaw * vy) * c.dt,
            state.pose.y + (sin_yaw * vx + cos_yaw * vy) * c.dt,
            state.pose.yaw + state.velocity.z * c.dt,
        );
    }

    /// Joint oscillation amplitude at a given twist speed.
    fn joint_amplitude(&self, speed: f64) -> f64 {
        let c = &self.cfg;
        let ramp = (speed / c.oscillation_ramp_speed).min(1.0);
        ramp * (c.joint_amp_base + c.joint_amp_gain * speed.min(0.5))
    }

    /// Full-body configuration implied by the current state (noise-free).
    pub fn full_config(&self, state: &SurrogateState) -> FullBodyConfig {
        let c = &self.cfg;
        let speed = state.velocity.norm();
        let amp = self.joint_amplitude(speed);
        let phase = state.gait_phase;

        let mut cfg = FullBodyConfig::zeros();
        cfg.position.x = state.pose.x;
        cfg.position.y = state.pose.y;
        cfg.position.z = c.standing_height + c.bob_gain * amp * (2.0 * phase).sin();
        cfg.yaw = state.pose.yaw;
        cfg.roll = c.roll_osc_gain * amp * phase.sin()
            + c.roll_lateral_gain * state.velocity.y
            + c.roll_turn_gain * state.velocity.z;
        cfg.pitch =
            c.pitch_osc_gain * amp * (2.0 * phase).sin() - c.pitch_forward_gain * state.velocity.x;
        for leg in 0..4 {
            let leg_phase = phase + c.phase_offsets[leg];
            cfg.joints[3 * leg] =
                c.abduction_gain * amp * leg_phase.sin() + 0.5 * c.roll_lateral_gain * state.velocity.y;
            cfg.joints[3 * leg + 1] = c.nominal_hip + amp * leg_phase.sin();
            cfg.joints[3 * leg + 2] =
                c.nominal_knee - c.knee_gain * amp * (1.0 - leg_phase.cos()) * 0.5;
        }
        cfg
    }

    /// Noisy proprioceptive measurement of the current state.
    pub fn measure<R: Rng + ?Sized>(&self, state: &SurrogateState, rng: &mut R) -> DVector<f64> {
        let mut y = self.full_config(state).measured_outputs();
        if self.cfg.measurement_noise > 0.0 {
            for i in 0..MEASUREMENT_DIM {
                y[i] += self.cfg.measurement_noise * standard_normal(rng);
            }
        }
        y
    }
}

/// Convenience: wraps a yaw advance (used by tests and the planner).
pub fn integrate_yaw(yaw: f64, wz: f64, dt: f64) -> f64 {
    wrap_angle(yaw + wz * dt)
}

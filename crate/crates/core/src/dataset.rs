//! Trajectory logging, robocentric windowing, and dataset serialization.
//!
//! Training data comes from surrogate rollouts under smooth exploratory
//! commands.  Command profiles are concatenated cubic Bezier segments in
//! `(v_x, v_y, omega)` space: each segment draws four control points
//! uniformly from the command box and a duration from a configured range,
//! giving smooth, non-stationary excitation across the velocity envelope.
//!
//! A training window packs
//!
//! ```text
//!   measurements  y_0 .. y_H          (H+1 noisy proprioceptive vectors)
//!   commands      u_0 .. u_{H+T}      (H+T+1 commands)
//!   targets       z'_{H+1} .. z'_{H+T}  (T robocentric configurations)
//! ```
//!
//! where index `H` is the anchor: targets are expressed relative to the
//! ground-truth pose at the anchor via [`robocentric`].  The observer
//! consumes pairs `(y_k, u_k)` for `k < H`; the predictor consumes
//! `u_H .. u_{H+T-1}` (the command at the anchor acts first).  The final
//! command is stored so a window is self-contained for other alignments.
//!
//! Windows are serialized to a little-endian binary format (magic `PSRD`)
//! with `f32` payloads; see [`write_dataset`].

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DVector, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::surrogate::{Surrogate, SurrogateConfig};
use crate::types::{
    wrap_angle, Command, Frame, FullBodyConfig, PlanarPose, RelativeConfig, COMMAND_DIM,
    MEASUREMENT_DIM, OUTPUT_DIM,
};

/// File magic for serialized datasets.
const DATASET_MAGIC: &[u8; 4] = b"PSRD";
/// Current dataset format version.
const DATASET_VERSION: u32 = 1;

// ---------------------------------------------------------------------------
// Command curves
// ---------------------------------------------------------------------------

/// A Bezier curve in command space with a duration.
#[derive(Debug, Clone, PartialEq)]
pub struct CommandCurve {
    /// Control points; the degree is one less than the count.
    pub control: Vec<Vector3<f64>>,
    /// Segment duration \[s\].
    pub duration: f64,
}

impl CommandCurve {
    /// Evaluates the Bernstein form at `s` in `[0, 1]`.
    pub fn eval(&self, s: f64) -> Result<Command> {
        if !(0.0..=1.0).contains(&s) {
            return Err(CoreError::OutOfRange {
                context: "CommandCurve::eval",
                value: s,
                range: "[0, 1]",
            });
        }
        if self.control.is_empty() {
            return Err(CoreError::InsufficientData {
                context: "CommandCurve::eval",
                need: 1,
                have: 0,
            });
        }
        let d = self.control.len() - 1;
        let mut acc = Vector3::zeros();
        for (j, p) in self.control.iter().enumerate() {
            let basis = binomial(d, j) as f64 * (1.0 - s).powi((d - j) as i32) * s.powi(j as i32);
            acc += basis * p;
        }
        Ok(Command::new(acc.x, acc.y, acc.z))
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut out: u64 = 1;
    for i in 0..k {
        out = out * (n - i) as u64 / (i + 1) as u64;
    }
    out
}

/// Parameters of the exploratory command generator.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CommandProfileConfig {
    /// Shortest Bezier segment \[s\].
    pub min_segment_duration: f64,
    /// Longest Bezier segment \[s\].
    pub max_segment_duration: f64,
    /// Control points are drawn from `[-amplitude, amplitude]^3`.
    pub amplitude: f64,
    /// Bezier degree (cubic by default).
    pub degree: usize,
}

impl Default for CommandProfileConfig {
    fn default() -> Self {
        Self {
            min_segment_duration: 3.0,
            max_segment_duration: 7.0,
            amplitude: 0.5,
            degree: 3,
        }
    }
}

/// Draws one random Bezier segment.
pub fn sample_curve<R: Rng + ?Sized>(cfg: &CommandProfileConfig, rng: &mut R) -> CommandCurve {
    let duration = rng.gen_range(cfg.min_segment_duration..cfg.max_segment_duration);
    let control = (0..=cfg.degree)
        .map(|_| {
            Vector3::new(
                rng.gen_range(-cfg.amplitude..cfg.amplitude),
                rng.gen_range(-cfg.amplitude..cfg.amplitude),
                rng.gen_range(-cfg.amplitude..cfg.amplitude),
            )
        })
        .collect();
    CommandCurve { control, duration }
}

/// Concatenates random segments into a discretized profile of `steps`
/// commands at interval `dt`.
pub fn command_profile<R: Rng + ?Sized>(
    cfg: &CommandProfileConfig,
    steps: usize,
    dt: f64,
    rng: &mut R,
) -> Vec<Command> {
    let mut out = Vec::with_capacity(steps);
    while out.len() < steps {
        let curve = sample_curve(cfg, rng);
        let n = (curve.duration / dt).round().max(1.0) as usize;
        for k in 0..n {
            if out.len() == steps {
                break;
            }
            let s = ((k as f64 * dt) / curve.duration).min(1.0);
            out.push(curve.eval(s).expect("s clamped to [0, 1]"));
        }
    }
    out
}

// ---------------------------------------------------------------------------
// Trajectory logs
// ---------------------------------------------------------------------------

/// A logged surrogate rollout: `configs[k]` and `measurements[k]` describe
/// the state at step `k`; applying `commands[k]` leads to step `k+1`.  There
/// is one more logged state than commands.
#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    /// Control interval \[s\].
    pub dt: f64,
    /// Commands applied, length `N`.
    pub commands: Vec<Command>,
    /// Ground-truth configurations, length `N + 1`.
    pub configs: Vec<FullBodyConfig>,
    /// Noisy proprioceptive measurements, length `N + 1`.
    pub measurements: Vec<DVector<f64>>,
}

impl TrajectoryLog {
    /// Number of control steps.
    pub fn steps(&self) -> usize {
        self.commands.len()
    }
}

/// Runs the surrogate under a command sequence and logs every step.
pub fn simulate_trajectory<R: Rng + ?Sized>(
    surrogate: &Surrogate,
    start: PlanarPose,
    commands: &[Command],
    rng: &mut R,
) -> TrajectoryLog {
    let mut state = surrogate.initial_state(start);
    let mut configs = Vec::with_capacity(commands.len() + 1);
    let mut measurements = Vec::with_capacity(commands.len() + 1);
    configs.push(surrogate.full_config(&state));
    measurements.push(surrogate.measure(&state, rng));
    for u in commands {
        surrogate.step(&mut state, *u);
        configs.push(surrogate.full_config(&state));
        measurements.push(surrogate.measure(&state, rng));
    }
    TrajectoryLog {
        dt: surrogate.config().dt,
        commands: commands.to_vec(),
        configs,
        measurements,
    }
}

// ---------------------------------------------------------------------------
// Robocentric transform
// ---------------------------------------------------------------------------

/// Expresses a global configuration relative to an anchor frame: position is
/// rotated into the anchor's yaw-aligned axes, yaw becomes a wrapped
/// difference, and frame-independent quantities pass through.
pub fn robocentric(cfg: &FullBodyConfig, frame: &Frame) -> RelativeConfig {
    let d = cfg.position - frame.position;
    let (sin_yaw, cos_yaw) = frame.yaw.sin_cos();
    let mut out = cfg.clone();
    out.position = Vector3::new(cos_yaw * d.x + sin_yaw * d.y, -sin_yaw * d.x + cos_yaw * d.y, d.z);
    out.yaw = wrap_angle(cfg.yaw - frame.yaw);
    RelativeConfig(out)
}

/// Inverse of [`robocentric`]: maps a relative configuration back to the
/// global frame.
pub fn global_project(rel: &RelativeConfig, frame: &Frame) -> FullBodyConfig {
    let (sin_yaw, cos_yaw) = frame.yaw.sin_cos();
    let p = &rel.0.position;
    let mut out = rel.0.clone();
    out.position = Vector3::new(
        frame.position.x + cos_yaw * p.x - sin_yaw * p.y,
        frame.position.y + sin_yaw * p.x + cos_yaw * p.y,
        frame.position.z + p.z,
    );
    out.yaw = wrap_angle(rel.0.yaw + frame.yaw);
    out
}

// ---------------------------------------------------------------------------
// Windows and datasets
// ---------------------------------------------------------------------------

/// One training window; see the module documentation for index conventions.
#[derive(Debug, Clone)]
pub struct WindowSample {
    /// `y_0 .. y_H`, length `H + 1`.
    pub measurements: Vec<DVector<f64>>,
    /// `u_0 .. u_{H+T}`, length `H + T + 1`.
    pub commands: Vec<Command>,
    /// Robocentric targets `z'_{H+1} .. z'_{H+T}`, length `T`.
    pub targets: Vec<RelativeConfig>,
}

impl WindowSample {
    /// History length `H`.
    pub fn history_len(&self) -> usize {
        self.measurements.len() - 1
    }

    /// Prediction horizon `T`.
    pub fn horizon(&self) -> usize {
        self.targets.len()
    }

    /// Observer inputs: the first `H` measurement/command pairs.
    pub fn observer_inputs(&self) -> (&[DVector<f64>], &[Command]) {
        let h = self.history_len();
        (&self.measurements[..h], &self.commands[..h])
    }

    /// Predictor inputs: commands `u_H .. u_{H+T-1}`.
    pub fn predictor_commands(&self) -> &[Command] {
        let h = self.history_len();
        &self.commands[h..h + self.horizon()]
    }
}

/// A set of windows with shared shape.
#[derive(Debug, Clone)]
pub struct Dataset {
    /// History length `H` shared by all windows.
    pub history_len: usize,
    /// Horizon `T` shared by all windows.
    pub horizon: usize,
    /// The windows.
    pub windows: Vec<WindowSample>,
}

impl Dataset {
    /// Splits into `(train, test)` by contiguous blocks: the leading
    /// fraction `1 - test_fraction` of windows trains, the rest tests.
    /// Contiguity matters because neighboring windows overlap heavily.
    pub fn split(&self, test_fraction: f64) -> (&[WindowSample], &[WindowSample]) {
        let n = self.windows.len();
        let test = ((n as f64 * test_fraction).round() as usize).min(n);
        self.windows.split_at(n - test)
    }
}

/// Extracts overlapping windows from a log with the given stride.
pub fn extract_windows(
    log: &TrajectoryLog,
    history_len: usize,
    horizon: usize,
    stride: usize,
) -> Vec<WindowSample> {
    assert!(stride > 0, "stride must be positive");
    assert!(horizon > 0, "horizon must be positive");
    // Each window consumes commands start ..= start + H + T.
    let needed = history_len + horizon + 1;
    let mut out = Vec::new();
    let mut start = 0;
    while start + needed <= log.commands.len() {
        let anchor_cfg = &log.configs[start + history_len];
        let frame = Frame::new(anchor_cfg.position, anchor_cfg.yaw);
        let targets = (1..=horizon)
            .map(|t| robocentric(&log.configs[start + history_len + t], &frame))
            .collect();
        out.push(WindowSample {
            measurements: log.measurements[start..=start + history_len].to_vec(),
            commands: log.commands[start..=start + history_len + horizon].to_vec(),
            targets,
        });
        start += stride;
    }
    out
}

/// Parameters of end-to-end dataset generation.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DatasetGenConfig {
    /// Total logged duration across trajectories \[s\].
    pub total_duration: f64,
    /// Duration of each trajectory \[s\].
    pub trajectory_duration: f64,
    /// Observer history length `H`.
    pub history_len: usize,
    /// Prediction horizon `T`.
    pub horizon: usize,
    /// Window stride in control steps.
    pub stride: usize,
    /// Per-trajectory jitter applied to surrogate dynamics (0 disables).
    pub dynamics_spread: f64,
    /// Command generator settings.
    pub profile: CommandProfileConfig,
}

impl Default for DatasetGenConfig {
    fn default() -> Self {
        Self {
            total_duration: 600.0,
            trajectory_duration: 30.0,
            history_len: 30,
            horizon: 200,
            stride: 10,
            dynamics_spread: 0.2,
            profile: CommandProfileConfig::default(),
        }
    }
}

/// Generates a dataset from scratch: simulates randomized surrogates under
/// exploratory commands and windows the logs.
pub fn generate_dataset(
    cfg: &DatasetGenConfig,
    surrogate_cfg: &SurrogateConfig,
    seed: u64,
) -> Result<Dataset> {
    surrogate_cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let steps_per_traj = (cfg.trajectory_duration / surrogate_cfg.dt).round() as usize;
    let n_traj = (cfg.total_duration / cfg.trajectory_duration).round().max(1.0) as usize;
    let mut windows = Vec::new();
    for _ in 0..n_traj {
        let plant_cfg = if cfg.dynamics_spread > 0.0 {
            surrogate_cfg.randomized(cfg.dynamics_spread, &mut rng)
        } else {
            surrogate_cfg.clone()
        };
        let surrogate = Surrogate::new(plant_cfg)?;
        let commands = command_profile(&cfg.profile, steps_per_traj, surrogate_cfg.dt, &mut rng);
        let log = simulate_trajectory(&surrogate, PlanarPose::default(), &commands, &mut rng);
        windows.extend(extract_windows(&log, cfg.history_len, cfg.horizon, cfg.stride));
    }
    if windows.is_empty() {
        return Err(CoreError::InsufficientData {
            context: "generate_dataset",
            need: 1,
            have: 0,
        });
    }
    Ok(Dataset {
        history_len: cfg.history_len,
        horizon: cfg.horizon,
        windows,
    })
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

/// Writes a dataset in the `PSRD` binary format.
///
/// Layout (all little-endian): magic `PSRD`, version `u32`, then six `u32`
/// counts (windows, `H`, `T`, command dim, measurement dim, output dim),
/// then per window the `f32` payloads: measurements `(H+1) x 14` in time
/// order, commands `(H+T+1) x 3`, targets `T x 18` (vector layout of
/// [`FullBodyConfig::to_vector`]).  The write is atomic: data goes to a
/// sibling temporary file first and is renamed into place.
pub fn write_dataset(path: &Path, dataset: &Dataset) -> Result<()> {
    let (h, t) = (dataset.history_len, dataset.horizon);
    for w in &dataset.windows {
        if w.history_len() != h || w.horizon() != t || w.commands.len() != h + t + 1 {
            return Err(CoreError::DimensionMismatch {
                context: "write_dataset",
                expected: format!("windows shaped H={h}, T={t}"),
                found: format!(
                    "H={}, T={}, commands={}",
                    w.history_len(),
                    w.horizon(),
                    w.commands.len()
                ),
            });
        }
    }
    let mut buf: Vec<u8> = Vec::new();
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    for count in [
        dataset.windows.len(),
        h,
        t,
        COMMAND_DIM,
        MEASUREMENT_DIM,
        OUTPUT_DIM,
    ] {
        buf.extend_from_slice(&(count as u32).to_le_bytes());
    }
    for w in &dataset.windows {
        for y in &w.measurements {
            for v in y.iter() {
                buf.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        for u in &w.commands {
            for v in [u.vx, u.vy, u.wz] {
                buf.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        for z in &w.targets {
            let v = z.to_vector();
            for e in v.iter() {
                buf.extend_from_slice(&(*e as f32).to_le_bytes());
            }
        }
    }
    atomic_write(path, &buf)
}

/// Writes `bytes` to `path` via a temporary sibling file and rename, so a
/// crash never leaves a truncated artifact behind.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(dir)?;
    }
    let tmp = path.with_extension(format!(
        "{}.tmp-{}",
        path.extension().and_then(|e| e.to_str()).unwrap_or("bin"),
        std::process::id()
    ));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

fn read_u32(r: &mut impl Read, what: &'static str) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| CoreError::MalformedFile {
        kind: "dataset",
        detail: format!("truncated while reading {what}"),
    })?;
    Ok(u32::from_le_bytes(b))
}

fn read_f32_block(r: &mut impl Read, len: usize) -> Result<Vec<f64>> {
    let mut bytes = vec![0u8; len * 4];
    r.read_exact(&mut bytes).map_err(|_| CoreError::MalformedFile {
        kind: "dataset",
        detail: format!("truncated while reading {len} f32 values"),
    })?;
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect())
}

/// Reads a dataset written by [`write_dataset`].
pub fn read_dataset(path: &Path) -> Result<Dataset> {
    let mut f = std::io::BufReader::new(fs::File::open(path)?);
    let mut magic = [0u8; 4];
    f.read_exact(&mut magic).map_err(|_| CoreError::MalformedFile {
        kind: "dataset",
        detail: "file shorter than header".into(),
    })?;
    if &magic != DATASET_MAGIC {
        return Err(CoreError::MalformedFile {
            kind: "dataset",
            detail: format!("bad magic {magic:?}"),
        });
    }
    let version = read_u32(&mut f, "version")?;
    if version != DATASET_VERSION {
        return Err(CoreError::MalformedFile {
            kind: "dataset",
            detail: format!("unsupported version {version}"),
        });
    }
    let n_windows = read_u32(&mut f, "window count")? as usize;
    let h = read_u32(&mut f, "history length")? as usize;
    let t = read_u32(&mut f, "horizon")? as usize;
    let (nu, ny, nz) = (
        read_u32(&mut f, "command dim")? as usize,
        read_u32(&mut f, "measurement dim")? as usize,
        read_u32(&mut f, "output dim")? as usize,
    );
    if (nu, ny, nz) != (COMMAND_DIM, MEASUREMENT_DIM, OUTPUT_DIM) {
        return Err(CoreError::MalformedFile {
            kind: "dataset",
            detail: format!("unexpected dimensions ({nu}, {ny}, {nz})"),
        });
    }
    let mut windows = Vec::with_capacity(n_windows);
    for _ in 0..n_windows {
        let y_flat = read_f32_block(&mut f, (h + 1) * ny)?;
        let u_flat = read_f32_block(&mut f, (h + t + 1) * nu)?;
        let z_flat = read_f32_block(&mut f, t * nz)?;
        let measurements = y_flat
            .chunks_exact(ny)
            .map(DVector::from_column_slice)
            .collect();
        let commands = u_flat.chunks_exact(nu).map(Command::from_slice).collect();
        let targets = z_flat
            .chunks_exact(nz)
            .map(|c| {
                RelativeConfig::from_vector(&DVector::from_column_slice(c))
                    .expect("chunk length fixed")
            })
            .collect();
        windows.push(WindowSample {
            measurements,
            commands,
            targets,
        });
    }
    // Any trailing bytes indicate corruption.
    let mut rest = [0u8; 1];
    if f.read(&mut rest)? != 0 {
        return Err(CoreError::MalformedFile {
            kind: "dataset",
            detail: "trailing bytes after final window".into(),
        });
    }
    Ok(Dataset {
        history_len: h,
        horizon: t,
        windows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn default_surrogate() -> Surrogate {
        Surrogate::new(SurrogateConfig::default()).unwrap()
    }

    // -- Bezier -------------------------------------------------------------

    /// De Casteljau evaluation as an independent oracle.
    fn de_casteljau(points: &[Vector3<f64>], s: f64) -> Vector3<f64> {
        let mut work: Vec<Vector3<f64>> = points.to_vec();
        while work.len() > 1 {
            work = work
                .windows(2)
                .map(|pair| (1.0 - s) * pair[0] + s * pair[1])
                .collect();
        }
        work[0]
    }

    #[test]
    fn bernstein_matches_de_casteljau() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = CommandProfileConfig::default();
        for _ in 0..10 {
            let curve = sample_curve(&cfg, &mut rng);
            for k in 0..=20 {
                let s = k as f64 / 20.0;
                let want = de_casteljau(&curve.control, s);
                let got = curve.eval(s).unwrap();
                assert_relative_eq!(got.vx, want.x, epsilon = 1e-12);
                assert_relative_eq!(got.vy, want.y, epsilon = 1e-12);
                assert_relative_eq!(got.wz, want.z, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn curve_hits_endpoints_and_constant_curves_are_constant() {
        let p = Vector3::new(0.2, -0.1, 0.4);
        let curve = CommandCurve {
            control: vec![p; 4],
            duration: 5.0,
        };
        for s in [0.0, 0.3, 1.0] {
            let c = curve.eval(s).unwrap();
            assert_relative_eq!(c.vx, 0.2);
            assert_relative_eq!(c.vy, -0.1);
            assert_relative_eq!(c.wz, 0.4);
        }
        let curve = CommandCurve {
            control: vec![
                Vector3::new(1.0, 0.0, 0.0),
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(0.0, 0.0, 0.0),
                Vector3::new(0.0, 2.0, 0.0),
            ],
            duration: 1.0,
        };
        assert_relative_eq!(curve.eval(0.0).unwrap().vx, 1.0);
        assert_relative_eq!(curve.eval(1.0).unwrap().vy, 2.0);
    }

    #[test]
    fn curve_rejects_out_of_range_parameter() {
        let curve = CommandCurve {
            control: vec![Vector3::zeros(); 4],
            duration: 1.0,
        };
        assert!(curve.eval(-0.01).is_err());
        assert!(curve.eval(1.01).is_err());
    }

    #[test]
    fn curve_stays_in_control_point_convex_hull() {
        // Bernstein weights are a partition of unity, so every coordinate is
        // bounded by the control-point extremes.
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = CommandProfileConfig::default();
        for _ in 0..20 {
            let curve = sample_curve(&cfg, &mut rng);
            let max_x = curve.control.iter().map(|p| p.x).fold(f64::MIN, f64::max);
            let min_x = curve.control.iter().map(|p| p.x).fold(f64::MAX, f64::min);
            for k in 0..=10 {
                let c = curve.eval(k as f64 / 10.0).unwrap();
                assert!(c.vx <= max_x + 1e-12 && c.vx >= min_x - 1e-12);
            }
        }
    }

    #[test]
    fn profile_has_requested_length_and_stays_in_box() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = CommandProfileConfig::default();
        let cmds = command_profile(&cfg, 1500, 0.02, &mut rng);
        assert_eq!(cmds.len(), 1500);
        assert!(cmds.iter().all(|c| c.inf_norm() <= 0.5));
        // Non-stationary: the profile must actually vary.
        let spread = cmds.iter().map(|c| c.vx).fold(f64::MIN, f64::max)
            - cmds.iter().map(|c| c.vx).fold(f64::MAX, f64::min);
        assert!(spread > 0.2);
    }

    // -- Robocentric transform ----------------------------------------------

    #[test]
    fn anchor_maps_to_origin() {
        let mut cfg = FullBodyConfig::zeros();
        cfg.position = Vector3::new(4.0, -2.0, 0.5);
        cfg.yaw = 1.2;
        let frame = Frame::new(cfg.position, cfg.yaw);
        let rel = robocentric(&cfg, &frame);
        assert_relative_eq!(rel.0.position.norm(), 0.0, epsilon = 1e-12);
        assert_relative_eq!(rel.0.yaw, 0.0);
    }

    #[test]
    fn translation_one_meter_ahead_of_rotated_frame() {
        let mut cfg = FullBodyConfig::zeros();
        let yaw = std::f64::consts::FRAC_PI_2;
        cfg.position = Vector3::new(0.0, 1.0, 0.49);
        cfg.yaw = yaw;
        let frame = Frame::new(Vector3::new(0.0, 0.0, 0.49), yaw);
        let rel = robocentric(&cfg, &frame);
        // One meter along the anchor's forward axis.
        assert_relative_eq!(rel.0.position.x, 1.0, epsilon = 1e-12);
        assert_relative_eq!(rel.0.position.y, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rel.0.position.z, 0.0, epsilon = 1e-12);
        assert_relative_eq!(rel.0.yaw, 0.0);
    }

    #[test]
    fn yaw_difference_wraps_across_pi() {
        let mut cfg = FullBodyConfig::zeros();
        cfg.yaw = -3.0;
        let frame = Frame::new(Vector3::zeros(), 3.0);
        let rel = robocentric(&cfg, &frame);
        // -3 - 3 = -6 wraps to +0.283...
        assert_relative_eq!(rel.0.yaw, 2.0 * std::f64::consts::PI - 6.0, epsilon = 1e-12);
    }

    #[test]
    fn round_trip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let mut cfg = FullBodyConfig::zeros();
            cfg.position = Vector3::new(
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(0.0..1.0),
            );
            cfg.yaw = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
            cfg.roll = rng.gen_range(-0.2..0.2);
            cfg.pitch = rng.gen_range(-0.2..0.2);
            for j in cfg.joints.iter_mut() {
                *j = rng.gen_range(-1.5..1.5);
            }
            let frame = Frame::new(
                Vector3::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0), 0.49),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            );
            let back = global_project(&robocentric(&cfg, &frame), &frame);
            assert_relative_eq!((back.position - cfg.position).norm(), 0.0, epsilon = 1e-9);
            assert_relative_eq!(wrap_angle(back.yaw - cfg.yaw), 0.0, epsilon = 1e-9);
            assert_eq!(back.joints, cfg.joints);
            assert_eq!(back.roll, cfg.roll);
        }
    }

    #[test]
    fn relative_values_are_start_invariant() {
        // The same command script from two different start poses produces
        // identical robocentric windows (up to noise, disabled here).
        let mut cfg = SurrogateConfig::default();
        cfg.measurement_noise = 0.0;
        let s = Surrogate::new(cfg).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cmds = command_profile(&CommandProfileConfig::default(), 300, 0.02, &mut rng);
        let log_a = simulate_trajectory(&s, PlanarPose::default(), &cmds, &mut rng);
        let log_b = simulate_trajectory(
            &s,
            PlanarPose::new(5.0, -2.0, 2.5),
            &cmds,
            &mut rng,
        );
        let wa = extract_windows(&log_a, 10, 50, 37);
        let wb = extract_windows(&log_b, 10, 50, 37);
        assert!(!wa.is_empty());
        for (a, b) in wa.iter().zip(wb.iter()) {
            for (ta, tb) in a.targets.iter().zip(b.targets.iter()) {
                assert_relative_eq!((ta.to_vector() - tb.to_vector()).norm(), 0.0, epsilon = 1e-9);
            }
        }
    }

    // -- Windowing ----------------------------------------------------------

    #[test]
    fn window_shapes_and_counts() {
        let s = default_surrogate();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let cmds = vec![Command::new(0.3, 0.0, 0.1); 260];
        let log = simulate_trajectory(&s, PlanarPose::default(), &cmds, &mut rng);
        let windows = extract_windows(&log, 30, 200, 10);
        // Window needs 231 commands; starts 0, 10, 20 fit in 260.
        assert_eq!(windows.len(), 3);
        for w in &windows {
            assert_eq!(w.measurements.len(), 31);
            assert_eq!(w.commands.len(), 231);
            assert_eq!(w.targets.len(), 200);
            assert_eq!(w.history_len(), 30);
            assert_eq!(w.horizon(), 200);
            let (ys, us) = w.observer_inputs();
            assert_eq!(ys.len(), 30);
            assert_eq!(us.len(), 30);
            assert_eq!(w.predictor_commands().len(), 200);
        }
    }

    #[test]
    fn too_short_log_produces_no_windows() {
        let s = default_surrogate();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let cmds = vec![Command::zero(); 100];
        let log = simulate_trajectory(&s, PlanarPose::default(), &cmds, &mut rng);
        assert!(extract_windows(&log, 30, 200, 10).is_empty());
    }

    #[test]
    fn first_target_is_one_step_after_anchor() {
        let s = default_surrogate();
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let cmds = vec![Command::new(0.4, 0.0, 0.0); 60];
        let log = simulate_trajectory(&s, PlanarPose::default(), &cmds, &mut rng);
        let windows = extract_windows(&log, 10, 20, 100);
        let w = &windows[0];
        let anchor = &log.configs[10];
        let frame = Frame::new(anchor.position, anchor.yaw);
        let expect = robocentric(&log.configs[11], &frame);
        assert_relative_eq!(
            (w.targets[0].to_vector() - expect.to_vector()).norm(),
            0.0,
            epsilon = 1e-12
        );
        // Forward motion: the first relative x displacement is positive.
        assert!(w.targets[0].0.position.x > 0.0);
    }

    #[test]
    fn generate_dataset_produces_expected_volume() {
        let cfg = DatasetGenConfig {
            total_duration: 60.0,
            trajectory_duration: 30.0,
            history_len: 30,
            horizon: 100,
            stride: 50,
            dynamics_spread: 0.2,
            profile: CommandProfileConfig::default(),
        };
        let data = generate_dataset(&cfg, &SurrogateConfig::default(), 9).unwrap();
        // Each 1500-step trajectory yields floor((1500-131)/50)+1 = 28 windows.
        assert_eq!(data.windows.len(), 2 * 28);
        assert_eq!(data.history_len, 30);
        assert_eq!(data.horizon, 100);
    }

    #[test]
    fn split_keeps_blocks_contiguous() {
        let cfg = DatasetGenConfig {
            total_duration: 60.0,
            trajectory_duration: 30.0,
            history_len: 10,
            horizon: 50,
            stride: 20,
            dynamics_spread: 0.0,
            profile: CommandProfileConfig::default(),
        };
        let data = generate_dataset(&cfg, &SurrogateConfig::default(), 10).unwrap();
        let (train, test) = data.split(0.2);
        assert_eq!(train.len() + test.len(), data.windows.len());
        assert!(test.len() >= data.windows.len() / 6);
        assert!(train.len() > test.len());
    }

    #[test]
    fn same_seed_reproduces_dataset_exactly() {
        let cfg = DatasetGenConfig {
            total_duration: 30.0,
            trajectory_duration: 30.0,
            history_len: 10,
            horizon: 30,
            stride: 40,
            ..DatasetGenConfig::default()
        };
        let a = generate_dataset(&cfg, &SurrogateConfig::default(), 123).unwrap();
        let b = generate_dataset(&cfg, &SurrogateConfig::default(), 123).unwrap();
        assert_eq!(a.windows.len(), b.windows.len());
        for (wa, wb) in a.windows.iter().zip(b.windows.iter()) {
            for (ya, yb) in wa.measurements.iter().zip(wb.measurements.iter()) {
                assert_eq!(ya, yb);
            }
            for (ta, tb) in wa.targets.iter().zip(wb.targets.iter()) {
                assert_eq!(ta.to_vector(), tb.to_vector());
            }
        }
    }

    // -- Serialization ------------------------------------------------------

    #[test]
    fn dataset_round_trips_through_file_within_f32_precision() {
        let cfg = DatasetGenConfig {
            total_duration: 30.0,
            trajectory_duration: 30.0,
            history_len: 10,
            horizon: 30,
            stride: 100,
            ..DatasetGenConfig::default()
        };
        let data = generate_dataset(&cfg, &SurrogateConfig::default(), 77).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.psrd");
        write_dataset(&path, &data).unwrap();
        let back = read_dataset(&path).unwrap();
        assert_eq!(back.history_len, data.history_len);
        assert_eq!(back.horizon, data.horizon);
        assert_eq!(back.windows.len(), data.windows.len());
        for (a, b) in data.windows.iter().zip(back.windows.iter()) {
            for (ya, yb) in a.measurements.iter().zip(b.measurements.iter()) {
                assert!((ya - yb).amax() < 1e-6);
            }
            for (ua, ub) in a.commands.iter().zip(b.commands.iter()) {
                assert!((ua.vx - ub.vx).abs() < 1e-7);
            }
            for (ta, tb) in a.targets.iter().zip(b.targets.iter()) {
                assert!((ta.to_vector() - tb.to_vector()).amax() < 1e-5);
            }
        }
    }

    #[test]
    fn same_dataset_serializes_to_identical_bytes() {
        let cfg = DatasetGenConfig {
            total_duration: 30.0,
            trajectory_duration: 30.0,
            history_len: 5,
            horizon: 20,
            stride: 200,
            ..DatasetGenConfig::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let (p1, p2) = (dir.path().join("a.psrd"), dir.path().join("b.psrd"));
        let d1 = generate_dataset(&cfg, &SurrogateConfig::default(), 5).unwrap();
        let d2 = generate_dataset(&cfg, &SurrogateConfig::default(), 5).unwrap();
        write_dataset(&p1, &d1).unwrap();
        write_dataset(&p2, &d2).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
    }

    #[test]
    fn malformed_files_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.psrd");
        fs::write(&path, b"PSRX\x01\x00\x00\x00").unwrap();
        assert!(read_dataset(&path).is_err());
        fs::write(&path, b"PS").unwrap();
        assert!(read_dataset(&path).is_err());
        // Valid header but truncated payload.
        let cfg = DatasetGenConfig {
            total_duration: 30.0,
            trajectory_duration: 30.0,
            history_len: 5,
            horizon: 20,
            stride: 300,
            ..DatasetGenConfig::default()
        };
        let data = generate_dataset(&cfg, &SurrogateConfig::default(), 6).unwrap();
        write_dataset(&path, &data).unwrap();
        let bytes = fs::read(&path).unwrap();
        fs::write(&path, &bytes[..bytes.len() - 10]).unwrap();
        assert!(read_dataset(&path).is_err());
        // Trailing garbage.
        let mut extended = bytes.clone();
        extended.push(0);
        fs::write(&path, &extended).unwrap();
        assert!(read_dataset(&path).is_err());
    }
}

//! Robot-occupancy prediction: which points in the base frame does the robot
//! body occupy at a given joint configuration?
//!
//! Two implementations are provided.  [`fk_occupancy`] is the analytic
//! forward-kinematics oracle: it samples a fixed grid over the torso box
//! surface and fixed stations along each two-link leg chain, producing an
//! ordered point cloud of constant size.  [`OccupancyModel`] is a small ReLU
//! network trained to reproduce the oracle from the 12 joint angles; it
//! predicts a residual on top of the nominal-stance cloud, evaluates whole
//! batches with dense matrix products, and is the representation the planner
//! queries inside its sampling loop.
//!
//! Base-frame convention: origin at the torso centre, x forward, y left,
//! z up; the ground sits near z = -standing_height.

use nalgebra::{DMatrix, DVector, Vector3};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::{MlpParams, TensorSet};
use crate::surrogate::SurrogateConfig;
use crate::types::{Command, JOINT_DIM};

/// Torso and leg dimensions needed for forward kinematics, taken from the
/// plant description so the occupancy cloud matches the simulated robot.
#[derive(Debug, Clone, PartialEq)]
pub struct BodyGeometry {
    /// Torso box full extents (x, y, z) in meters.
    pub body_size: Vector3<f64>,
    /// Hip socket positions in the base frame, leg order FL, FR, RL, RR.
    pub hip_positions: [Vector3<f64>; 4],
    /// Upper (hip-to-knee) link length in meters.
    pub upper_leg_length: f64,
    /// Lower (knee-to-foot) link length in meters.
    pub lower_leg_length: f64,
}

impl BodyGeometry {
    /// Extracts the geometry from a plant configuration.
    pub fn from_surrogate(cfg: &SurrogateConfig) -> Self {
        let [hx, hy, hz] = cfg.hip_offset;
        BodyGeometry {
            body_size: Vector3::new(cfg.body_size[0], cfg.body_size[1], cfg.body_size[2]),
            hip_positions: [
                Vector3::new(hx, hy, hz),
                Vector3::new(hx, -hy, hz),
                Vector3::new(-hx, hy, hz),
                Vector3::new(-hx, -hy, hz),
            ],
            upper_leg_length: cfg.upper_leg_length,
            lower_leg_length: cfg.lower_leg_length,
        }
    }
}

/// How densely the torso surface and leg links are sampled.  The default
/// yields exactly 780 points; the coarse variant is for speed-sensitive
/// callers such as the planner's inner loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OccupancySampling {
    /// Torso-face grid resolution along x.
    pub face_nx: usize,
    /// Torso-face grid resolution along y.
    pub face_ny: usize,
    /// Torso-face grid resolution along z.
    pub face_nz: usize,
    /// Sample stations along each upper leg link.
    pub upper_samples: usize,
    /// Sample stations along each lower leg link.
    pub lower_samples: usize,
}

impl OccupancySampling {
    /// Coarse sampling for the planner's inner loop (94 points).
    pub fn coarse() -> Self {
        OccupancySampling {
            face_nx: 5,
            face_ny: 3,
            face_nz: 2,
            upper_samples: 4,
            lower_samples: 4,
        }
    }

    /// Total number of points produced per configuration.
    pub fn point_count(&self) -> usize {
        let faces = 2 * (self.face_nx * self.face_ny
            + self.face_ny * self.face_nz
            + self.face_nx * self.face_nz);
        faces + 4 * (self.upper_samples + self.lower_samples)
    }
}

impl Default for OccupancySampling {
    /// 2·(15·8 + 8·6 + 15·6) torso points + 4·(30 + 36) leg points = 780.
    fn default() -> Self {
        OccupancySampling {
            face_nx: 15,
            face_ny: 8,
            face_nz: 6,
            upper_samples: 30,
            lower_samples: 36,
        }
    }
}

/// Ordered, fixed-size point cloud over the robot's occupied volume,
/// expressed in the base frame.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancySet {
    /// The sampled points; length is constant for a given sampling density.
    pub points: Vec<Vector3<f64>>,
}

impl OccupancySet {
    /// Flattens to `[x0, y0, z0, x1, ...]`, the layout used by the learned
    /// model's output head.
    pub fn to_flat(&self) -> DVector<f64> {
        let mut v = DVector::zeros(3 * self.points.len());
        for (i, p) in self.points.iter().enumerate() {
            v[3 * i] = p.x;
            v[3 * i + 1] = p.y;
            v[3 * i + 2] = p.z;
        }
        v
    }

    /// Inverse of [`OccupancySet::to_flat`].
    pub fn from_flat(flat: &[f64]) -> Self {
        assert_eq!(flat.len() % 3, 0, "flat occupancy length must be 3M");
        let points = flat
            .chunks_exact(3)
            .map(|c| Vector3::new(c[0], c[1], c[2]))
            .collect();
        OccupancySet { points }
    }
}

/// Evaluates the two-link leg chain for one leg.
///
/// The abduction angle rolls the whole leg about the body x axis; hip and
/// knee angles pitch the upper and lower links about the body y axis.  Zero
/// angles point the leg straight down.
fn leg_points(
    hip: &Vector3<f64>,
    abduction: f64,
    hip_pitch: f64,
    knee_pitch: f64,
    upper_len: f64,
    lower_len: f64,
    upper_samples: usize,
    lower_samples: usize,
    out: &mut Vec<Vector3<f64>>,
) {
    let (sa, ca) = abduction.sin_cos();
    // R_x(abd) · R_y(pitch) applied to (0, 0, -len):
    //   x = -len·sin(pitch), y = len·sa·cos(pitch), z = -len·ca·cos(pitch)
    let segment = |pitch: f64, len: f64| -> Vector3<f64> {
        let (sp, cp) = pitch.sin_cos();
        Vector3::new(-len * sp, len * sa * cp, -len * ca * cp)
    };
    let knee = hip + segment(hip_pitch, upper_len);
    let foot = knee + segment(hip_pitch + knee_pitch, lower_len);
    for i in 0..upper_samples {
        let t = (i as f64 + 0.5) / upper_samples as f64;
        out.push(hip + (knee - hip) * t);
    }
    for i in 0..lower_samples {
        let t = (i as f64 + 0.5) / lower_samples as f64;
        out.push(knee + (foot - knee) * t);
    }
}

/// Computes the occupancy cloud for joint angles `theta` (layout
/// `[abd, hip, knee]` per leg, legs ordered FL, FR, RL, RR).
///
/// The output ordering is fixed: torso faces (top, bottom, left, right,
/// front, back), then legs FL, FR, RL, RR, each hip-to-foot.  Identical
/// inputs give bitwise-identical outputs.
pub fn fk_occupancy(
    geom: &BodyGeometry,
    sampling: &OccupancySampling,
    theta: &DVector<f64>,
) -> Result<OccupancySet> {
    if theta.len() != JOINT_DIM {
        return Err(CoreError::DimensionMismatch {
            context: "fk_occupancy joint vector",
            expected: JOINT_DIM.to_string(),
            found: theta.len().to_string(),
        });
    }
    if !theta.iter().all(|v| v.is_finite()) {
        return Err(CoreError::NonFinite("fk_occupancy joint vector"));
    }
    let half = geom.body_size / 2.0;
    let mut points = Vec::with_capacity(sampling.point_count());
    let grid = |n: usize, half: f64, i: usize| -> f64 {
        // Cell centres of an n-point grid spanning [-half, half].
        (((i as f64 + 0.5) / n as f64) * 2.0 - 1.0) * half
    };
    // Top and bottom faces (z = ±half.z).
    for &z in &[half.z, -half.z] {
        for ix in 0..sampling.face_nx {
            for iy in 0..sampling.face_ny {
                points.push(Vector3::new(
                    grid(sampling.face_nx, half.x, ix),
                    grid(sampling.face_ny, half.y, iy),
                    z,
                ));
            }
        }
    }
    // Left and right faces (y = ±half.y).
    for &y in &[half.y, -half.y] {
        for ix in 0..sampling.face_nx {
            for iz in 0..sampling.face_nz {
                points.push(Vector3::new(
                    grid(sampling.face_nx, half.x, ix),
                    y,
                    grid(sampling.face_nz, half.z, iz),
                ));
            }
        }
    }
    // Front and back faces (x = ±half.x).
    for &x in &[half.x, -half.x] {
        for iy in 0..sampling.face_ny {
            for iz in 0..sampling.face_nz {
                points.push(Vector3::new(
                    x,
                    grid(sampling.face_ny, half.y, iy),
                    grid(sampling.face_nz, half.z, iz),
                ));
            }
        }
    }
    for (leg, hip) in geom.hip_positions.iter().enumerate() {
        leg_points(
            hip,
            theta[3 * leg],
            theta[3 * leg + 1],
            theta[3 * leg + 2],
            geom.upper_leg_length,
            geom.lower_leg_length,
            sampling.upper_samples,
            sampling.lower_samples,
            &mut points,
        );
    }
    debug_assert_eq!(points.len(), sampling.point_count());
    Ok(OccupancySet { points })
}

/// Draws joint-angle samples from the plant's operating distribution by
/// driving it with random piecewise-constant commands and recording the gait
/// configurations it passes through.
pub fn gait_joint_samples(
    cfg: &SurrogateConfig,
    count: usize,
    seed: u64,
) -> Result<Vec<DVector<f64>>> {
    use crate::surrogate::Surrogate;
    use crate::types::PlanarPose;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let surrogate = Surrogate::new(cfg.clone())?;
    let mut state = surrogate.initial_state(PlanarPose::new(0.0, 0.0, 0.0));
    let mut samples = Vec::with_capacity(count);
    let mut command = Command::zero();
    let mut steps_left = 0usize;
    // Skip a few steps between samples so the set spans many gait phases.
    while samples.len() < count {
        if steps_left == 0 {
            command = Command::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.3..0.3),
                rng.gen_range(-0.5..0.5),
            );
            steps_left = rng.gen_range(25..150);
        }
        steps_left -= 1;
        surrogate.step(&mut state, command);
        let config = surrogate.full_config(&state);
        samples.push(DVector::from_row_slice(&config.joints));
    }
    Ok(samples)
}

/// Hyperparameters for fitting the occupancy network.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OccupancyTrainConfig {
    /// Hidden layer widths of the ReLU network.
    pub hidden: Vec<usize>,
    /// Number of passes over the training set.
    pub epochs: usize,
    /// Minibatch size.
    pub batch_size: usize,
    /// Adam step size.
    pub learning_rate: f64,
    /// Fraction of samples held out for evaluation.
    pub holdout_fraction: f64,
    /// Seed for initialization and shuffling.
    pub seed: u64,
}

impl Default for OccupancyTrainConfig {
    fn default() -> Self {
        OccupancyTrainConfig {
            hidden: vec![64, 128],
            epochs: 120,
            batch_size: 64,
            learning_rate: 1e-2,
            holdout_fraction: 0.2,
            seed: 0,
        }
    }
}

/// Learned occupancy predictor: a fixed nominal-stance cloud plus a network
/// that regresses the joint-dependent residual from standardized joint
/// angles.
#[derive(Debug, Clone, PartialEq)]
pub struct OccupancyModel {
    /// Per-joint offset subtracted from the input (training-set mean).
    pub input_offset: DVector<f64>,
    /// Per-joint reciprocal scale applied after the offset.
    pub input_scale: DVector<f64>,
    /// Flattened nominal-stance cloud (3M entries); the network's output is
    /// added to this.
    pub base: DVector<f64>,
    /// Residual network, 12 standardized inputs to 3M outputs.
    pub net: MlpParams,
}

impl OccupancyModel {
    /// Number of points per configuration.
    pub fn point_count(&self) -> usize {
        self.base.len() / 3
    }

    fn standardize(&self, theta: &DVector<f64>) -> DVector<f64> {
        (theta - &self.input_offset).component_mul(&self.input_scale)
    }

    /// Predicts the cloud for a single configuration.
    pub fn eval(&self, theta: &DVector<f64>) -> Result<OccupancySet> {
        let flat = self.base.clone() + self.net.forward(&self.standardize(theta))?;
        Ok(OccupancySet::from_flat(flat.as_slice()))
    }

    /// Predicts clouds for a batch of configurations given as the columns of
    /// a 12×B matrix; returns a 3M×B matrix of flattened clouds.
    pub fn eval_batch(&self, thetas: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        if thetas.nrows() != self.net.input_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "occupancy batch input",
                expected: self.net.input_dim().to_string(),
                found: thetas.nrows().to_string(),
            });
        }
        let mut activations = thetas.clone();
        for mut col in activations.column_iter_mut() {
            col -= &self.input_offset;
            col.component_mul_assign(&self.input_scale);
        }
        let last = self.net.weights.len() - 1;
        for (i, (w, b)) in self
            .net
            .weights
            .iter()
            .zip(self.net.biases.iter())
            .enumerate()
        {
            let mut z = w * &activations;
            for mut col in z.column_iter_mut() {
                col += b;
            }
            if i < last {
                z.apply(|v| *v = v.max(0.0));
            }
            activations = z;
        }
        for mut col in activations.column_iter_mut() {
            col += &self.base;
        }
        Ok(activations)
    }

    /// Mean Euclidean distance between predicted and oracle points, averaged
    /// over points and configurations.
    pub fn mean_point_error(
        &self,
        geom: &BodyGeometry,
        sampling: &OccupancySampling,
        thetas: &[DVector<f64>],
    ) -> Result<f64> {
        if thetas.is_empty() {
            return Err(CoreError::InsufficientData {
                context: "occupancy evaluation",
                need: 1,
                have: 0,
            });
        }
        let mut total = 0.0;
        let mut count = 0usize;
        for theta in thetas {
            let truth = fk_occupancy(geom, sampling, theta)?;
            let pred = self.eval(theta)?;
            for (a, b) in truth.points.iter().zip(pred.points.iter()) {
                total += (a - b).norm();
                count += 1;
            }
        }
        Ok(total / count as f64)
    }
}

/// Dense forward/backward pass for the residual network on a batch.
/// Returns the batch MSE (per output coordinate) and writes parameter
/// gradients into `grads`.
fn batch_mse_and_grad(
    net: &MlpParams,
    grads: &mut MlpParams,
    inputs: &DMatrix<f64>,
    targets: &DMatrix<f64>,
) -> f64 {
    let batch = inputs.ncols();
    let last = net.weights.len() - 1;
    // Forward, keeping each layer's post-activation output.
    let mut activations: Vec<DMatrix<f64>> = vec![inputs.clone()];
    for (i, (w, b)) in net.weights.iter().zip(net.biases.iter()).enumerate() {
        let mut z = w * activations.last().expect("nonempty");
        for mut col in z.column_iter_mut() {
            col += b;
        }
        if i < last {
            z.apply(|v| *v = v.max(0.0));
        }
        activations.push(z);
    }
    let output = activations.last().expect("output layer");
    let scale = 1.0 / (batch * output.nrows()) as f64;
    let diff = output - targets;
    let loss = scale * diff.iter().map(|v| v * v).sum::<f64>();
    // Backward: delta holds dLoss/d(pre-activation) of the current layer.
    let mut delta = diff * (2.0 * scale);
    for i in (0..net.weights.len()).rev() {
        if i < last {
            // ReLU mask: activations[i + 1] stores max(z, 0).
            for (d, a) in delta.iter_mut().zip(activations[i + 1].iter()) {
                if *a <= 0.0 {
                    *d = 0.0;
                }
            }
        }
        grads.weights[i] = &delta * activations[i].transpose();
        grads.biases[i] = DVector::from_iterator(
            delta.nrows(),
            delta.row_iter().map(|r| r.iter().sum::<f64>()),
        );
        if i > 0 {
            delta = net.weights[i].transpose() * delta;
        }
    }
    loss
}

/// Fits the residual network to the FK oracle over the supplied joint
/// samples.  Returns the trained model and its held-out mean point error.
pub fn train_occupancy(
    geom: &BodyGeometry,
    sampling: &OccupancySampling,
    thetas: &[DVector<f64>],
    cfg: &OccupancyTrainConfig,
) -> Result<(OccupancyModel, f64)> {
    use crate::nn::{Adam, AdamConfig};

    let holdout = ((thetas.len() as f64) * cfg.holdout_fraction).round() as usize;
    if thetas.len() < 2 || holdout == 0 || holdout >= thetas.len() {
        return Err(CoreError::InsufficientData {
            context: "occupancy training",
            need: 10,
            have: thetas.len(),
        });
    }
    let (train_set, test_set) = thetas.split_at(thetas.len() - holdout);

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let nominal = fk_occupancy(geom, sampling, &DVector::zeros(JOINT_DIM))?;
    let base = nominal.to_flat();
    let out_dim = base.len();
    let mut net = MlpParams::init(JOINT_DIM, &cfg.hidden, out_dim, 1.0, &mut rng);

    // Standardize inputs from training-set statistics.
    let mut input_offset = DVector::zeros(JOINT_DIM);
    for theta in train_set {
        input_offset += theta;
    }
    input_offset /= train_set.len() as f64;
    let mut variance = DVector::zeros(JOINT_DIM);
    for theta in train_set {
        let d = theta - &input_offset;
        variance += d.component_mul(&d);
    }
    variance /= train_set.len() as f64;
    let input_scale = variance.map(|v| 1.0 / v.sqrt().max(1e-3));

    // Precompute standardized-input and residual-target matrices once.
    let to_matrix = |set: &[DVector<f64>]| -> Result<(DMatrix<f64>, DMatrix<f64>)> {
        let mut x = DMatrix::zeros(JOINT_DIM, set.len());
        let mut y = DMatrix::zeros(out_dim, set.len());
        for (j, theta) in set.iter().enumerate() {
            x.set_column(j, &(theta - &input_offset).component_mul(&input_scale));
            let flat = fk_occupancy(geom, sampling, theta)?.to_flat();
            y.set_column(j, &(flat - &base));
        }
        Ok((x, y))
    };
    let (train_x, train_y) = to_matrix(train_set)?;

    let adam_cfg = AdamConfig {
        learning_rate: cfg.learning_rate,
        ..AdamConfig::default()
    };
    let mut adam = Adam::new(adam_cfg, &net);
    let mut grads = net.zeroed();
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..cfg.epochs {
        // Fisher-Yates shuffle of the sample order.
        for i in (1..order.len()).rev() {
            order.swap(i, rng.gen_range(0..=i));
        }
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let x = train_x.select_columns(chunk.iter());
            let y = train_y.select_columns(chunk.iter());
            let loss = batch_mse_and_grad(&net, &mut grads, &x, &y);
            if !loss.is_finite() {
                return Err(CoreError::Diverged {
                    epoch,
                    step: adam.steps() as usize,
                    detail: "occupancy batch loss is not finite".into(),
                });
            }
            adam.step(&mut net, &grads);
        }
    }

    let model = OccupancyModel {
        input_offset,
        input_scale,
        base,
        net,
    };
    let err = model.mean_point_error(geom, sampling, test_set)?;
    Ok((model, err))
}

/// Saves an occupancy model in the shared named-tensor checkpoint format.
pub fn save_occupancy(path: &std::path::Path, model: &OccupancyModel) -> Result<()> {
    use crate::checkpoint::{write_tensors, TensorData};
    let mut tensors = vec![
        (
            "norm.offset".to_string(),
            TensorData::Vector(model.input_offset.clone()),
        ),
        (
            "norm.scale".to_string(),
            TensorData::Vector(model.input_scale.clone()),
        ),
        ("base".to_string(), TensorData::Vector(model.base.clone())),
    ];
    for (i, w) in model.net.weights.iter().enumerate() {
        tensors.push((format!("net.weight{i}"), TensorData::Matrix(w.clone())));
    }
    for (i, b) in model.net.biases.iter().enumerate() {
        tensors.push((format!("net.bias{i}"), TensorData::Vector(b.clone())));
    }
    write_tensors(path, &tensors)
}

/// Loads an occupancy model saved by [`save_occupancy`].
pub fn load_occupancy(path: &std::path::Path) -> Result<OccupancyModel> {
    use crate::checkpoint::{read_tensors, TensorData};
    let mut map = read_tensors(path)?;
    let mut take_vec = |name: &str| -> Result<DVector<f64>> {
        match map.remove(name) {
            Some(TensorData::Vector(v)) => Ok(v),
            Some(TensorData::Matrix(_)) => Err(CoreError::MalformedFile {
                kind: "occupancy checkpoint",
                detail: format!("tensor {name} should be a vector"),
            }),
            None => Err(CoreError::MalformedFile {
                kind: "occupancy checkpoint",
                detail: format!("missing tensor {name}"),
            }),
        }
    };
    let input_offset = take_vec("norm.offset")?;
    let input_scale = take_vec("norm.scale")?;
    let base = take_vec("base")?;
    let mut weights = Vec::new();
    let mut biases = Vec::new();
    let mut i = 0;
    while let Some(TensorData::Matrix(w)) = map.remove(&format!("net.weight{i}")) {
        weights.push(w);
        match map.remove(&format!("net.bias{i}")) {
            Some(TensorData::Vector(b)) => biases.push(b),
            _ => {
                return Err(CoreError::MalformedFile {
                    kind: "occupancy checkpoint",
                    detail: format!("missing tensor net.bias{i}"),
                })
            }
        }
        i += 1;
    }
    if weights.is_empty() || !map.is_empty() {
        return Err(CoreError::MalformedFile {
            kind: "occupancy checkpoint",
            detail: "unexpected tensor layout".into(),
        });
    }
    let model = OccupancyModel {
        input_offset,
        input_scale,
        base,
        net: MlpParams { weights, biases },
    };
    if model.base.len() % 3 != 0
        || model.net.input_dim() != JOINT_DIM
        || model.net.output_dim() != model.base.len()
    {
        return Err(CoreError::MalformedFile {
            kind: "occupancy checkpoint",
            detail: "inconsistent tensor shapes".into(),
        });
    }
    Ok(model)
}

//! Parameter containers for the observer-predictor pair.
//!
//! The latent state `x` lives in `R^{n_x}`.  The observer evolves it from
//! proprioceptive measurements and commands:
//!
//! ```text
//!   x+ = A x + g([x; u]) + K (y - C_y x)
//! ```
//!
//! with `A` linear dynamics, `g` a ReLU network capturing the command-driven
//! nonlinearity, and `K` the innovation gain.  The predictor replaces the
//! innovation with a recurrent cell during the prediction window,
//!
//! ```text
//!   x_t = f_gru(x_{t-1}, u_t),    z'_t = [C_u; C_y] x_t
//! ```
//!
//! sharing `C_y` with the observer so that the decoded configuration agrees
//! with the measurement model.  `C_u` decodes the externally sensed part of
//! the configuration (position and yaw, in the robocentric frame).

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{CoreError, Result};
use crate::nn::{GruParams, MlpParams, TensorSet};
use crate::types::{COMMAND_DIM, MEASUREMENT_DIM, POSE_DIM};

/// Structural hyperparameters of the model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Latent state dimension `n_x`.
    pub state_dim: usize,
    /// Hidden layer widths of the observer's nonlinearity `g`.
    pub g_hidden: Vec<usize>,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            state_dim: 128,
            g_hidden: vec![128, 128, 128],
        }
    }
}

/// Observer parameters: linear dynamics, innovation gain, measurement map,
/// and the command-driven nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverParams {
    /// Latent dynamics matrix `A` (`n_x x n_x`).
    pub a: DMatrix<f64>,
    /// Innovation gain `K` (`n_x x 14`).
    pub k: DMatrix<f64>,
    /// Measurement map `C_y` (`14 x n_x`).
    pub c_y: DMatrix<f64>,
    /// Nonlinearity `g : [x; u] -> R^{n_x}`.
    pub g: MlpParams,
}

impl ObserverParams {
    /// Latent dimension.
    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    /// Checks internal shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(CoreError::DimensionMismatch {
                context: "ObserverParams::validate",
                expected: format!("square A, {n} x {n}"),
                found: format!("{} x {}", self.a.nrows(), self.a.ncols()),
            });
        }
        if self.k.shape() != (n, MEASUREMENT_DIM) {
            return Err(CoreError::DimensionMismatch {
                context: "ObserverParams::validate",
                expected: format!("K {n} x {MEASUREMENT_DIM}"),
                found: format!("{} x {}", self.k.nrows(), self.k.ncols()),
            });
        }
        if self.c_y.shape() != (MEASUREMENT_DIM, n) {
            return Err(CoreError::DimensionMismatch {
                context: "ObserverParams::validate",
                expected: format!("C_y {MEASUREMENT_DIM} x {n}"),
                found: format!("{} x {}", self.c_y.nrows(), self.c_y.ncols()),
            });
        }
        if self.g.input_dim() != n + COMMAND_DIM || self.g.output_dim() != n {
            return Err(CoreError::DimensionMismatch {
                context: "ObserverParams::validate",
                expected: format!("g mapping {} -> {n}", n + COMMAND_DIM),
                found: format!("{} -> {}", self.g.input_dim(), self.g.output_dim()),
            });
        }
        if !self.all_finite() {
            return Err(CoreError::NonFinite("observer parameters"));
        }
        Ok(())
    }
}

impl TensorSet for ObserverParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = vec![self.a.as_slice(), self.k.as_slice(), self.c_y.as_slice()];
        out.extend(self.g.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![
            self.a.as_mut_slice(),
            self.k.as_mut_slice(),
            self.c_y.as_mut_slice(),
        ];
        out.extend(self.g.tensors_mut());
        out
    }
}

/// Predictor parameters: recurrent latent dynamics and the pose decoder.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictorParams {
    /// Recurrent cell advancing the latent state under commands.
    pub gru: GruParams,
    /// Decoder for the externally sensed outputs (`4 x n_x`): robocentric
    /// position and yaw.
    pub c_u: DMatrix<f64>,
}

impl PredictorParams {
    /// Latent dimension.
    pub fn state_dim(&self) -> usize {
        self.gru.hidden_dim()
    }

    /// Checks internal shape consistency and finiteness.
    pub fn validate(&self) -> Result<()> {
        let n = self.gru.hidden_dim();
        if self.gru.input_dim() != COMMAND_DIM {
            return Err(CoreError::DimensionMismatch {
                context: "PredictorParams::validate",
                expected: format!("GRU input {COMMAND_DIM}"),
                found: format!("{}", self.gru.input_dim()),
            });
        }
        if self.c_u.shape() != (POSE_DIM, n) {
            return Err(CoreError::DimensionMismatch {
                context: "PredictorParams::validate",
                expected: format!("C_u {POSE_DIM} x {n}"),
                found: format!("{} x {}", self.c_u.nrows(), self.c_u.ncols()),
            });
        }
        if !self.all_finite() {
            return Err(CoreError::NonFinite("predictor parameters"));
        }
        Ok(())
    }
}

impl TensorSet for PredictorParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.gru.tensors();
        out.push(self.c_u.as_slice());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.gru.tensors_mut();
        out.push(self.c_u.as_mut_slice());
        out
    }
}

/// Complete trainable model: observer plus predictor with shared `C_y`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// Measurement-driven state estimator.
    pub observer: ObserverParams,
    /// Command-driven forward rollout.
    pub predictor: PredictorParams,
}

impl ModelParams {
    /// Random initialization.
    ///
    /// `A` starts at `0.9 I` so the linear part is already contractive; the
    /// gain, maps, and networks start small so early training is dominated
    /// by the prediction objective while the contraction penalty reins in
    /// the nonlinearity's growth.
    pub fn init<R: Rng + ?Sized>(cfg: &ModelConfig, rng: &mut R) -> Self {
        let n = cfg.state_dim;
        assert!(n > 0, "state dimension must be positive");
        let a = DMatrix::from_diagonal_element(n, n, 0.9);
        let uniform = |rows: usize, cols: usize, gain: f64, rng: &mut R| {
            let bound = gain * (6.0 / cols as f64).sqrt();
            DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
        };
        let k = uniform(n, MEASUREMENT_DIM, 0.2, rng);
        let c_y = uniform(MEASUREMENT_DIM, n, 0.5, rng);
        let g = MlpParams::init(n + COMMAND_DIM, &cfg.g_hidden, n, 0.3, rng);
        let gru = GruParams::init(COMMAND_DIM, n, rng);
        let c_u = uniform(POSE_DIM, n, 0.5, rng);
        Self {
            observer: ObserverParams { a, k, c_y, g },
            predictor: PredictorParams { gru, c_u },
        }
    }

    /// Latent dimension.
    pub fn state_dim(&self) -> usize {
        self.observer.state_dim()
    }

    /// Checks both halves and their shared latent dimension.
    pub fn validate(&self) -> Result<()> {
        self.observer.validate()?;
        self.predictor.validate()?;
        if self.observer.state_dim() != self.predictor.state_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "ModelParams::validate",
                expected: format!("shared latent dimension {}", self.observer.state_dim()),
                found: format!("predictor uses {}", self.predictor.state_dim()),
            });
        }
        Ok(())
    }
}

impl TensorSet for ModelParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = self.observer.tensors();
        out.extend(self.predictor.tensors());
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = self.observer.tensors_mut();
        out.extend(self.predictor.tensors_mut());
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn default_config_matches_reference_sizes() {
        let cfg = ModelConfig::default();
        assert_eq!(cfg.state_dim, 128);
        assert_eq!(cfg.g_hidden, vec![128, 128, 128]);
    }

    #[test]
    fn init_produces_valid_model() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = ModelConfig {
            state_dim: 16,
            g_hidden: vec![24, 24],
        };
        let model = ModelParams::init(&cfg, &mut rng);
        model.validate().unwrap();
        assert_eq!(model.state_dim(), 16);
        assert_eq!(model.observer.g.input_dim(), 19);
        assert_eq!(model.predictor.c_u.shape(), (4, 16));
    }

    #[test]
    fn validate_catches_shape_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let cfg = ModelConfig {
            state_dim: 8,
            g_hidden: vec![8],
        };
        let mut model = ModelParams::init(&cfg, &mut rng);
        model.observer.k = DMatrix::zeros(8, 13);
        assert!(model.validate().is_err());
    }

    #[test]
    fn validate_catches_non_finite_entries() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let cfg = ModelConfig {
            state_dim: 8,
            g_hidden: vec![8],
        };
        let mut model = ModelParams::init(&cfg, &mut rng);
        model.predictor.c_u[(0, 0)] = f64::NAN;
        assert!(model.validate().is_err());
    }

    #[test]
    fn tensor_walk_covers_every_parameter_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let cfg = ModelConfig {
            state_dim: 4,
            g_hidden: vec![5],
        };
        let model = ModelParams::init(&cfg, &mut rng);
        // a 16, k 56, c_y 56, g (7*5 + 5 + 5*4 + 4 = 64),
        // gru (3*(4*3 + 16) + 4 biases... computed directly), c_u 16.
        let gru_count = 3 * (4 * 3 + 4 * 4) + 4 * 4;
        let expected = 16 + 56 + 56 + 64 + gru_count + 16;
        assert_eq!(model.param_count(), expected);
    }
}

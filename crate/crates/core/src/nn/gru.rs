//! Gated recurrent unit used as the predictor's latent dynamics.
//!
//! A single step computes, for input `x` and hidden state `h`:
//!
//! ```text
//!   z = sigmoid(W_z x + U_z h + b_z)            update gate
//!   r = sigmoid(W_r x + U_r h + b_r)            reset gate
//!   n = tanh(W_n x + b_ni + r .* (U_n h + b_nh))  candidate state
//!   h' = (1 - z) .* n + z .* h
//! ```
//!
//! The candidate keeps separate input-side and hidden-side biases so the
//! reset gate scales the hidden contribution including its bias, matching
//! the common recurrent-framework convention.  With all parameters zero the
//! gates sit at 1/2 and the candidate at 0, so `h' = h / 2`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::nn::{sigmoid, TensorSet};

/// Parameters of a single GRU cell.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    /// Update-gate input weights (`hidden x input`).
    pub w_update: DMatrix<f64>,
    /// Update-gate recurrent weights (`hidden x hidden`).
    pub u_update: DMatrix<f64>,
    /// Update-gate bias.
    pub b_update: DVector<f64>,
    /// Reset-gate input weights.
    pub w_reset: DMatrix<f64>,
    /// Reset-gate recurrent weights.
    pub u_reset: DMatrix<f64>,
    /// Reset-gate bias.
    pub b_reset: DVector<f64>,
    /// Candidate input weights.
    pub w_cand: DMatrix<f64>,
    /// Candidate recurrent weights.
    pub u_cand: DMatrix<f64>,
    /// Candidate input-side bias.
    pub b_cand_input: DVector<f64>,
    /// Candidate hidden-side bias (gated by the reset gate).
    pub b_cand_hidden: DVector<f64>,
}

impl GruParams {
    /// Random cell with weights `U[-1/sqrt(hidden), 1/sqrt(hidden)]` and zero
    /// biases.
    pub fn init<R: Rng + ?Sized>(input_dim: usize, hidden_dim: usize, rng: &mut R) -> Self {
        assert!(input_dim > 0 && hidden_dim > 0, "zero-width GRU");
        let bound = 1.0 / (hidden_dim as f64).sqrt();
        let mat = |rows: usize, cols: usize, rng: &mut R| {
            DMatrix::from_fn(rows, cols, |_, _| rng.gen_range(-bound..bound))
        };
        Self {
            w_update: mat(hidden_dim, input_dim, rng),
            u_update: mat(hidden_dim, hidden_dim, rng),
            b_update: DVector::zeros(hidden_dim),
            w_reset: mat(hidden_dim, input_dim, rng),
            u_reset: mat(hidden_dim, hidden_dim, rng),
            b_reset: DVector::zeros(hidden_dim),
            w_cand: mat(hidden_dim, input_dim, rng),
            u_cand: mat(hidden_dim, hidden_dim, rng),
            b_cand_input: DVector::zeros(hidden_dim),
            b_cand_hidden: DVector::zeros(hidden_dim),
        }
    }

    /// Input dimension accepted by the cell.
    pub fn input_dim(&self) -> usize {
        self.w_update.ncols()
    }

    /// Hidden-state dimension.
    pub fn hidden_dim(&self) -> usize {
        self.w_update.nrows()
    }

    /// Advances the hidden state by one step.
    pub fn step(&self, h: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "GruParams::step",
                expected: format!("input of length {}", self.input_dim()),
                found: format!("{}", x.len()),
            });
        }
        if h.len() != self.hidden_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "GruParams::step",
                expected: format!("hidden state of length {}", self.hidden_dim()),
                found: format!("{}", h.len()),
            });
        }
        let mut z = &self.w_update * x + &self.u_update * h + &self.b_update;
        z.apply(|v| *v = sigmoid(*v));
        let mut r = &self.w_reset * x + &self.u_reset * h + &self.b_reset;
        r.apply(|v| *v = sigmoid(*v));
        let hidden_side = &self.u_cand * h + &self.b_cand_hidden;
        let mut n = &self.w_cand * x + &self.b_cand_input + r.component_mul(&hidden_side);
        n.apply(|v| *v = v.tanh());
        let mut h_next = DVector::zeros(self.hidden_dim());
        for i in 0..self.hidden_dim() {
            h_next[i] = (1.0 - z[i]) * n[i] + z[i] * h[i];
        }
        Ok(h_next)
    }
}

impl TensorSet for GruParams {
    fn tensors(&self) -> Vec<&[f64]> {
        vec![
            self.w_update.as_slice(),
            self.u_update.as_slice(),
            self.b_update.as_slice(),
            self.w_reset.as_slice(),
            self.u_reset.as_slice(),
            self.b_reset.as_slice(),
            self.w_cand.as_slice(),
            self.u_cand.as_slice(),
            self.b_cand_input.as_slice(),
            self.b_cand_hidden.as_slice(),
        ]
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_update.as_mut_slice(),
            self.u_update.as_mut_slice(),
            self.b_update.as_mut_slice(),
            self.w_reset.as_mut_slice(),
            self.u_reset.as_mut_slice(),
            self.b_reset.as_mut_slice(),
            self.w_cand.as_mut_slice(),
            self.u_cand.as_mut_slice(),
            self.b_cand_input.as_mut_slice(),
            self.b_cand_hidden.as_mut_slice(),
        ]
    }
}

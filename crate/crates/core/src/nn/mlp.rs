//! Fully connected ReLU network with a closed-form Lipschitz upper bound.
//!
//! All hidden layers use ReLU; the output layer is affine.  Because ReLU is
//! 1-Lipschitz and a linear map `W x + b` is `||W||_2`-Lipschitz, the
//! composition satisfies
//!
//! ```text
//!   ||f(a) - f(b)|| <= (prod_l ||W_l||_2) * ||a - b||
//! ```
//!
//! which is the bound used by the observer contraction analysis.  The bound
//! is generally loose but is cheap, differentiable (through the per-layer
//! spectral norms), and valid for every input pair.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{CoreError, Result};
use crate::nn::spectral::spectral_norm;
use crate::nn::TensorSet;

/// Parameters of a dense ReLU network.
///
/// `weights[l]` maps layer `l` activations (columns) to layer `l+1`
/// pre-activations (rows); `biases[l]` matches the row count.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    /// Per-layer weight matrices, input side first.
    pub weights: Vec<DMatrix<f64>>,
    /// Per-layer bias vectors.
    pub biases: Vec<DVector<f64>>,
}

impl MlpParams {
    /// Random network with the given layer widths.
    ///
    /// Weights are He-uniform (`U[-sqrt(6/fan_in), sqrt(6/fan_in)]` scaled by
    /// `gain`), biases zero.  An empty `hidden` slice yields a single affine
    /// layer with no nonlinearity.
    pub fn init<R: Rng + ?Sized>(
        input_dim: usize,
        hidden: &[usize],
        output_dim: usize,
        gain: f64,
        rng: &mut R,
    ) -> Self {
        assert!(input_dim > 0 && output_dim > 0, "zero-width layer");
        let mut dims = Vec::with_capacity(hidden.len() + 2);
        dims.push(input_dim);
        dims.extend_from_slice(hidden);
        dims.push(output_dim);

        let mut weights = Vec::with_capacity(dims.len() - 1);
        let mut biases = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            assert!(fan_in > 0 && fan_out > 0, "zero-width layer");
            let bound = gain * (6.0 / fan_in as f64).sqrt();
            weights.push(DMatrix::from_fn(fan_out, fan_in, |_, _| {
                rng.gen_range(-bound..bound)
            }));
            biases.push(DVector::zeros(fan_out));
        }
        Self { weights, biases }
    }

    /// Number of affine layers (hidden count + 1).
    pub fn layer_count(&self) -> usize {
        self.weights.len()
    }

    /// Expected input dimension.
    pub fn input_dim(&self) -> usize {
        self.weights[0].ncols()
    }

    /// Output dimension.
    pub fn output_dim(&self) -> usize {
        self.weights[self.weights.len() - 1].nrows()
    }

    /// Forward pass: affine + ReLU for every layer except the last, which is
    /// affine only.
    pub fn forward(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_dim() {
            return Err(CoreError::DimensionMismatch {
                context: "MlpParams::forward",
                expected: format!("input of length {}", self.input_dim()),
                found: format!("{}", x.len()),
            });
        }
        let last = self.weights.len() - 1;
        let mut a = x.clone();
        for (l, (w, b)) in self.weights.iter().zip(self.biases.iter()).enumerate() {
            a = w * a + b;
            if l != last {
                a.apply(|v| *v = v.max(0.0));
            }
        }
        Ok(a)
    }

    /// Upper bound on the network's Lipschitz constant: the product of the
    /// per-layer weight spectral norms.
    pub fn lipschitz_upper_bound(&self) -> f64 {
        self.weights.iter().map(spectral_norm).product()
    }

    /// Uniformly rescales all weight matrices so the Lipschitz upper bound
    /// equals `target` (biases unchanged).  Used to build synthetic systems
    /// with a prescribed contraction margin.
    pub fn rescale_lipschitz_bound(&mut self, target: f64) {
        assert!(target > 0.0, "target bound must be positive");
        let current = self.lipschitz_upper_bound();
        assert!(current > 0.0, "cannot rescale a zero network");
        let per_layer = (target / current).powf(1.0 / self.layer_count() as f64);
        for w in &mut self.weights {
            *w *= per_layer;
        }
    }
}

impl TensorSet for MlpParams {
    fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for w in &self.weights {
            out.push(w.as_slice());
        }
        for b in &self.biases {
            out.push(b.as_slice());
        }
        out
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(2 * self.weights.len());
        for w in &mut self.weights {
            out.push(w.as_mut_slice());
        }
        for b in &mut self.biases {
            out.push(b.as_mut_slice());
        }
        out
    }
}

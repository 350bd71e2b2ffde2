//! Minimal neural-network substrate: dense layers, a gated recurrent cell,
//! spectral-norm estimation, reverse-mode differentiation, and Adam.
//!
//! Everything is dense `f64` on top of `nalgebra`; model sizes in this crate
//! (state dimension around 10^2) are far below the regime where a tensor
//! framework would pay off, and keeping the substrate local makes the
//! spectral-norm regularization differentiable end to end with no FFI.

pub mod adam;
pub mod gru;
pub mod mlp;
pub mod spectral;
pub mod tape;

pub use adam::{Adam, AdamConfig};
pub use gru::GruParams;
pub use mlp::MlpParams;
pub use spectral::{spectral_norm, spectral_norm_full, SpectralNorm};
pub use tape::{GradTape, Gradients, NodeId};

/// Logistic sigmoid `1 / (1 + e^-x)`.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// A fixed-order collection of parameter tensors.
///
/// Implemented by every parameter struct so that optimizers, gradient
/// accumulation, and serialization can walk a model's tensors generically.
/// Implementations must list tensors in a deterministic order that matches
/// between `tensors` and `tensors_mut`; gradients for a model are stored in
/// a value of the same type, so element `i` of one value lines up with
/// element `i` of another.
pub trait TensorSet: Clone {
    /// Immutable views of every tensor's backing storage, in fixed order.
    fn tensors(&self) -> Vec<&[f64]>;

    /// Mutable views of every tensor's backing storage, in the same order.
    fn tensors_mut(&mut self) -> Vec<&mut [f64]>;

    /// A copy with every tensor zeroed (used for gradient and moment buffers).
    fn zeroed(&self) -> Self {
        let mut out = self.clone();
        for t in out.tensors_mut() {
            t.fill(0.0);
        }
        out
    }

    /// Total number of scalar parameters.
    fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    /// True if every entry of every tensor is finite.
    fn all_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|t| t.iter().all(|v| v.is_finite()))
    }

    /// In-place `self += alpha * other`, tensor by tensor.
    fn axpy(&mut self, alpha: f64, other: &Self) {
        let others = other.tensors();
        let mut mine = self.tensors_mut();
        assert_eq!(mine.len(), others.len(), "mismatched tensor sets");
        for (dst, src) in mine.iter_mut().zip(others.iter()) {
            assert_eq!(dst.len(), src.len(), "mismatched tensor shapes");
            for (d, s) in dst.iter_mut().zip(src.iter()) {
                *d += alpha * s;
            }
        }
    }

    /// In-place multiplication of every entry by `alpha`.
    fn scale(&mut self, alpha: f64) {
        for t in self.tensors_mut() {
            for v in t.iter_mut() {
                *v *= alpha;
            }
        }
    }
}

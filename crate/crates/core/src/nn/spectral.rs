//! Spectral norm (largest singular value) via power iteration.
//!
//! The contraction analysis needs `||A - K C_y||_2` and per-layer weight
//! norms `||W||_2` many times per training step, so a cheap iterative
//! estimate with warm starting is used instead of a full SVD:
//!
//! ```text
//!   v <- normalize(M^T M v)   repeated until ||v - v_prev|| < tol
//!   sigma = ||M v||,  u = M v / sigma
//! ```
//!
//! The returned singular vectors make the norm differentiable: for
//! `sigma = u^T M v` with unit `u, v`, the gradient with respect to `M` is
//! the rank-one matrix `u v^T`, which the training tape uses directly.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Default iteration cap for power iteration.  Convergence is geometric at
/// rate `(sigma_2 / sigma_1)^2`, so a generous cap covers matrices whose top
/// two singular values are close; warm-started calls exit far earlier.
pub const DEFAULT_ITERS: usize = 1000;

/// Default convergence tolerance on the right singular vector.
pub const DEFAULT_TOL: f64 = 1e-13;

/// Result of a spectral-norm computation.
#[derive(Debug, Clone)]
pub struct SpectralNorm {
    /// Largest singular value `sigma_max(M)`.
    pub sigma: f64,
    /// Unit left singular vector `u` (length = rows).
    pub left: DVector<f64>,
    /// Unit right singular vector `v` (length = cols).
    pub right: DVector<f64>,
    /// Iterations actually performed.
    pub iters: usize,
}

/// Computes the spectral norm of `m` with optional warm-started right
/// singular vector.
///
/// The warm start makes repeated calls on a slowly changing matrix (as in
/// training) converge in a few iterations.  Without one, iteration starts
/// from a deterministic pseudo-random direction so that runs are exactly
/// reproducible while avoiding pathological starts orthogonal to the top
/// singular direction.
///
/// A zero matrix returns `sigma = 0` with arbitrary unit vectors.
pub fn spectral_norm_full(
    m: &DMatrix<f64>,
    iters: usize,
    tol: f64,
    warm_start: Option<&DVector<f64>>,
) -> SpectralNorm {
    let (rows, cols) = m.shape();
    assert!(rows > 0 && cols > 0, "spectral norm of an empty matrix");

    let mut v = match warm_start {
        Some(w) if w.len() == cols && w.norm() > 0.0 => w.normalize(),
        _ => {
            // Deterministic start seeded by the shape only: reproducible, and
            // almost surely not orthogonal to the top right singular vector.
            let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0000 ^ (rows as u64) << 32 ^ cols as u64);
            let raw = DVector::from_fn(cols, |_, _| rng.gen_range(-1.0..1.0));
            if raw.norm() > 0.0 {
                raw.normalize()
            } else {
                DVector::from_element(cols, 1.0 / (cols as f64).sqrt())
            }
        }
    };

    let max_entry = m.amax();
    if max_entry == 0.0 {
        let mut left = DVector::zeros(rows);
        left[0] = 1.0;
        return SpectralNorm {
            sigma: 0.0,
            left,
            right: v,
            iters: 0,
        };
    }

    let mut performed = 0;
    let mut mv = m * &v;
    for _ in 0..iters {
        performed += 1;
        // One step of power iteration on M^T M.
        let mtmv = m.transpose() * &mv;
        let norm = mtmv.norm();
        if norm == 0.0 {
            break;
        }
        let v_next = mtmv / norm;
        let delta = (&v_next - &v).norm().min((&v_next + &v).norm());
        v = v_next;
        mv = m * &v;
        if delta < tol {
            break;
        }
    }

    let sigma = mv.norm();
    let left = if sigma > 0.0 {
        &mv / sigma
    } else {
        let mut e = DVector::zeros(rows);
        e[0] = 1.0;
        e
    };
    SpectralNorm {
        sigma,
        left,
        right: v,
        iters: performed,
    }
}

/// Spectral norm with default iteration budget and tolerance.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    spectral_norm_full(m, DEFAULT_ITERS, DEFAULT_TOL, None).sigma
}

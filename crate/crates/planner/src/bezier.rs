//! Bezier curves over command space.
//!
//! A candidate command sequence for the whole planning horizon is stored as
//! the `d+1` control points of a degree-`d` Bezier curve; the planner
//! samples perturbations in this low-dimensional space instead of per-step
//! command space.  This module evaluates curves (Bernstein form and the De
//! Casteljau recursion, which agree to rounding), discretizes them into
//! clamped command sequences, and reparameterizes a curve onto the tail of
//! its own parameter interval for warm-starting the next planning cycle.

use nalgebra::{DMatrix, Vector3};

use psr_core::types::Command;

use crate::{PlannerError, Result};

/// Binomial coefficient; exact for the small degrees used here.
fn binomial(n: usize, k: usize) -> u64 {
    let k = k.min(n - k);
    let mut out: u64 = 1;
    for i in 0..k {
        out = out * (n - i) as u64 / (i + 1) as u64;
    }
    out
}

/// Bernstein basis value `C(d, j) (1-s)^{d-j} s^j`.
fn bernstein(d: usize, j: usize, s: f64) -> f64 {
    binomial(d, j) as f64 * (1.0 - s).powi((d - j) as i32) * s.powi(j as i32)
}

/// Evaluates the curve in Bernstein form at `s` in `[0, 1]`.
///
/// Panics on an empty control polygon; configuration validation guarantees
/// at least one point.
pub fn eval_bernstein(control: &[Vector3<f64>], s: f64) -> Vector3<f64> {
    assert!(!control.is_empty(), "empty control polygon");
    let d = control.len() - 1;
    let mut acc = Vector3::zeros();
    for (j, p) in control.iter().enumerate() {
        acc += bernstein(d, j, s) * p;
    }
    acc
}

/// Evaluates the curve by the De Casteljau recursion at `s` in `[0, 1]`.
pub fn eval_de_casteljau(control: &[Vector3<f64>], s: f64) -> Vector3<f64> {
    assert!(!control.is_empty(), "empty control polygon");
    let mut pts = control.to_vec();
    while pts.len() > 1 {
        for i in 0..pts.len() - 1 {
            pts[i] = (1.0 - s) * pts[i] + s * pts[i + 1];
        }
        pts.pop();
    }
    pts[0]
}

/// Discretizes the curve into `horizon` commands clamped to the box
/// `[-limit, limit]^3`.
///
/// Step `t` (0-based) evaluates at `s = t / (horizon - 1)`, so the first
/// command is the first control point and the last command is the last
/// control point; a single-step horizon evaluates at `s = 0`.
pub fn command_sequence(control: &[Vector3<f64>], horizon: usize, limit: f64) -> Vec<Command> {
    let denom = (horizon.saturating_sub(1)).max(1) as f64;
    (0..horizon)
        .map(|t| {
            let u = eval_bernstein(control, t as f64 / denom);
            Command::new(u.x, u.y, u.z).clamp(limit)
        })
        .collect()
}

/// Reparameterizes the curve onto the tail `[delta, 1]` of its parameter
/// interval: returns control points `Q` with `Q(s) = P(delta + (1-delta)s)`.
///
/// The composition of a degree-`d` polynomial with an affine map is again
/// degree `d`, so interpolating it at `d+1` equispaced nodes in Bernstein
/// form reproduces it exactly (up to rounding).  Used to warm-start the
/// next planning cycle after part of the horizon has been executed.
pub fn time_shift(control: &[Vector3<f64>], delta: f64) -> Result<Vec<Vector3<f64>>> {
    if !(0.0..=1.0).contains(&delta) {
        return Err(PlannerError::OutOfRange {
            context: "time_shift delta",
            value: delta,
            range: "[0, 1]",
        });
    }
    let d = control.len() - 1;
    if d == 0 {
        return Ok(control.to_vec());
    }
    // Bernstein collocation matrix at nodes s_i = i/d and the shifted
    // curve's values at those nodes.
    let nodes: Vec<f64> = (0..=d).map(|i| i as f64 / d as f64).collect();
    let basis = DMatrix::from_fn(d + 1, d + 1, |i, j| bernstein(d, j, nodes[i]));
    let values = DMatrix::from_fn(d + 1, 3, |i, c| {
        eval_bernstein(control, delta + (1.0 - delta) * nodes[i])[c]
    });
    let lu = basis.lu();
    let solved = lu.solve(&values).ok_or_else(|| {
        // The Bernstein collocation matrix at distinct nodes is invertible;
        // reaching this indicates non-finite control points upstream.
        PlannerError::InvalidScene("singular Bernstein collocation system".to_string())
    })?;
    Ok((0..=d)
        .map(|i| Vector3::new(solved[(i, 0)], solved[(i, 1)], solved[(i, 2)]))
        .collect())
}

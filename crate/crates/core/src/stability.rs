//! Contraction analysis of the observer error dynamics.
//!
//! Let `A_c = A - K C_y` be the closed-loop matrix and `L_g` an upper bound
//! on the Lipschitz constant of the nonlinearity `g` in its state argument.
//! If the true system is the observer model plus a per-step disturbance of
//! norm at most `eps_max`, the estimation error obeys
//!
//! ```text
//!   ||e_{k+1}|| <= rho ||e_k|| + eps_max,      rho = ||A_c||_2 + L_g
//! ```
//!
//! and whenever `rho < 1` the error is ultimately bounded:
//!
//! ```text
//!   limsup_k ||e_k||       <= eps_max / (1 - rho)
//!   limsup_k ||C_y e_k||   <= ||C_y||_2 * eps_max / (1 - rho)
//! ```
//!
//! [`contraction_factor`] evaluates `rho` for a trained observer (this is
//! the quantity regularized during training), [`uub_bounds`] turns it into
//! the ultimate bounds, and [`verify_uub`] checks both the per-step
//! recursion and the asymptotic bound empirically on simulated disturbed
//! systems.

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{CoreError, Result};
use crate::model::ObserverParams;
use crate::nn::spectral::spectral_norm;
use crate::observer::observer_step;
use crate::sampling::unit_vector;
use crate::types::Command;

/// Spectral norm of the closed-loop matrix `A - K C_y`.
pub fn closed_loop_norm(obs: &ObserverParams) -> f64 {
    spectral_norm(&(&obs.a - &obs.k * &obs.c_y))
}

/// Contraction factor `rho = ||A - K C_y||_2 + L_g`.
///
/// `L_g` is the product-of-layer-norms Lipschitz bound of `g`, which bounds
/// its sensitivity in the full `[x; u]` input and therefore also in `x`
/// alone.
pub fn contraction_factor(obs: &ObserverParams) -> f64 {
    closed_loop_norm(obs) + obs.g.lipschitz_upper_bound()
}

/// Certified asymptotic bounds for a contraction factor and disturbance
/// level: `(state_bound, output_bound)`.
///
/// Fails with [`CoreError::NoBound`] when `rho >= 1`.
pub fn uub_bounds(rho: f64, eps_max: f64, c_y_norm: f64) -> Result<(f64, f64)> {
    if !(rho < 1.0) {
        return Err(CoreError::NoBound { rho });
    }
    if eps_max < 0.0 {
        return Err(CoreError::OutOfRange {
            context: "uub_bounds",
            value: eps_max,
            range: "eps_max >= 0",
        });
    }
    let state = eps_max / (1.0 - rho);
    Ok((state, c_y_norm * state))
}

/// Summary of an observer's contraction certificate.
#[derive(Debug, Clone, Serialize)]
pub struct StabilityReport {
    /// Contraction factor `rho`.
    pub rho: f64,
    /// `||A - K C_y||_2`.
    pub closed_loop_norm: f64,
    /// Lipschitz upper bound of the nonlinearity.
    pub lipschitz_bound: f64,
    /// Spectral norm of the measurement map.
    pub c_y_norm: f64,
    /// Assumed per-step disturbance bound.
    pub eps_max: f64,
    /// Ultimate bound on the state estimation error, when `rho < 1`.
    pub state_bound: Option<f64>,
    /// Ultimate bound on the output estimation error, when `rho < 1`.
    pub output_bound: Option<f64>,
}

/// Builds a [`StabilityReport`] for an observer and disturbance level.
pub fn stability_report(obs: &ObserverParams, eps_max: f64) -> StabilityReport {
    let closed = closed_loop_norm(obs);
    let lip = obs.g.lipschitz_upper_bound();
    let rho = closed + lip;
    let c_y_norm = spectral_norm(&obs.c_y);
    let bounds = uub_bounds(rho, eps_max, c_y_norm).ok();
    StabilityReport {
        rho,
        closed_loop_norm: closed,
        lipschitz_bound: lip,
        c_y_norm,
        eps_max,
        state_bound: bounds.map(|b| b.0),
        output_bound: bounds.map(|b| b.1),
    }
}

/// Outcome of an empirical ultimate-bound check.
#[derive(Debug, Clone, Serialize)]
pub struct UubVerification {
    /// The certificate that was checked.
    pub report: StabilityReport,
    /// Trials simulated.
    pub trials: usize,
    /// Steps per trial.
    pub steps: usize,
    /// Per-step recursion violations (`||e+|| > rho ||e|| + eps_max` beyond
    /// tolerance) across all trials; zero when the certificate holds.
    pub recursion_violations: usize,
    /// Largest state error seen in the second half of any trial.
    pub max_tail_state_error: f64,
    /// Largest output error seen in the second half of any trial.
    pub max_tail_output_error: f64,
    /// Largest state error seen anywhere (including transients).
    pub max_state_error: f64,
    /// Error-norm traces (one per trial), populated on request.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub traces: Option<Vec<Vec<f64>>>,
}

impl UubVerification {
    /// True when the tail of every trajectory respected both ultimate bounds
    /// and no per-step violation occurred.
    pub fn holds(&self) -> bool {
        let tol = 1e-9;
        match (self.report.state_bound, self.report.output_bound) {
            (Some(sb), Some(ob)) => {
                self.recursion_violations == 0
                    && self.max_tail_state_error <= sb + tol
                    && self.max_tail_output_error <= ob + tol
            }
            _ => false,
        }
    }
}

/// Simulates disturbed copies of the observer model and checks the error
/// recursion and ultimate bounds.
///
/// Each trial builds a "true" system `x+ = A x + g([x; u]) + d_k` with
/// `||d_k|| = eps_max` (worst-case magnitude, uniformly random direction),
/// feeds its exact output `y = C_y x` to the observer, and tracks
/// `e_k = x_k - xhat_k`.  The observer starts at zero, the true state at a
/// uniformly random point in `[-1, 1]^n`, and each trial holds a random
/// constant command.  The tail (second half of the steps) is compared
/// against the certified ultimate bounds.
pub fn verify_uub(
    obs: &ObserverParams,
    eps_max: f64,
    trials: usize,
    steps: usize,
    seed: u64,
    record_traces: bool,
) -> Result<UubVerification> {
    obs.validate()?;
    let report = stability_report(obs, eps_max);
    if report.state_bound.is_none() {
        return Err(CoreError::NoBound { rho: report.rho });
    }
    let rho = report.rho;
    let n = obs.state_dim();
    let tail_start = steps / 2;

    struct TrialStats {
        violations: usize,
        max_tail_state: f64,
        max_tail_output: f64,
        max_state: f64,
        trace: Option<Vec<f64>>,
    }

    let per_trial: Vec<TrialStats> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(trial as u64));
            let mut x = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
            let mut xhat = DVector::zeros(n);
            let u = Command::new(
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
                rng.gen_range(-0.5..0.5),
            );
            let mut stats = TrialStats {
                violations: 0,
                max_tail_state: 0.0,
                max_tail_output: 0.0,
                max_state: 0.0,
                trace: record_traces.then(|| Vec::with_capacity(steps + 1)),
            };
            let mut input = DVector::zeros(n + 3);
            for k in 0..steps {
                let err = &x - &xhat;
                let err_norm = err.norm();
                stats.max_state = stats.max_state.max(err_norm);
                if k >= tail_start {
                    stats.max_tail_state = stats.max_tail_state.max(err_norm);
                    stats.max_tail_output =
                        stats.max_tail_output.max((&obs.c_y * &err).norm());
                }
                if let Some(t) = stats.trace.as_mut() {
                    t.push(err_norm);
                }

                // True system with a worst-case-magnitude disturbance.
                input.rows_mut(0, n).copy_from(&x);
                input[n] = u.vx;
                input[n + 1] = u.vy;
                input[n + 2] = u.wz;
                let drift = &obs.a * &x + obs.g.forward(&input).expect("validated dims");
                let disturbance = unit_vector(&mut rng, n) * eps_max;
                let x_next = drift + disturbance;

                let y = &obs.c_y * &x;
                let xhat_next = observer_step(obs, &xhat, &y, u).expect("validated dims");

                let next_err_norm = (&x_next - &xhat_next).norm();
                if next_err_norm > rho * err_norm + eps_max + 1e-9 {
                    stats.violations += 1;
                }
                x = x_next;
                xhat = xhat_next;
            }
            if let Some(t) = stats.trace.as_mut() {
                t.push((&x - &xhat).norm());
            }
            stats
        })
        .collect();

    let mut out = UubVerification {
        report,
        trials,
        steps,
        recursion_violations: 0,
        max_tail_state_error: 0.0,
        max_tail_output_error: 0.0,
        max_state_error: 0.0,
        traces: record_traces.then(Vec::new),
    };
    for s in per_trial {
        out.recursion_violations += s.violations;
        out.max_tail_state_error = out.max_tail_state_error.max(s.max_tail_state);
        out.max_tail_output_error = out.max_tail_output_error.max(s.max_tail_output);
        out.max_state_error = out.max_state_error.max(s.max_state);
        if let (Some(all), Some(t)) = (out.traces.as_mut(), s.trace) {
            all.push(t);
        }
    }
    Ok(out)
}

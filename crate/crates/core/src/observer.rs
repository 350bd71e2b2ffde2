//! Measurement-driven latent state estimation.
//!
//! Each step blends the model's own dynamics with an innovation correction:
//!
//! ```text
//!   x+ = A x + g([x; u]) + K (y - C_y x)
//! ```
//!
//! Unrolling over a measurement history warms the latent state up before
//! prediction starts.  The estimation error `e = x_true - x` obeys
//! `||e+|| <= rho ||e|| + eps_max` whenever the true system differs from the
//! model by a disturbance of norm at most `eps_max` (see [`crate::stability`]),
//! so convergence of the unroll is certified rather than hoped for.

use nalgebra::DVector;

use crate::error::{CoreError, Result};
use crate::model::ObserverParams;
use crate::types::{Command, MEASUREMENT_DIM};

/// One observer update from measurement `y` and command `u`.
pub fn observer_step(
    obs: &ObserverParams,
    x: &DVector<f64>,
    y: &DVector<f64>,
    u: Command,
) -> Result<DVector<f64>> {
    let n = obs.state_dim();
    if x.len() != n {
        return Err(CoreError::DimensionMismatch {
            context: "observer_step",
            expected: format!("state of length {n}"),
            found: format!("{}", x.len()),
        });
    }
    if y.len() != MEASUREMENT_DIM {
        return Err(CoreError::DimensionMismatch {
            context: "observer_step",
            expected: format!("measurement of length {MEASUREMENT_DIM}"),
            found: format!("{}", y.len()),
        });
    }
    let mut input = DVector::zeros(n + 3);
    input.rows_mut(0, n).copy_from(x);
    input[n] = u.vx;
    input[n + 1] = u.vy;
    input[n + 2] = u.wz;
    let nonlinear = obs.g.forward(&input)?;
    let innovation = y - &obs.c_y * x;
    Ok(&obs.a * x + nonlinear + &obs.k * innovation)
}

/// Applies [`observer_step`] over an aligned measurement/command history.
///
/// `measurements[k]` and `commands[k]` describe the same control interval;
/// the returned state is the estimate after absorbing all of them.  Empty
/// slices return `x0` unchanged.
pub fn observer_unroll(
    obs: &ObserverParams,
    x0: &DVector<f64>,
    measurements: &[DVector<f64>],
    commands: &[Command],
) -> Result<DVector<f64>> {
    if measurements.len() != commands.len() {
        return Err(CoreError::DimensionMismatch {
            context: "observer_unroll",
            expected: format!("{} commands", measurements.len()),
            found: format!("{}", commands.len()),
        });
    }
    let mut x = x0.clone();
    for (y, u) in measurements.iter().zip(commands.iter()) {
        x = observer_step(obs, &x, y, *u)?;
    }
    Ok(x)
}

/// Output-space estimation error `||y - C_y x||` for diagnostics.
pub fn output_error(obs: &ObserverParams, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
    (y - &obs.c_y * x).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelConfig, ModelParams};
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_observer(seed: u64) -> ObserverParams {
        let cfg = ModelConfig {
            state_dim: 6,
            g_hidden: vec![8],
        };
        ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed)).observer
    }

    #[test]
    fn step_matches_hand_assembled_terms() {
        let obs = small_observer(4);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DVector::from_fn(6, |_, _| rng.gen_range(-1.0..1.0));
        let y = DVector::from_fn(14, |_, _| rng.gen_range(-1.0..1.0));
        let u = Command::new(0.2, -0.1, 0.3);

        let got = observer_step(&obs, &x, &y, u).unwrap();

        let mut input = DVector::zeros(9);
        input.rows_mut(0, 6).copy_from(&x);
        input[6] = 0.2;
        input[7] = -0.1;
        input[8] = 0.3;
        let want = &obs.a * &x + obs.g.forward(&input).unwrap() + &obs.k * (&y - &obs.c_y * &x);
        assert_relative_eq!((got - want).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_measurement_with_zero_gain_reduces_to_open_loop() {
        let mut obs = small_observer(5);
        obs.k = DMatrix::zeros(6, 14);
        let x = DVector::from_element(6, 0.5);
        let y = DVector::zeros(14);
        let u = Command::zero();
        let got = observer_step(&obs, &x, &y, u).unwrap();
        let mut input = DVector::zeros(9);
        input.rows_mut(0, 6).copy_from(&x);
        let want = &obs.a * &x + obs.g.forward(&input).unwrap();
        assert_relative_eq!((got - want).norm(), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_unroll_returns_initial_state() {
        let obs = small_observer(6);
        let x0 = DVector::from_element(6, 1.25);
        let x = observer_unroll(&obs, &x0, &[], &[]).unwrap();
        assert_eq!(x, x0);
    }

    #[test]
    fn unroll_equals_repeated_steps() {
        let obs = small_observer(7);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x0 = DVector::zeros(6);
        let ys: Vec<DVector<f64>> = (0..5)
            .map(|_| DVector::from_fn(14, |_, _| rng.gen_range(-0.5..0.5)))
            .collect();
        let us: Vec<Command> = (0..5)
            .map(|_| Command::new(rng.gen_range(-0.5..0.5), 0.0, 0.1))
            .collect();
        let rolled = observer_unroll(&obs, &x0, &ys, &us).unwrap();
        let mut manual = x0.clone();
        for k in 0..5 {
            manual = observer_step(&obs, &manual, &ys[k], us[k]).unwrap();
        }
        assert_relative_eq!((rolled - manual).norm(), 0.0);
    }

    #[test]
    fn mismatched_history_lengths_are_rejected() {
        let obs = small_observer(8);
        let x0 = DVector::zeros(6);
        let ys = vec![DVector::zeros(14)];
        assert!(observer_unroll(&obs, &x0, &ys, &[]).is_err());
    }

    #[test]
    fn wrong_measurement_length_is_rejected() {
        let obs = small_observer(9);
        let x = DVector::zeros(6);
        let y = DVector::zeros(13);
        assert!(observer_step(&obs, &x, &y, Command::zero()).is_err());
    }
}

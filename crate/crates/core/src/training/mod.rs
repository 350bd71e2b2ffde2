//! Windowed training of the observer-predictor with a contraction penalty.
//!
//! Each minibatch combines two terms:
//!
//! * the prediction loss — mean squared error of the decoded rollout against
//!   robocentric targets, averaged over the batch, with gradients obtained by
//!   taping every window independently (embarrassingly parallel); and
//! * the stability loss — a hinge on the contraction factor
//!   `ρ = ‖A − K·C_y‖₂ + Π‖Wⁱ‖₂` that activates whenever `ρ > 1 − margin`,
//!   evaluated once per batch on its own small tape.
//!
//! The optimizer is Adam over every model tensor.  Training reports one
//! record per epoch (train/test losses plus the current ρ) and returns both
//! the final parameters and the best-by-test-loss checkpoint.
//!
//! Evaluation helpers reproduce the two headline diagnostics: per-horizon
//! position error of the learned predictor versus the constant-velocity
//! baseline, and observer output-error convergence from randomized initial
//! latents.

pub mod graph;

use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baseline::cv_rollout;
use crate::dataset::{Dataset, WindowSample};
use crate::error::{CoreError, Result};
use crate::model::{ModelParams, ObserverParams};
use crate::nn::tape::GradTape;
use crate::nn::{Adam, AdamConfig, TensorSet};
use crate::observer::{observer_step, observer_unroll};
use crate::predictor::predict;
use crate::stability;
use crate::types::{Command, PlanarPose};

use graph::SpectralCache;

/// Hyperparameters of the windowed training loop.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Passes over the training split.
    pub epochs: usize,
    /// Windows per optimizer step.
    pub batch_size: usize,
    /// Optimizer settings.
    pub adam: AdamConfig,
    /// Weight α on the stability hinge; 0 disables the penalty (ablation).
    pub stability_weight: f64,
    /// Margin ε of the hinge: the penalty activates when ρ > 1 − ε.
    pub stability_margin: f64,
    /// Fraction of windows held out for the test split.
    pub test_fraction: f64,
    /// Seed for batch shuffling.
    pub seed: u64,
    /// Whether to reshuffle the training windows each epoch.
    pub shuffle: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 30,
            batch_size: 64,
            adam: AdamConfig::default(),
            stability_weight: 0.1,
            stability_margin: 1e-4,
            test_fraction: 0.2,
            seed: 0,
            shuffle: true,
        }
    }
}

/// The components of one batch objective evaluation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct LossBreakdown {
    /// Batch-mean prediction loss.
    pub prediction: f64,
    /// Hinge value max(0, ρ − (1 − margin)) before weighting.
    pub stability: f64,
    /// Contraction factor at the evaluated parameters.
    pub rho: f64,
    /// prediction + weight · stability.
    pub total: f64,
}

/// One epoch of training metrics.
#[derive(Debug, Clone, Serialize)]
pub struct EpochRecord {
    /// Zero-based epoch index.
    pub epoch: usize,
    /// Mean prediction loss over the epoch's training batches.
    pub train_prediction_loss: f64,
    /// Mean prediction loss over the held-out windows (NaN when empty).
    pub test_prediction_loss: f64,
    /// Mean weighted stability loss over the epoch's batches.
    pub stability_loss: f64,
    /// Contraction factor after the epoch's final optimizer step.
    pub rho: f64,
}

/// Everything produced by a training run.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Checkpoint with the lowest test prediction loss.
    pub model: ModelParams,
    /// Parameters after the final optimizer step.
    pub final_model: ModelParams,
    /// Per-epoch metrics.
    pub report: Vec<EpochRecord>,
    /// Epoch index of `model`.
    pub best_epoch: usize,
}

/// Prediction loss of one window along the plain (untaped) forward path:
/// observer warm-up from a zero latent, command-driven rollout, mean squared
/// error over all `T·n_z` coordinates.
pub fn prediction_loss(model: &ModelParams, sample: &WindowSample) -> Result<f64> {
    let (history_y, history_u) = sample.observer_inputs();
    let x0 = DVector::zeros(model.state_dim());
    let x = observer_unroll(&model.observer, &x0, history_y, history_u)?;
    let predictions = predict(model, &x, sample.predictor_commands())?;
    let mut total = 0.0;
    let mut dim = 1usize;
    for (p, t) in predictions.iter().zip(sample.targets.iter()) {
        let diff = p.to_vector() - t.to_vector();
        dim = diff.len();
        total += diff.norm_squared();
    }
    Ok(total / (sample.horizon() * dim) as f64)
}

/// Mean prediction loss over a set of windows (parallel, deterministic
/// reduction order).
pub fn mean_prediction_loss(model: &ModelParams, windows: &[WindowSample]) -> Result<f64> {
    if windows.is_empty() {
        return Err(CoreError::InsufficientData {
            context: "prediction-loss evaluation",
            need: 1,
            have: 0,
        });
    }
    let losses: Vec<f64> = windows
        .par_iter()
        .map(|w| prediction_loss(model, w))
        .collect::<Result<_>>()?;
    Ok(losses.iter().sum::<f64>() / losses.len() as f64)
}

/// Full batch objective along the plain path (no tapes, no gradients);
/// used by the finite-difference checks.
pub fn batch_loss(
    model: &ModelParams,
    samples: &[WindowSample],
    stability_weight: f64,
    stability_margin: f64,
) -> Result<LossBreakdown> {
    let prediction = mean_prediction_loss(model, samples)?;
    let rho = stability::contraction_factor(&model.observer);
    let stability = (rho - (1.0 - stability_margin)).max(0.0);
    Ok(LossBreakdown {
        prediction,
        stability,
        rho,
        total: prediction + stability_weight * stability,
    })
}

/// Evaluates the batch objective and its gradient with respect to every
/// model tensor.
///
/// Per-window tapes run in parallel; their gradients are averaged in index
/// order so the result does not depend on thread scheduling.  The stability
/// hinge is evaluated once on a separate tape and its (weighted) gradient is
/// added to the observer tensors.  `cache` carries power-iteration warm
/// starts between calls.
pub fn batch_loss_and_grad(
    model: &ModelParams,
    samples: &[WindowSample],
    stability_weight: f64,
    stability_margin: f64,
    cache: &mut SpectralCache,
) -> Result<(LossBreakdown, ModelParams)> {
    if samples.is_empty() {
        return Err(CoreError::InsufficientData {
            context: "training batch",
            need: 1,
            have: 0,
        });
    }
    let state_dim = model.state_dim();
    let per_sample: Vec<(f64, ModelParams)> = samples
        .par_iter()
        .map(|sample| {
            let mut tape = GradTape::new();
            let taped = graph::insert_model(&mut tape, model);
            let loss_id = graph::window_prediction_loss(&mut tape, &taped, state_dim, sample);
            let loss = tape.scalar_value(loss_id);
            let grads = tape.backward(loss_id);
            (loss, graph::model_gradients(&grads, &taped, model))
        })
        .collect();

    let scale = 1.0 / samples.len() as f64;
    let mut prediction = 0.0;
    let mut grad = model.zeroed();
    for (loss, g) in &per_sample {
        prediction += loss * scale;
        grad.axpy(scale, g);
    }
    if !prediction.is_finite() {
        return Err(CoreError::NonFinite("batch prediction loss"));
    }

    let mut tape = GradTape::new();
    let taped_obs = graph::insert_observer(&mut tape, &model.observer);
    let rho_id = graph::contraction_node(&mut tape, &taped_obs, cache);
    let hinge_id = graph::stability_loss_node(&mut tape, rho_id, stability_margin);
    let rho = tape.scalar_value(rho_id);
    let stability = tape.scalar_value(hinge_id);
    if stability_weight != 0.0 && stability > 0.0 {
        let grads = tape.backward(hinge_id);
        let obs_grad = graph::observer_gradients(&grads, &taped_obs, &model.observer);
        grad.observer.axpy(stability_weight, &obs_grad);
    }

    let breakdown = LossBreakdown {
        prediction,
        stability,
        rho,
        total: prediction + stability_weight * stability,
    };
    Ok((breakdown, grad))
}

/// Runs the full training loop.  `on_epoch` observes each epoch record as it
/// is produced (progress logging); pass a closure that ignores its argument
/// to run silently.
pub fn train<F: FnMut(&EpochRecord)>(
    initial: &ModelParams,
    dataset: &Dataset,
    cfg: &TrainConfig,
    mut on_epoch: F,
) -> Result<TrainOutcome> {
    initial.validate()?;
    let (train_set, test_set) = dataset.split(cfg.test_fraction);
    if train_set.is_empty() {
        return Err(CoreError::InsufficientData {
            context: "training split",
            need: 1,
            have: 0,
        });
    }

    let mut model = initial.clone();
    let mut adam = Adam::new(cfg.adam.clone(), &model);
    let mut cache = SpectralCache::new(model.observer.g.weights.len());
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    let mut report: Vec<EpochRecord> = Vec::with_capacity(cfg.epochs);
    let mut best_epoch = 0usize;
    let mut best_metric = f64::INFINITY;
    let mut best_model = model.clone();

    for epoch in 0..cfg.epochs {
        if cfg.shuffle {
            for i in (1..order.len()).rev() {
                order.swap(i, rng.gen_range(0..=i));
            }
        }
        let mut train_loss = 0.0;
        let mut stability_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size.max(1)) {
            let batch: Vec<WindowSample> =
                chunk.iter().map(|&i| train_set[i].clone()).collect();
            let (breakdown, grads) = batch_loss_and_grad(
                &model,
                &batch,
                cfg.stability_weight,
                cfg.stability_margin,
                &mut cache,
            )?;
            if !breakdown.total.is_finite() {
                return Err(CoreError::Diverged {
                    epoch,
                    step: adam.steps() as usize,
                    detail: "batch objective is not finite".into(),
                });
            }
            adam.step(&mut model, &grads);
            train_loss += breakdown.prediction;
            stability_loss += cfg.stability_weight * breakdown.stability;
            batches += 1;
        }
        train_loss /= batches as f64;
        stability_loss /= batches as f64;
        // ρ after the epoch's final step, so the record reflects the
        // parameters a checkpoint of this epoch would contain.
        let rho = stability::contraction_factor(&model.observer);
        if !model.all_finite() {
            return Err(CoreError::Diverged {
                epoch,
                step: adam.steps() as usize,
                detail: "parameters left the finite range".into(),
            });
        }

        let test_loss = if test_set.is_empty() {
            f64::NAN
        } else {
            mean_prediction_loss(&model, test_set)?
        };
        let metric = if test_loss.is_finite() { test_loss } else { train_loss };
        if metric < best_metric {
            best_metric = metric;
            best_epoch = epoch;
            best_model = model.clone();
        }

        let record = EpochRecord {
            epoch,
            train_prediction_loss: train_loss,
            test_prediction_loss: test_loss,
            stability_loss,
            rho,
        };
        on_epoch(&record);
        report.push(record);
    }

    Ok(TrainOutcome {
        model: best_model,
        final_model: model,
        report,
        best_epoch,
    })
}

/// Mean 2D position error per prediction step, for the learned model and the
/// constant-velocity baseline, averaged over a set of windows.  Entry `t`
/// covers prediction step `t + 1` (time `(t + 1)·dt` past the window
/// anchor).
#[derive(Debug, Clone, Serialize)]
pub struct HorizonCurves {
    /// Step duration in seconds.
    pub dt: f64,
    /// Learned-model mean position error per step (meters).
    pub learned: Vec<f64>,
    /// Constant-velocity baseline mean position error per step (meters).
    pub baseline: Vec<f64>,
}

/// Computes [`HorizonCurves`] over held-out windows.  Both predictors
/// consume exactly the window's command sequence; targets are the window's
/// robocentric ground truth, whose frame both predictions share.
pub fn horizon_position_errors(
    model: &ModelParams,
    windows: &[WindowSample],
    dt: f64,
) -> Result<HorizonCurves> {
    if windows.is_empty() {
        return Err(CoreError::InsufficientData {
            context: "horizon-error evaluation",
            need: 1,
            have: 0,
        });
    }
    let horizon = windows[0].horizon();
    let per_window: Vec<(Vec<f64>, Vec<f64>)> = windows
        .par_iter()
        .map(|sample| -> Result<(Vec<f64>, Vec<f64>)> {
            let (history_y, history_u) = sample.observer_inputs();
            let x0 = DVector::zeros(model.state_dim());
            let x = observer_unroll(&model.observer, &x0, history_y, history_u)?;
            let predictions = predict(model, &x, sample.predictor_commands())?;
            let cv = cv_rollout(
                PlanarPose::new(0.0, 0.0, 0.0),
                sample.predictor_commands(),
                dt,
            );
            let mut learned = Vec::with_capacity(sample.horizon());
            let mut baseline = Vec::with_capacity(sample.horizon());
            for t in 0..sample.horizon() {
                let target = &sample.targets[t].0;
                let p = &predictions[t].0.position;
                learned.push(
                    ((p.x - target.position.x).powi(2) + (p.y - target.position.y).powi(2))
                        .sqrt(),
                );
                baseline.push(
                    ((cv[t].x - target.position.x).powi(2)
                        + (cv[t].y - target.position.y).powi(2))
                    .sqrt(),
                );
            }
            Ok((learned, baseline))
        })
        .collect::<Result<_>>()?;

    let mut learned = vec![0.0; horizon];
    let mut baseline = vec![0.0; horizon];
    for (l, b) in &per_window {
        if l.len() != horizon {
            return Err(CoreError::DimensionMismatch {
                context: "horizon-error evaluation",
                expected: horizon.to_string(),
                found: l.len().to_string(),
            });
        }
        for t in 0..horizon {
            learned[t] += l[t];
            baseline[t] += b[t];
        }
    }
    let n = per_window.len() as f64;
    for t in 0..horizon {
        learned[t] /= n;
        baseline[t] /= n;
    }
    Ok(HorizonCurves {
        dt,
        learned,
        baseline,
    })
}

/// Observer convergence from randomized initial latents.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConvergenceStats {
    /// Median output error ‖C_y·x̂ − y‖ before the first correction.
    pub initial_median: f64,
    /// Median output error after `steps` corrections.
    pub final_median: f64,
    /// final_median / initial_median.
    pub ratio: f64,
    /// Number of observer steps between the two measurements.
    pub steps: usize,
}

/// Runs `draws` observer trials against a recorded measurement/command
/// stream.  Each trial starts from x̂₀ ~ U[−range, range]^{n_x} at a random
/// position in the stream and tracks the output error ‖C_y·x̂ − y‖.
pub fn observer_convergence(
    observer: &ObserverParams,
    measurements: &[DVector<f64>],
    commands: &[Command],
    steps: usize,
    draws: usize,
    range: f64,
    seed: u64,
) -> Result<ConvergenceStats> {
    if measurements.len() < steps + 1 || commands.len() < steps {
        return Err(CoreError::InsufficientData {
            context: "observer-convergence stream",
            need: steps + 1,
            have: measurements.len().min(commands.len() + 1),
        });
    }
    if draws == 0 {
        return Err(CoreError::InsufficientData {
            context: "observer-convergence draws",
            need: 1,
            have: 0,
        });
    }
    let n = observer.a.nrows();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_start = measurements.len() - steps - 1;
    let mut initial = Vec::with_capacity(draws);
    let mut finals = Vec::with_capacity(draws);
    for _ in 0..draws {
        let start = if max_start == 0 {
            0
        } else {
            rng.gen_range(0..=max_start)
        };
        let mut x = DVector::from_fn(n, |_, _| rng.gen_range(-range..range));
        initial.push((&observer.c_y * &x - &measurements[start]).norm());
        for k in 0..steps {
            x = observer_step(observer, &x, &measurements[start + k], commands[start + k])?;
        }
        finals.push((&observer.c_y * &x - &measurements[start + steps]).norm());
    }
    let initial_median = median(&mut initial);
    let final_median = median(&mut finals);
    Ok(ConvergenceStats {
        initial_median,
        final_median,
        ratio: final_median / initial_median,
        steps,
    })
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).expect("finite medians"));
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelConfig;
    use crate::types::{FullBodyConfig, RelativeConfig};
    use approx::assert_relative_eq;

    fn tiny_model(seed: u64, state_dim: usize) -> ModelParams {
        let cfg = ModelConfig {
            state_dim,
            g_hidden: vec![6],
        };
        ModelParams::init(&cfg, &mut ChaCha8Rng::seed_from_u64(seed))
    }

    fn random_window(rng: &mut ChaCha8Rng, history: usize, horizon: usize) -> WindowSample {
        let measurements = (0..=history)
            .map(|_| DVector::from_fn(14, |_, _| rng.gen_range(-0.3..0.3)))
            .collect();
        let commands = (0..=(history + horizon))
            .map(|_| {
                Command::new(
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                    rng.gen_range(-0.5..0.5),
                )
            })
            .collect();
        let targets = (0..horizon)
            .map(|_| {
                let mut cfg = FullBodyConfig::zeros();
                cfg.position.x = rng.gen_range(-1.0..1.0);
                cfg.position.y = rng.gen_range(-1.0..1.0);
                cfg.yaw = rng.gen_range(-0.5..0.5);
                for j in 0..12 {
                    cfg.joints[j] = rng.gen_range(-0.5..0.5);
                }
                RelativeConfig(cfg)
            })
            .collect();
        WindowSample {
            measurements,
            commands,
            targets,
        }
    }

    fn random_dataset(seed: u64, windows: usize, history: usize, horizon: usize) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Dataset {
            history_len: history,
            horizon,
            windows: (0..windows)
                .map(|_| random_window(&mut rng, history, horizon))
                .collect(),
        }
    }

    #[test]
    fn taped_and_plain_prediction_losses_agree() {
        let model = tiny_model(0, 6);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..5 {
            let sample = random_window(&mut rng, 4, 6);
            let plain = prediction_loss(&model, &sample).unwrap();
            let mut tape = GradTape::new();
            let taped = graph::insert_model(&mut tape, &model);
            let loss_id = graph::window_prediction_loss(&mut tape, &taped, 6, &sample);
            let taped_loss = tape.scalar_value(loss_id);
            assert_relative_eq!(plain, taped_loss, epsilon = 1e-12);
        }
    }

    #[test]
    fn batch_objective_gradient_matches_finite_differences() {
        let mut model = tiny_model(2, 5);
        // Inflate A so the contraction hinge is active and its gradient path
        // (spectral norms included) is exercised.
        model.observer.a *= 1.5;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let samples: Vec<WindowSample> =
            (0..2).map(|_| random_window(&mut rng, 2, 3)).collect();
        let weight = 0.1;
        let margin = 1e-4;

        let mut cache = SpectralCache::new(model.observer.g.weights.len());
        let (breakdown, grads) =
            batch_loss_and_grad(&model, &samples, weight, margin, &mut cache).unwrap();
        assert!(breakdown.stability > 0.0, "hinge should be active");

        let analytic: Vec<f64> = grads.tensors().concat();
        let h = 1e-5;
        let count = model.param_count();
        let mut worst = 0.0f64;
        for idx in 0..count {
            let probe = |m: &mut ModelParams, delta: f64| {
                let mut offset = 0;
                for t in m.tensors_mut() {
                    if idx < offset + t.len() {
                        t[idx - offset] += delta;
                        return;
                    }
                    offset += t.len();
                }
            };
            probe(&mut model, h);
            let up = batch_loss(&model, &samples, weight, margin).unwrap().total;
            probe(&mut model, -2.0 * h);
            let down = batch_loss(&model, &samples, weight, margin).unwrap().total;
            probe(&mut model, h);
            let numeric = (up - down) / (2.0 * h);
            let a = analytic[idx];
            let denom = a.abs().max(numeric.abs()).max(1e-6);
            let rel = (a - numeric).abs() / denom;
            if (a - numeric).abs() > 1e-8 {
                worst = worst.max(rel);
            }
        }
        assert!(worst < 1e-4, "worst relative gradient error {worst}");
    }

    #[test]
    fn training_runs_and_reports() {
        let model = tiny_model(4, 6);
        let dataset = random_dataset(5, 12, 3, 5);
        let cfg = TrainConfig {
            epochs: 3,
            batch_size: 4,
            test_fraction: 0.25,
            ..TrainConfig::default()
        };
        let mut seen = 0usize;
        let outcome = train(&model, &dataset, &cfg, |_| seen += 1).unwrap();
        assert_eq!(outcome.report.len(), 3);
        assert_eq!(seen, 3);
        assert!(outcome.best_epoch < 3);
        for rec in &outcome.report {
            assert!(rec.train_prediction_loss.is_finite());
            assert!(rec.test_prediction_loss.is_finite());
            assert!(rec.rho.is_finite());
        }
        assert!(outcome.model.validate().is_ok());
        assert!(outcome.final_model.validate().is_ok());
    }

    #[test]
    fn training_loss_decreases_on_a_learnable_problem() {
        // Constant-zero targets with constant commands: the model should at
        // least reduce its initial loss within a few epochs.
        let model = tiny_model(6, 6);
        let mut dataset = random_dataset(7, 8, 2, 4);
        for w in &mut dataset.windows {
            for t in &mut w.targets {
                t.0 = FullBodyConfig::zeros();
            }
        }
        let cfg = TrainConfig {
            epochs: 8,
            batch_size: 8,
            test_fraction: 0.0,
            adam: AdamConfig {
                learning_rate: 3e-3,
                ..AdamConfig::default()
            },
            ..TrainConfig::default()
        };
        let outcome = train(&model, &dataset, &cfg, |_| {}).unwrap();
        let first = outcome.report.first().unwrap().train_prediction_loss;
        let last = outcome.report.last().unwrap().train_prediction_loss;
        assert!(last < first, "loss did not decrease: {first} -> {last}");
    }

    #[test]
    fn invalid_initial_model_is_rejected() {
        let mut model = tiny_model(8, 6);
        model.observer.a[(0, 0)] = f64::NAN;
        let dataset = random_dataset(9, 4, 2, 3);
        assert!(train(&model, &dataset, &TrainConfig::default(), |_| {}).is_err());
    }

    #[test]
    fn observer_convergence_contracts_on_a_certified_system() {
        // A − K·C_y = 0.5·I and g ≡ 0, so output error decays as 0.5^k.
        let n = 16;
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let mut model = tiny_model(11, n);
        model.observer.a = nalgebra::DMatrix::identity(n, n) * 0.5;
        model.observer.k = nalgebra::DMatrix::zeros(n, 14);
        model.observer.g.scale(0.0);
        let measurements: Vec<DVector<f64>> = (0..40).map(|_| DVector::zeros(14)).collect();
        let commands = vec![Command::zero(); 40];
        let stats = observer_convergence(
            &model.observer,
            &measurements,
            &commands,
            10,
            25,
            10.0,
            rng.gen(),
        )
        .unwrap();
        assert!(stats.initial_median > 1.0);
        assert!(
            stats.ratio < 0.5f64.powi(10) * 1.5,
            "ratio {} too large",
            stats.ratio
        );
    }

    #[test]
    fn horizon_errors_favor_exact_baseline_on_kinematic_data() {
        // Targets that exactly follow straight-line kinematics: the CV
        // baseline is exact, an untrained model is not.
        let model = tiny_model(12, 6);
        let dt = 0.02;
        let horizon = 5;
        let mut window = random_window(&mut ChaCha8Rng::seed_from_u64(13), 2, horizon);
        for (i, u) in window.commands.iter_mut().enumerate() {
            *u = if i < 2 {
                Command::zero()
            } else {
                Command::new(1.0, 0.0, 0.0)
            };
        }
        for (t, target) in window.targets.iter_mut().enumerate() {
            target.0 = FullBodyConfig::zeros();
            target.0.position.x = dt * (t + 1) as f64;
        }
        let curves = horizon_position_errors(&model, &[window], dt).unwrap();
        assert_relative_eq!(curves.baseline[horizon - 1], 0.0, epsilon = 1e-12);
        assert!(curves.learned[horizon - 1] > 1e-6);
    }

    #[test]
    fn median_handles_even_and_odd_lengths() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }
}

//! `bench`: wall-clock timings for batched rollouts and full planning
//! cycles.
//!
//! Reports per-sample rollout time at batch size 1 vs. the configured
//! batch, plus the duration of complete planning cycles (sampling, rollout,
//! scoring, averaging) for both the learned and constant-velocity
//! predictors on the cluttered preset scene.  Numbers are reported, never
//! gated: absolute speed depends on the host.

use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use nalgebra::DVector;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psr_core::checkpoint::load_model;
use psr_core::model::ModelParams;
use psr_core::nn::mlp::MlpParams;
use psr_core::occupancy::{
    fk_occupancy, load_occupancy, BodyGeometry, OccupancyModel, OccupancySampling,
};
use psr_core::predictor::batch_rollout;
use psr_core::types::{Command, PlanarPose, JOINT_DIM};
use psr_planner::{
    mppi_step, nominal_stance, CloudSource, GoalPose, MppiState, RolloutSource, SceneSpec,
};

use crate::config::GlobalConfig;
use crate::error::Result;
use crate::output::{version_string, write_json};

/// Arguments of the `bench` subcommand.
#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Rollout batch size (overrides the planner sample count).
    #[arg(long)]
    pub samples: Option<usize>,
    /// Rollout horizon in steps (overrides the planner horizon).
    #[arg(long)]
    pub horizon: Option<usize>,
    /// Planning cycles to time per predictor (0 skips cycle timing).
    #[arg(long, default_value_t = 1)]
    pub cycles: usize,
    /// Predictor checkpoint (a freshly initialized model is timed if
    /// omitted; timing does not depend on trained weights).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Occupancy checkpoint (an untrained network of the configured shape
    /// is timed if omitted).
    #[arg(long)]
    pub occupancy: Option<PathBuf>,
    /// RNG seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Write the timing report as JSON to this path.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn random_sequences(n: usize, t: usize, limit: f64, rng: &mut ChaCha8Rng) -> Vec<Vec<Command>> {
    (0..n)
        .map(|_| {
            (0..t)
                .map(|_| {
                    Command::new(
                        rng.gen_range(-limit..limit),
                        rng.gen_range(-limit..limit),
                        rng.gen_range(-limit..limit),
                    )
                })
                .collect()
        })
        .collect()
}

/// Runs the benchmark.
pub fn run(args: &BenchArgs) -> Result<()> {
    let mut cfg = GlobalConfig::load(args.config.as_deref())?;
    if let Some(n) = args.samples {
        cfg.mppi.samples = n;
    }
    if let Some(t) = args.horizon {
        cfg.mppi.horizon = t;
    }
    cfg.mppi.validate()?;

    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let model = match &args.model {
        Some(path) => load_model(path)?,
        None => ModelParams::init(&cfg.model, &mut rng),
    };
    let n = cfg.mppi.samples;
    let t = cfg.mppi.horizon;
    let threads = std::thread::available_parallelism()
        .map(|p| p.get())
        .unwrap_or(1);

    println!("# {}", version_string());
    println!(
        "bench: n_x={}, batch {}, horizon {}, {} worker threads",
        model.state_dim(),
        n,
        t,
        threads
    );

    // Batched rollout timing: per-sample time at batch 1 vs. batch n.
    let starts = vec![DVector::<f64>::zeros(model.state_dim())];
    let sequences = random_sequences(n, t, cfg.mppi.command_limit, &mut rng);
    let single = &sequences[..1];
    // Warm up allocators and the thread pool before timing.
    batch_rollout(&model, &starts, single)?;

    let reps_single = 10;
    let begin = Instant::now();
    for _ in 0..reps_single {
        batch_rollout(&model, &starts, single)?;
    }
    let per_sample_single = begin.elapsed().as_secs_f64() / reps_single as f64;

    let begin = Instant::now();
    batch_rollout(&model, &starts, &sequences)?;
    let batch_total = begin.elapsed().as_secs_f64();
    let per_sample_batch = batch_total / n as f64;

    println!(
        "bench: batch_rollout per-sample {:.3} ms at batch 1, {:.3} ms at batch {} ({:.1}% of single; batch total {:.3} s)",
        per_sample_single * 1e3,
        per_sample_batch * 1e3,
        n,
        100.0 * per_sample_batch / per_sample_single,
        batch_total
    );

    // Full planning cycles on the cluttered scene.
    let mut learned_cycle = None;
    let mut cv_cycle = None;
    if args.cycles > 0 {
        let map = SceneSpec::preset("clutter")?.voxel_map()?;
        let goal = GoalPose::new(5.0, 2.5, 1.57);
        let pose = PlanarPose::new(0.0, 0.0, 0.0);
        let base_z = cfg.surrogate.standing_height;
        let geometry = BodyGeometry::from_surrogate(&cfg.surrogate);
        let sampling = OccupancySampling::default();

        let occupancy = match &args.occupancy {
            Some(path) => load_occupancy(path)?,
            None => {
                let base = fk_occupancy(&geometry, &sampling, &nominal_stance(&cfg.surrogate))?;
                let net = MlpParams::init(
                    JOINT_DIM,
                    &cfg.occupancy.hidden,
                    3 * base.points.len(),
                    1.0,
                    &mut rng,
                );
                OccupancyModel {
                    input_offset: DVector::zeros(JOINT_DIM),
                    input_scale: DVector::from_element(JOINT_DIM, 1.0),
                    base: base.to_flat(),
                    net,
                }
            }
        };
        let latent = DVector::<f64>::zeros(model.state_dim());
        let cv_body = fk_occupancy(&geometry, &sampling, &nominal_stance(&cfg.surrogate))?;

        let mut time_cycles = |source: &RolloutSource| -> Result<f64> {
            let mut state = MppiState::new(&cfg.mppi);
            let mut total = 0.0;
            for _ in 0..args.cycles {
                let begin = Instant::now();
                mppi_step(
                    &cfg.mppi, &map, &goal, source, pose, base_z, &mut state, &mut rng,
                )?;
                total += begin.elapsed().as_secs_f64();
            }
            Ok(total / args.cycles as f64)
        };

        let learned = time_cycles(&RolloutSource::Learned {
            model: &model,
            latent: &latent,
            clouds: CloudSource::Model(&occupancy),
        })?;
        let cv = time_cycles(&RolloutSource::ConstantVelocity { body: &cv_body })?;
        println!(
            "bench: full planning cycle over {} cycle(s): learned {:.3} s, cv {:.3} s",
            args.cycles, learned, cv
        );
        learned_cycle = Some(learned);
        cv_cycle = Some(cv);
    }

    if let Some(path) = &args.out {
        write_json(
            path,
            &serde_json::json!({
                "state_dim": model.state_dim(),
                "batch": n,
                "horizon": t,
                "threads": threads,
                "per_sample_single_s": per_sample_single,
                "per_sample_batch_s": per_sample_batch,
                "batch_total_s": batch_total,
                "cycles": args.cycles,
                "learned_cycle_s": learned_cycle,
                "cv_cycle_s": cv_cycle,
            }),
        )?;
    }
    Ok(())
}

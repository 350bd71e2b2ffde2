//! `plan`: closed-loop goal-reaching trials on a voxel scene.
//!
//! Each trial runs the sampling planner against the surrogate robot from
//! its own seed and ends in success (pose tolerance held), collision
//! (ground-truth body cloud in an occupied voxel), or timeout.  Outputs,
//! all inside the output directory: `trials.csv` (one row per seed),
//! `trajectory_<seed>.csv` (true planar pose per step), `summary.json`,
//! and a copy of the scene as `scene.json`.

use std::path::{Path, PathBuf};

use clap::Args;

use psr_core::checkpoint::load_model;
use psr_core::occupancy::{load_occupancy, BodyGeometry, OccupancySampling};
use psr_planner::{
    run_navigation, summarize, CloudSource, GoalPose, NavigationTask, PredictorChoice, SceneSpec,
    TrialResult,
};

use crate::config::GlobalConfig;
use crate::error::{CliError, Result};
use crate::output::{ensure_dir, fmt_f64, version_string, write_json, CsvReport};

/// Arguments of the `plan` subcommand.
#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Scene: a preset name (open, narrow_passage, clutter) or a JSON file
    /// path.
    #[arg(long)]
    pub scene: String,
    /// Goal pose: x [m], y [m], yaw [rad].
    #[arg(long, num_args = 3, value_names = ["X", "Y", "YAW"])]
    pub goal: Vec<f64>,
    /// Predictor backing the planner's rollouts.
    #[arg(long)]
    pub predictor: PredictorChoice,
    /// Number of trials (seeds seed-start .. seed-start + seeds - 1).
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    /// First trial seed.
    #[arg(long, default_value_t = 0)]
    pub seed_start: u64,
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Predictor checkpoint (required with --predictor learned).
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Occupancy checkpoint for learned collision clouds.
    #[arg(long)]
    pub occupancy: Option<PathBuf>,
    /// Use exact forward-kinematics collision clouds instead of the
    /// learned occupancy model (validation mode; slower).
    #[arg(long)]
    pub oracle: bool,
    /// Use the reduced-density body cloud for planner-side collision
    /// checking (ground-truth collision always uses the full cloud).
    #[arg(long)]
    pub coarse: bool,
}

fn resolve_scene(scene: &str) -> Result<SceneSpec> {
    if scene.ends_with(".json") {
        Ok(SceneSpec::load(Path::new(scene))?)
    } else {
        Ok(SceneSpec::preset(scene)?)
    }
}

fn write_trials_csv(path: &Path, predictor: PredictorChoice, results: &[TrialResult]) -> Result<()> {
    let mut csv = CsvReport::new(&[
        "seed",
        "predictor",
        "success",
        "time_to_track_s",
        "collision",
        "collision_time_s",
        "final_position_error_m",
        "final_yaw_error_rad",
        "sim_duration_s",
        "plan_cycles",
    ]);
    for r in results {
        csv.row(&[
            r.seed.to_string(),
            predictor.to_string(),
            r.success.to_string(),
            r.time_to_track.map(fmt_f64).unwrap_or_default(),
            r.collision.to_string(),
            r.collision_time.map(fmt_f64).unwrap_or_default(),
            fmt_f64(r.final_position_error),
            fmt_f64(r.final_yaw_error),
            fmt_f64(r.sim_duration),
            r.plan_cycles.to_string(),
        ]);
    }
    csv.write(path)
}

fn write_trajectory_csv(path: &Path, dt: f64, result: &TrialResult) -> Result<()> {
    let mut csv = CsvReport::new(&["step", "time_s", "x_m", "y_m", "yaw_rad"]);
    for (step, pose) in result.trajectory.iter().enumerate() {
        csv.row(&[
            step.to_string(),
            fmt_f64(step as f64 * dt),
            fmt_f64(pose.x),
            fmt_f64(pose.y),
            fmt_f64(pose.yaw),
        ]);
    }
    csv.write(path)
}

/// Runs the trial batch.
pub fn run(args: &PlanArgs) -> Result<()> {
    let cfg = GlobalConfig::load(args.config.as_deref())?;
    if args.goal.len() != 3 {
        return Err(CliError::Config(
            "--goal takes exactly three values: x y yaw".into(),
        ));
    }
    if args.seeds == 0 {
        return Err(CliError::Config("--seeds must be at least 1".into()));
    }
    let goal = GoalPose::new(args.goal[0], args.goal[1], args.goal[2]);
    let spec = resolve_scene(&args.scene)?;
    let map = spec.voxel_map()?;

    let planner_sampling = if args.coarse {
        OccupancySampling::coarse()
    } else {
        OccupancySampling::default()
    };
    let geometry = BodyGeometry::from_surrogate(&cfg.surrogate);

    let model = match (args.predictor, &args.model) {
        (PredictorChoice::Learned, Some(path)) => Some(load_model(path)?),
        (PredictorChoice::Learned, None) => {
            return Err(CliError::Config(
                "--predictor learned requires --model".into(),
            ));
        }
        (PredictorChoice::ConstantVelocity, _) => None,
    };
    let occupancy = match (args.predictor, args.oracle, &args.occupancy) {
        (PredictorChoice::Learned, true, Some(_)) => {
            return Err(CliError::Config(
                "choose either --occupancy or --oracle, not both".into(),
            ));
        }
        (PredictorChoice::Learned, false, Some(path)) => Some(load_occupancy(path)?),
        (PredictorChoice::Learned, false, None) => {
            return Err(CliError::Config(
                "--predictor learned requires --occupancy (or --oracle)".into(),
            ));
        }
        _ => None,
    };
    let clouds = match args.predictor {
        PredictorChoice::Learned => Some(if args.oracle {
            CloudSource::Oracle {
                geometry: &geometry,
                sampling: &planner_sampling,
            }
        } else {
            CloudSource::Model(occupancy.as_ref().unwrap())
        }),
        PredictorChoice::ConstantVelocity => None,
    };

    let task = NavigationTask {
        map: &map,
        goal,
        mppi: &cfg.mppi,
        nav: &cfg.navigation,
        surrogate: &cfg.surrogate,
        planner_sampling: &planner_sampling,
        model: model.as_ref(),
        clouds,
    };

    ensure_dir(&args.out)?;
    spec.save(&args.out.join("scene.json"))?;

    let seeds: Vec<u64> = (args.seed_start..args.seed_start + args.seeds).collect();
    println!("# {}", version_string());
    println!(
        "plan: scene '{}', goal ({}, {}, {}), predictor {}{}, {} trials",
        args.scene,
        goal.x,
        goal.y,
        goal.yaw,
        args.predictor,
        if args.oracle { " (oracle clouds)" } else { "" },
        seeds.len()
    );

    let results = run_navigation(&task, args.predictor, &seeds)?;
    write_trials_csv(&args.out.join("trials.csv"), args.predictor, &results)?;
    for r in &results {
        write_trajectory_csv(
            &args.out.join(format!("trajectory_{}.csv", r.seed)),
            cfg.surrogate.dt,
            r,
        )?;
        let status = if r.success {
            "success"
        } else if r.collision {
            "collision"
        } else {
            "timeout"
        };
        println!(
            "plan: seed {:>3}: {status} (final error {:.3} m / {:.3} rad, {:.1} s simulated)",
            r.seed, r.final_position_error, r.final_yaw_error, r.sim_duration
        );
    }

    let summary = summarize(&results);
    write_json(
        &args.out.join("summary.json"),
        &serde_json::json!({
            "scene": args.scene,
            "goal": [goal.x, goal.y, goal.yaw],
            "predictor": args.predictor.to_string(),
            "oracle_clouds": args.oracle,
            "seeds": seeds,
            "summary": summary,
        }),
    )?;
    println!(
        "plan: {}/{} successes, {} collisions, {} timeouts{}",
        summary.successes,
        summary.trials,
        summary.collisions,
        summary.timeouts,
        summary
            .mean_time_to_track
            .map(|t| format!(", mean time-to-track {t:.2} s"))
            .unwrap_or_default()
    );
    println!("plan: reports written to {}", args.out.display());
    Ok(())
}

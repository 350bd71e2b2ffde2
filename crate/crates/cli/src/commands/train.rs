//! `train`: fit the observer-predictor (default) or the occupancy network
//! (`--occupancy`).
//!
//! Predictor mode reads a dataset, runs the stability-regularized training
//! loop, and saves the checkpoint with the best held-out prediction loss.
//! Occupancy mode needs no dataset file: it samples gait joint
//! configurations from the surrogate, fits the residual cloud network
//! against exact forward kinematics, and saves that checkpoint instead.

use std::path::PathBuf;

use clap::Args;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use psr_core::checkpoint::save_model;
use psr_core::dataset::read_dataset;
use psr_core::model::ModelParams;
use psr_core::occupancy::{
    fk_occupancy, gait_joint_samples, save_occupancy, train_occupancy, BodyGeometry,
    OccupancySampling,
};
use psr_core::stability::stability_report;
use psr_core::training::train;

use crate::config::GlobalConfig;
use crate::error::{CliError, Result};
use crate::output::{fmt_f64, version_string, write_json, CsvReport};

/// Arguments of the `train` subcommand.
#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Input dataset (required unless --occupancy is set).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output checkpoint file.
    #[arg(long)]
    pub out: PathBuf,
    /// Configuration file (TOML); defaults apply when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Seed override for initialization and shuffling.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Disable the stability penalty (sets its weight to zero).
    #[arg(long)]
    pub no_stab: bool,
    /// Write a per-epoch metrics CSV (predictor) or a JSON summary
    /// (occupancy) to this path.
    #[arg(long)]
    pub report: Option<PathBuf>,
    /// Also save the final-epoch parameters (predictor mode only).
    #[arg(long)]
    pub final_out: Option<PathBuf>,
    /// Train the occupancy network instead of the predictor.
    #[arg(long)]
    pub occupancy: bool,
    /// Number of gait joint samples for occupancy training.
    #[arg(long, default_value_t = 1500)]
    pub samples: usize,
    /// Use the reduced-density body cloud for occupancy training.
    #[arg(long)]
    pub coarse: bool,
    /// Export forward-kinematics vs. predicted clouds for a few sample
    /// configurations as CSV (occupancy mode only).
    #[arg(long)]
    pub cloud_csv: Option<PathBuf>,
}

/// Runs training in the selected mode.
pub fn run(args: &TrainArgs) -> Result<()> {
    let cfg = GlobalConfig::load(args.config.as_deref())?;
    if args.occupancy {
        run_occupancy(args, &cfg)
    } else {
        run_predictor(args, &cfg)
    }
}

fn run_predictor(args: &TrainArgs, cfg: &GlobalConfig) -> Result<()> {
    let data_path = args.data.as_ref().ok_or_else(|| {
        CliError::Config("predictor training requires --data (see --occupancy for the cloud model)".into())
    })?;
    if args.cloud_csv.is_some() {
        return Err(CliError::Config(
            "--cloud-csv only applies to --occupancy mode".into(),
        ));
    }
    let dataset = read_dataset(data_path)?;

    let mut tcfg = cfg.training.clone();
    if let Some(seed) = args.seed {
        tcfg.seed = seed;
    }
    if args.no_stab {
        tcfg.stability_weight = 0.0;
    }

    let mut rng = ChaCha8Rng::seed_from_u64(tcfg.seed);
    let initial = ModelParams::init(&cfg.model, &mut rng);

    println!("# {}", version_string());
    println!(
        "train: {} windows (H={}, T={}), n_x={}, alpha={}, seed {}",
        dataset.windows.len(),
        dataset.history_len,
        dataset.horizon,
        cfg.model.state_dim,
        tcfg.stability_weight,
        tcfg.seed
    );

    let mut records = Vec::with_capacity(tcfg.epochs);
    let outcome = train(&initial, &dataset, &tcfg, |r| {
        println!(
            "epoch {:>3}: train {:.6}  test {:.6}  stab {:.6}  rho {:.6}",
            r.epoch, r.train_prediction_loss, r.test_prediction_loss, r.stability_loss, r.rho
        );
        records.push(r.clone());
    })?;

    save_model(&args.out, &outcome.model)?;
    if let Some(final_out) = &args.final_out {
        save_model(final_out, &outcome.final_model)?;
    }

    if let Some(report_path) = &args.report {
        let mut csv = CsvReport::new(&[
            "epoch",
            "train_prediction_loss",
            "test_prediction_loss",
            "stability_loss",
            "rho",
        ]);
        for r in &records {
            csv.row(&[
                r.epoch.to_string(),
                fmt_f64(r.train_prediction_loss),
                fmt_f64(r.test_prediction_loss),
                fmt_f64(r.stability_loss),
                fmt_f64(r.rho),
            ]);
        }
        csv.write(report_path)?;
    }

    let report = stability_report(&outcome.model.observer, 0.0);
    println!(
        "train: best epoch {} saved to {} (rho = {:.6}, {})",
        outcome.best_epoch,
        args.out.display(),
        report.rho,
        if report.rho < 1.0 {
            "contractive"
        } else {
            "NOT contractive"
        }
    );
    Ok(())
}

fn run_occupancy(args: &TrainArgs, cfg: &GlobalConfig) -> Result<()> {
    if args.data.is_some() || args.no_stab || args.final_out.is_some() {
        return Err(CliError::Config(
            "--data, --no-stab, and --final-out do not apply to --occupancy mode".into(),
        ));
    }
    let mut ocfg = cfg.occupancy.clone();
    if let Some(seed) = args.seed {
        ocfg.seed = seed;
    }
    let geometry = BodyGeometry::from_surrogate(&cfg.surrogate);
    let sampling = if args.coarse {
        OccupancySampling::coarse()
    } else {
        OccupancySampling::default()
    };

    println!("# {}", version_string());
    println!(
        "train --occupancy: {} joint samples, {} cloud points, hidden {:?}, seed {}",
        args.samples,
        sampling.point_count(),
        ocfg.hidden,
        ocfg.seed
    );

    let thetas = gait_joint_samples(&cfg.surrogate, args.samples, ocfg.seed)?;
    let (model, holdout_error) = train_occupancy(&geometry, &sampling, &thetas, &ocfg)?;
    save_occupancy(&args.out, &model)?;

    if let Some(cloud_path) = &args.cloud_csv {
        let mut csv = CsvReport::new(&[
            "pose", "point", "fk_x", "fk_y", "fk_z", "model_x", "model_y", "model_z",
        ]);
        for (pose_idx, theta) in thetas.iter().take(3).enumerate() {
            let fk = fk_occupancy(&geometry, &sampling, theta)?;
            let predicted = model.eval(theta)?;
            for (point_idx, (f, p)) in fk.points.iter().zip(predicted.points.iter()).enumerate() {
                csv.row(&[
                    pose_idx.to_string(),
                    point_idx.to_string(),
                    fmt_f64(f.x),
                    fmt_f64(f.y),
                    fmt_f64(f.z),
                    fmt_f64(p.x),
                    fmt_f64(p.y),
                    fmt_f64(p.z),
                ]);
            }
        }
        csv.write(cloud_path)?;
    }

    if let Some(report_path) = &args.report {
        write_json(
            report_path,
            &serde_json::json!({
                "samples": args.samples,
                "cloud_points": sampling.point_count(),
                "hidden": ocfg.hidden,
                "epochs": ocfg.epochs,
                "seed": ocfg.seed,
                "holdout_mean_point_error_m": holdout_error,
            }),
        )?;
    }

    println!(
        "train --occupancy: held-out mean per-point error {:.5} m, saved to {}",
        holdout_error,
        args.out.display()
    );
    Ok(())
}

//! `psr`: command-line entry point for the full pipeline — dataset
//! generation, training, evaluation, stability verification, benchmarking,
//! and closed-loop planning.
//!
//! Every subcommand is deterministic given its `--seed`, writes output
//! files atomically (temp file + rename), and stamps the tool version into
//! every report header.  Failures exit nonzero with a one-line JSON error
//! record on stderr; each error class has its own exit code (see
//! [`error::CliError`]).

mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};

/// Observer-predictor pipeline tools.
#[derive(Debug, Parser)]
#[command(name = "psr", version, about = "Full-body motion prediction and planning pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate the surrogate robot and write a windowed training dataset.
    GenData(commands::gen_data::GenDataArgs),
    /// Train the observer-predictor (or, with --occupancy, the cloud model).
    Train(commands::train::TrainArgs),
    /// Evaluate a checkpoint on held-out windows against the CV baseline.
    Eval(commands::eval::EvalArgs),
    /// Certify the contraction condition and check its bounds empirically.
    VerifyStability(commands::verify::VerifyArgs),
    /// Time batched rollouts and full planning cycles.
    Bench(commands::bench::BenchArgs),
    /// Run closed-loop goal-reaching trials on a voxel scene.
    Plan(commands::plan::PlanArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenData(args) => commands::gen_data::run(args),
        Command::Train(args) => commands::train::run(args),
        Command::Eval(args) => commands::eval::run(args),
        Command::VerifyStability(args) => commands::verify::run(args),
        Command::Bench(args) => commands::bench::run(args),
        Command::Plan(args) => commands::plan::run(args),
    };
    if let Err(e) = result {
        let record = serde_json::json!({
            "version": output::version_string(),
            "error": e.class(),
            "message": e.to_string(),
        });
        eprintln!("{record}");
        std::process::exit(e.exit_code());
    }
}

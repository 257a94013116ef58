use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod cmd;
mod output;

use output::UsageError;

#[derive(Parser)]
#[command(
    name = "asmkit",
    version,
    about = "Hierarchical assembly planning toolkit"
)]
struct Cli {
    /// Print machine-readable JSON instead of tables.
    #[arg(long, global = true)]
    json: bool,
    /// Random seed; commands with their own seed treat this as an override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check furniture item files (or directories of them).
    Validate(cmd::validate::Args),
    /// Canonical form and validity of a nested-list tree.
    Canonicalize(cmd::graph::CanonArgs),
    /// Enumerate feasible assembly orders.
    Orders(cmd::graph::OrdersArgs),
    /// Sample a connected subassembly from an item's connectivity.
    Sample(cmd::graph::SampleArgs),
    /// Score predicted trees against ground-truth items.
    EvalPlan(cmd::eval::Args),
    /// Pose metrics (geodesic distance, RMSE, chamfer, part accuracy).
    Metrics(cmd::pose::MetricsArgs),
    /// Weighted pose loss, minimized over equivalent-part reassignments.
    Loss(cmd::pose::LossArgs),
    /// Heuristic grasp for a point cloud.
    Grasp(cmd::pose::GraspArgs),
    /// Run a simulation scenario and report success rate and ACR.
    Simulate(cmd::sim::Args),
    /// Manual and scene images to an assembly graph via a VLM.
    Pipeline(cmd::pipeline::Args),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let ctx = output::Ctx {
        json: cli.json,
        seed: cli.seed,
    };
    let result = match cli.command {
        Command::Validate(a) => cmd::validate::run(&ctx, a),
        Command::Canonicalize(a) => cmd::graph::canonicalize(&ctx, a),
        Command::Orders(a) => cmd::graph::orders(&ctx, a),
        Command::Sample(a) => cmd::graph::sample(&ctx, a),
        Command::EvalPlan(a) => cmd::eval::run(&ctx, a),
        Command::Metrics(a) => cmd::pose::metrics(&ctx, a),
        Command::Loss(a) => cmd::pose::loss(&ctx, a),
        Command::Grasp(a) => cmd::pose::grasp(&ctx, a),
        Command::Simulate(a) => cmd::sim::run(&ctx, a),
        Command::Pipeline(a) => cmd::pipeline::run(&ctx, a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

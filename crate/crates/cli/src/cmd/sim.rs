use std::collections::BTreeMap;
use std::path::PathBuf;

use assembly_core::geometry::Pose;
use assembly_core::graph::PartId;
use assembly_core::sim::{Scenario, StepStatus};
use serde::Serialize;

use crate::output::{parse_assignments, print_json, usage, Ctx, OrUsage};

#[derive(clap::Args)]
pub struct Args {
    /// Scenario file.
    scenario: PathBuf,
    /// Number of trials; trial t uses seed + t.
    #[arg(long, default_value_t = 1)]
    trials: usize,
    /// Overrides, e.g. "too_far_translation=0.05,too_far_rotation_deg=15,attachment=0.01".
    #[arg(long, default_value = "")]
    thresholds: String,
}

#[derive(Serialize)]
struct StepLine {
    step: usize,
    status: StepStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    detail: Option<String>,
}

#[derive(Serialize)]
struct TrialLine {
    trial: usize,
    completed: usize,
    total_steps: usize,
    success: bool,
    failure: Option<StepStatus>,
    initial: BTreeMap<PartId, Pose>,
    steps: Vec<StepLine>,
}

#[derive(Serialize)]
struct Report {
    scenario: String,
    seed: u64,
    trials: usize,
    success_rate: f64,
    acr: f64,
    results: Vec<TrialLine>,
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<u8> {
    if args.trials == 0 {
        return Err(usage("--trials must be at least 1"));
    }
    let mut sc = Scenario::from_file(&args.scenario)
        .or_usage(format!("cannot load {}", args.scenario.display()))?;
    sc.seed = ctx.seed_or(sc.seed);
    for (k, v) in parse_assignments(&args.thresholds)? {
        match k.as_str() {
            "too_far_translation" => sc.params.too_far_translation = v,
            "too_far_rotation_deg" => sc.params.too_far_rotation_deg = v,
            "attachment" => sc.params.attachment = v,
            other => return Err(usage(format!("unknown threshold `{other}`"))),
        }
    }
    let sim = sc.run(args.trials)?;
    let results: Vec<TrialLine> = sim
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| TrialLine {
            trial: i,
            completed: t.completed(),
            total_steps: t.total_steps,
            success: t.is_success(),
            failure: t.failure(),
            initial: sc.initial_poses(i as u64),
            steps: t
                .outcomes
                .iter()
                .map(|o| StepLine {
                    step: o.step,
                    status: o.status,
                    detail: o.detail.clone(),
                })
                .collect(),
        })
        .collect();
    let report = Report {
        scenario: args.scenario.display().to_string(),
        seed: sc.seed,
        trials: args.trials,
        success_rate: sim.success_rate,
        acr: sim.acr,
        results,
    };
    if ctx.json {
        print_json(&report);
    } else {
        println!("{:>5}  {:>9}  result", "trial", "completed");
        for t in &report.results {
            let result = match (&t.failure, t.steps.last().and_then(|s| s.detail.as_deref())) {
                (None, _) => "success".to_string(),
                (Some(f), Some(d)) => format!("{f}: {d}"),
                (Some(f), None) => f.to_string(),
            };
            println!(
                "{:>5}  {:>9}  {}",
                t.trial,
                format!("{}/{}", t.completed, t.total_steps),
                result
            );
        }
        println!(
            "success rate {:.1}%  ACR {:.3}  ({} trials, seed {})",
            100.0 * report.success_rate,
            report.acr,
            report.trials,
            report.seed
        );
    }
    Ok(0)
}

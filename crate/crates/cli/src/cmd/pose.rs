use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use assembly_core::geometry::{
    chamfer_distance, geodesic_distance, part_accuracy, rmse_translation, rmse_translations,
    AccuracyMode, PointCloud, Pose,
};
use assembly_core::graph::{EquivalenceClasses, PartId};
use assembly_core::objectives::{
    permutation_min_loss, total_loss, LossBreakdown, LossOptions, LossWeights, PermutationMin,
    StepPrediction, DEFAULT_LOSS_PERMUTATION_CAP,
};
use assembly_core::sim::{heuristic_grasp, CloudSource, GraspParams, GraspSpec};
use serde::{Deserialize, Serialize};

use crate::output::{parse_assignments, print_json, read_json, usage, Ctx, OrUsage};

/// Clouds plus ground-truth and predicted poses, keyed by part.
#[derive(Deserialize)]
struct PoseSet {
    clouds: BTreeMap<PartId, CloudSource>,
    gt: BTreeMap<PartId, Pose>,
    pred: BTreeMap<PartId, Pose>,
    #[serde(default)]
    equivalences: Vec<(PartId, PartId)>,
}

struct LoadedSet {
    clouds: BTreeMap<PartId, PointCloud>,
    gt: BTreeMap<PartId, Pose>,
    pred: BTreeMap<PartId, Pose>,
    equivalences: Vec<(PartId, PartId)>,
}

fn load_set(path: &Path) -> anyhow::Result<LoadedSet> {
    let set: PoseSet = read_json(path)?;
    let base = path.parent().unwrap_or(Path::new("."));
    let clouds = set
        .clouds
        .iter()
        .map(|(id, src)| Ok((*id, src.load(*id, base).or_usage(format!("part {id}"))?)))
        .collect::<anyhow::Result<BTreeMap<_, _>>>()?;
    if !set.gt.keys().eq(clouds.keys()) || !set.pred.keys().eq(clouds.keys()) {
        return Err(usage(format!(
            "{}: clouds, gt and pred must list the same parts",
            path.display()
        )));
    }
    Ok(LoadedSet {
        clouds,
        gt: set.gt,
        pred: set.pred,
        equivalences: set.equivalences,
    })
}

#[derive(clap::Args)]
pub struct MetricsArgs {
    /// Pose set file: {"clouds":{..},"gt":{..},"pred":{..}}.
    poses: PathBuf,
    /// Threshold overrides, e.g. "pa=0.01".
    #[arg(long, default_value = "")]
    thresholds: String,
    /// Compare the square root of the chamfer distance with the PA threshold.
    #[arg(long)]
    root_cd: bool,
}

#[derive(Serialize)]
struct PartMetrics {
    geodesic: f64,
    geodesic_deg: f64,
    translation_error: f64,
    chamfer: f64,
    accurate: bool,
}

#[derive(Serialize)]
struct MetricsReport {
    pa_threshold: f64,
    root_cd: bool,
    parts: BTreeMap<PartId, PartMetrics>,
    mean_geodesic: f64,
    rmse: f64,
    mean_chamfer: f64,
    part_accuracy: f64,
}

pub fn metrics(ctx: &Ctx, args: MetricsArgs) -> anyhow::Result<u8> {
    let mut pa = 0.01;
    for (k, v) in parse_assignments(&args.thresholds)? {
        match k.as_str() {
            "pa" => pa = v,
            other => return Err(usage(format!("unknown threshold `{other}` (expected pa)"))),
        }
    }
    let set = load_set(&args.poses)?;
    let mode = if args.root_cd {
        AccuracyMode::Root
    } else {
        AccuracyMode::Squared
    };
    let mut parts = BTreeMap::new();
    for (id, cloud) in &set.clouds {
        let (g, p) = (&set.gt[id], &set.pred[id]);
        let gd = geodesic_distance(&g.rotation, &p.rotation);
        parts.insert(
            *id,
            PartMetrics {
                geodesic: gd,
                geodesic_deg: gd.to_degrees(),
                translation_error: rmse_translation(&g.translation, &p.translation),
                chamfer: chamfer_distance(&cloud.transformed(g), &cloud.transformed(p))?,
                accurate: part_accuracy(g, p, cloud, pa, mode)?,
            },
        );
    }
    let n = parts.len() as f64;
    let report = MetricsReport {
        pa_threshold: pa,
        root_cd: args.root_cd,
        mean_geodesic: parts.values().map(|m| m.geodesic).sum::<f64>() / n,
        rmse: rmse_translations(
            set.gt
                .keys()
                .map(|k| (&set.gt[k].translation, &set.pred[k].translation)),
        )
        .unwrap_or(0.0),
        mean_chamfer: parts.values().map(|m| m.chamfer).sum::<f64>() / n,
        part_accuracy: parts.values().filter(|m| m.accurate).count() as f64 / n,
        parts,
    };
    if ctx.json {
        print_json(&report);
    } else {
        println!(
            "{:>6}  {:>10}  {:>10}  {:>12}  PA",
            "part", "GD (deg)", "trans (m)", "CD"
        );
        for (id, m) in &report.parts {
            println!(
                "{:>6}  {:>10.3}  {:>10.4}  {:>12.6}  {}",
                id.to_string(),
                m.geodesic_deg,
                m.translation_error,
                m.chamfer,
                if m.accurate { "yes" } else { "no" }
            );
        }
        println!(
            "GD {:.4} rad, RMSE {:.4} m, CD {:.6}, PA {:.1}% (threshold {})",
            report.mean_geodesic,
            report.rmse,
            report.mean_chamfer,
            100.0 * report.part_accuracy,
            pa
        );
    }
    Ok(0)
}

#[derive(clap::Args)]
pub struct LossArgs {
    /// Pose set file with canonical-frame clouds and equivalences.
    step: PathBuf,
    /// Weights of the rotation, translation, chamfer, point-cloud and
    /// repulsion terms.
    #[arg(long, default_value = "1,1,1,20,0.1")]
    weights: String,
    /// Maximum number of reassignments searched.
    #[arg(long, default_value_t = DEFAULT_LOSS_PERMUTATION_CAP)]
    permutation_cap: u128,
    /// Use the squared translation error.
    #[arg(long)]
    squared_translation: bool,
}

#[derive(Serialize)]
struct LossReport {
    weights: LossWeights,
    identity: LossBreakdown,
    minimum: PermutationMin,
}

pub fn loss(ctx: &Ctx, args: LossArgs) -> anyhow::Result<u8> {
    let weights = LossWeights::parse(&args.weights).map_err(usage)?;
    let set = load_set(&args.step)?;
    let classes = EquivalenceClasses::from_pairs(set.equivalences.iter().copied());
    let step = StepPrediction::new(set.pred, set.gt, set.clouds, classes).map_err(usage)?;
    let opts = LossOptions {
        squared_translation: args.squared_translation,
    };
    let identity = total_loss(&step, &weights, opts)?;
    let minimum = permutation_min_loss(&step, &weights, opts, args.permutation_cap)?;
    let report = LossReport {
        weights,
        identity,
        minimum,
    };
    if ctx.json {
        print_json(&report);
    } else {
        let w = &report.minimum.loss.weighted;
        println!("identity assignment  {:.6}", report.identity.total);
        println!(
            "minimum              {:.6}  ({} assignments tried)",
            report.minimum.loss.total, report.minimum.permutations_tried
        );
        println!(
            "  rot {:.6}  trans {:.6}  chamfer {:.6}  pc {:.6}  equiv {:.6}",
            w.rot, w.trans, w.chamfer, w.pc, w.equiv
        );
        let moved: Vec<String> = report
            .minimum
            .assignment
            .iter()
            .filter(|(a, b)| a != b)
            .map(|(a, b)| format!("{a}<-{b}"))
            .collect();
        if !moved.is_empty() {
            println!("  reassigned {}", moved.join(" "));
        }
    }
    Ok(0)
}

#[derive(clap::Args)]
pub struct GraspArgs {
    /// Point cloud file (.xyz or .ply).
    #[arg(long, conflicts_with = "box_size")]
    cloud: Option<PathBuf>,
    /// Box part instead of a cloud file: "sx,sy,sz".
    #[arg(long = "box")]
    box_size: Option<String>,
    /// Sample spacing for --box.
    #[arg(long, default_value_t = 0.01)]
    spacing: f64,
    /// Part pose as {"q":[w,x,y,z],"t":[x,y,z]}; identity by default.
    #[arg(long)]
    pose: Option<String>,
}

pub fn grasp(ctx: &Ctx, args: GraspArgs) -> anyhow::Result<u8> {
    let source = match (&args.cloud, &args.box_size) {
        (Some(p), None) => CloudSource::Path(p.clone()),
        (None, Some(b)) => {
            let v: Vec<f64> = b
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<_, _>>()
                .or_usage(format!("bad box size `{b}`"))?;
            let size: [f64; 3] = v.try_into().map_err(|_| usage("--box needs three sizes"))?;
            CloudSource::Box {
                size,
                spacing: args.spacing,
            }
        }
        _ => return Err(usage("give exactly one of --cloud and --box")),
    };
    let cloud = source.load(PartId(0), Path::new(".")).map_err(usage)?;
    let pose: Pose = match &args.pose {
        Some(t) => serde_json::from_str(t).or_usage("bad --pose")?,
        None => Pose::identity(),
    };
    let spec: GraspSpec = heuristic_grasp(&cloud, &pose, &GraspParams::default())?;
    if ctx.json {
        print_json(&spec);
    } else {
        println!("strategy  {:?}", spec.strategy);
        println!(
            "contact   [{:.4}, {:.4}, {:.4}]",
            spec.contact.x, spec.contact.y, spec.contact.z
        );
        println!(
            "extents   [{:.4}, {:.4}, {:.4}]",
            spec.extents[0], spec.extents[1], spec.extents[2]
        );
        println!("gripper   {}", spec.pose);
    }
    Ok(0)
}

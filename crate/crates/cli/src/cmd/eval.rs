use std::path::{Path, PathBuf};

use assembly_core::eval::{
    batch_evaluate, best_of_k, Bucket, EvalItem, MatchMode, ReportMode, DEFAULT_PERMUTATION_CAP,
};
use assembly_core::graph::{parse_tree, AssemblyGraph};
use assembly_core::item::FurnitureItem;
use serde::Deserialize;

use super::validate::item_files;
use crate::output::{print_json, usage, Ctx, OrUsage};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of predictions, one `<id>.json` per item.
    pred_dir: PathBuf,
    /// Directory of ground-truth item files.
    gt_dir: PathBuf,
    /// Score shown in the table: exact, simple or hard.
    #[arg(long, default_value = "exact")]
    mode: ReportMode,
    /// Part-count buckets, e.g. "2-4,5-6,7-8,9+".
    #[arg(long, conflicts_with = "per_count")]
    buckets: Option<String>,
    /// One bucket per part count over the given range, e.g. "2-16".
    #[arg(long)]
    per_count: Option<String>,
    /// Maximum within-class relabelings explored per item.
    #[arg(long, default_value_t = DEFAULT_PERMUTATION_CAP)]
    permutation_cap: u128,
    /// Score the best of each prediction's `candidates` instead of `tree`.
    #[arg(long)]
    best_of_k: bool,
    /// Row label of the table.
    #[arg(long, default_value = "Ours")]
    method: String,
}

/// Prediction file; the output of `asmkit pipeline` has this shape.
#[derive(Deserialize)]
struct Prediction {
    #[serde(default)]
    tree: Option<serde_json::Value>,
    #[serde(default)]
    candidates: Vec<serde_json::Value>,
    #[serde(default)]
    error: Option<String>,
}

fn tree_text(v: &serde_json::Value) -> String {
    match v {
        serde_json::Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn parse_graph(v: &serde_json::Value) -> Result<AssemblyGraph, String> {
    let text = tree_text(v);
    parse_tree(&text)
        .map(|t| AssemblyGraph::from_tree(&t, []))
        .map_err(|e| format!("unparsable prediction `{text}`: {e}"))
}

fn load_prediction(
    path: &Path,
    gt: &AssemblyGraph,
    args: &Args,
) -> anyhow::Result<Result<AssemblyGraph, String>> {
    if !path.is_file() {
        return Ok(Err("no prediction".into()));
    }
    let text = std::fs::read_to_string(path).or_usage(format!("cannot read {}", path.display()))?;
    let p: Prediction = match serde_json::from_str(&text) {
        Ok(p) => p,
        Err(e) => return Ok(Err(format!("bad prediction file: {e}"))),
    };
    if args.best_of_k && !p.candidates.is_empty() {
        let graphs: Vec<AssemblyGraph> = p
            .candidates
            .iter()
            .filter_map(|c| parse_graph(c).ok())
            .collect();
        let mode = if args.mode == ReportMode::Hard {
            MatchMode::Hard
        } else {
            MatchMode::Simple
        };
        let classes = gt.equivalence_classes();
        return Ok(
            match best_of_k(&graphs, gt, &classes, mode, args.permutation_cap) {
                Ok(Some((i, _))) => Ok(graphs[i].clone()),
                Ok(None) => Err("no usable candidate".into()),
                Err(e) => Err(e.to_string()),
            },
        );
    }
    Ok(match (&p.tree, p.error) {
        (Some(t), _) if !t.is_null() => parse_graph(t),
        (_, Some(e)) => Err(e),
        _ => Err("prediction has no tree".into()),
    })
}

fn item_id(path: &Path, item: &FurnitureItem) -> String {
    if let Some(id) = &item.id {
        return id.clone();
    }
    let stem = if path.file_name().is_some_and(|n| n == "item.json") {
        path.parent().and_then(|p| p.file_name())
    } else {
        path.file_stem()
    };
    stem.map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default()
}

pub fn run(ctx: &Ctx, args: Args) -> anyhow::Result<u8> {
    if !args.gt_dir.is_dir() {
        return Err(usage(format!(
            "{} is not a directory",
            args.gt_dir.display()
        )));
    }
    if !args.pred_dir.is_dir() {
        return Err(usage(format!(
            "{} is not a directory",
            args.pred_dir.display()
        )));
    }
    let buckets = match (&args.buckets, &args.per_count) {
        (Some(b), _) => Some(Bucket::parse_list(b).map_err(usage)?),
        (None, Some(r)) => {
            let (lo, hi) = r
                .split_once('-')
                .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)))
                .ok_or_else(|| usage(format!("bad range `{r}`, expected lo-hi")))?;
            Some(Bucket::per_count(lo, hi))
        }
        (None, None) => None,
    };
    let mut items = Vec::new();
    for path in item_files(&args.gt_dir)? {
        let loaded =
            FurnitureItem::load(&path).or_usage(format!("cannot load {}", path.display()))?;
        let gt = loaded
            .item
            .gt_graph()
            .ok_or_else(|| usage(format!("{} has no ground-truth tree", path.display())))?;
        let id = item_id(&path, &loaded.item);
        let pred = load_prediction(&args.pred_dir.join(format!("{id}.json")), &gt, &args)?;
        items.push(EvalItem {
            id,
            pred,
            classes: gt.equivalence_classes(),
            part_count: gt.parts().len(),
            gt,
        });
    }
    if items.is_empty() {
        return Err(usage(format!("no items in {}", args.gt_dir.display())));
    }
    let report = batch_evaluate(&items, buckets.as_deref(), args.mode, args.permutation_cap);
    if ctx.json {
        print_json(&report);
    } else {
        print!("{}", report.table(&args.method));
        for (id, e) in &report.errors {
            println!("{id}: {e}");
        }
    }
    Ok(0)
}

use std::collections::BTreeSet;
use std::path::Path;

use assembly_core::graph::{
    feasible_orders, parse_tree, sample_subassembly, validate, AssemblyGraph, PartId,
};
use assembly_core::item::FurnitureItem;
use serde::Serialize;

use crate::output::{join, parse_pairs, print_json, usage, Ctx, OrUsage};

#[derive(clap::Args)]
pub struct CanonArgs {
    /// Nested list, e.g. "[[1,5],2]".
    tree: String,
    /// Equivalent part pairs, e.g. "2-7,3-4".
    #[arg(long, default_value = "")]
    equiv: String,
}

#[derive(Serialize)]
struct CanonReport {
    input: String,
    valid: bool,
    violations: Vec<String>,
    canonical: Option<String>,
    parts: usize,
    steps: usize,
    flat: bool,
    equivalence_classes: Vec<BTreeSet<PartId>>,
}

pub fn canonicalize(ctx: &Ctx, args: CanonArgs) -> anyhow::Result<u8> {
    let pairs = parse_pairs(&args.equiv)?;
    let tree =
        parse_tree(&args.tree).map_err(|e| anyhow::anyhow!("cannot parse `{}`: {e}", args.tree))?;
    let graph = AssemblyGraph::from_tree(&tree, pairs);
    let violations: Vec<String> = validate(&graph).iter().map(|v| v.to_string()).collect();
    let valid = violations.is_empty();
    let report = CanonReport {
        input: args.tree,
        canonical: valid.then(|| graph.canonical_form()).flatten(),
        parts: graph.parts().len(),
        steps: graph.non_leaf_nodes().count(),
        flat: graph.is_flat(),
        equivalence_classes: graph.equivalence_classes().classes().to_vec(),
        valid,
        violations,
    };
    if ctx.json {
        print_json(&report);
    } else if let Some(c) = &report.canonical {
        println!("{c}");
        println!(
            "{} parts, {} steps{}",
            report.parts,
            report.steps,
            if report.flat { ", flat" } else { "" }
        );
    } else {
        println!("invalid tree");
        for v in &report.violations {
            println!("  - {v}");
        }
    }
    Ok(if valid { 0 } else { 1 })
}

/// A nested-list literal, or an item file whose ground-truth tree is used.
fn load_graph(source: &str) -> anyhow::Result<AssemblyGraph> {
    let p = Path::new(source);
    if p.is_file() {
        let item = FurnitureItem::load(p).or_usage(format!("cannot load {source}"))?;
        return item
            .item
            .gt_graph()
            .ok_or_else(|| usage(format!("{source} has no ground-truth tree")));
    }
    let tree =
        parse_tree(source).or_usage(format!("`{source}` is neither a file nor a nested list"))?;
    Ok(AssemblyGraph::from_tree(&tree, []))
}

#[derive(clap::Args)]
pub struct OrdersArgs {
    /// Nested list or item file.
    source: String,
    /// Maximum number of orders listed.
    #[arg(long, default_value_t = 100)]
    limit: usize,
}

#[derive(Serialize)]
struct OrdersReport {
    tree: String,
    total: u128,
    listed: usize,
    /// Each order is a list of steps; each step is the part set it forms.
    orders: Vec<Vec<BTreeSet<PartId>>>,
}

pub fn orders(ctx: &Ctx, args: OrdersArgs) -> anyhow::Result<u8> {
    let graph = load_graph(&args.source)?;
    let en = feasible_orders(&graph, args.limit).map_err(|e| anyhow::anyhow!("{e}"))?;
    let orders: Vec<Vec<BTreeSet<PartId>>> = en
        .orders
        .iter()
        .map(|o| {
            o.0.iter()
                .map(|id| graph.node(*id).expect("order node").part_set.clone())
                .collect()
        })
        .collect();
    let report = OrdersReport {
        tree: graph.canonical_form().expect("validated"),
        total: en.total,
        listed: orders.len(),
        orders,
    };
    if ctx.json {
        print_json(&report);
    } else {
        println!("{}: {} feasible orders", report.tree, report.total);
        for (i, o) in report.orders.iter().enumerate() {
            let steps: Vec<String> = o.iter().map(|s| format!("{{{}}}", join(s, ","))).collect();
            println!("{:>4}. {}", i + 1, steps.join(" -> "));
        }
        if (report.listed as u128) < report.total {
            println!("({} more not listed)", report.total - report.listed as u128);
        }
    }
    Ok(0)
}

#[derive(clap::Args)]
pub struct SampleArgs {
    /// Item file with a connectivity list.
    item: std::path::PathBuf,
    /// Number of parts in the subassembly.
    #[arg(short = 'm', long)]
    parts: usize,
    /// Number of connected groups.
    #[arg(short = 'n', long)]
    groups: usize,
}

#[derive(Serialize)]
struct SampleReport {
    seed: u64,
    selected: BTreeSet<PartId>,
    groups: Vec<BTreeSet<PartId>>,
    sizes: Vec<usize>,
}

pub fn sample(ctx: &Ctx, args: SampleArgs) -> anyhow::Result<u8> {
    let item =
        FurnitureItem::load(&args.item).or_usage(format!("cannot load {}", args.item.display()))?;
    if item.item.connectivity.is_empty() {
        return Err(usage(format!(
            "{} has no connectivity list",
            args.item.display()
        )));
    }
    let seed = ctx.seed_or(0);
    let spec = sample_subassembly(&item.item.connectivity(), args.parts, args.groups, seed)
        .map_err(|e| anyhow::anyhow!("{e}"))?;
    let report = SampleReport {
        seed,
        sizes: spec.sizes(),
        selected: spec.selected,
        groups: spec.groups,
    };
    if ctx.json {
        print_json(&report);
    } else {
        println!("selected {{{}}}", join(&report.selected, ","));
        for g in &report.groups {
            println!("  group {{{}}}", join(g, ","));
        }
    }
    Ok(0)
}

//! Scoring predicted assembly graphs against ground truth, with parts in the
//! same equivalence class treated as interchangeable.

mod report;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

use crate::graph::{validate, AssemblyGraph, EquivalenceClasses, PartId, Tree, Violation};

pub use report::{
    batch_evaluate, default_buckets, Bucket, BucketSummary, EvalItem, EvaluationReport, ItemResult,
    ItemScores, MeanScores, ReportMode, DEFAULT_BUCKETS,
};

/// Default limit on within-class relabelings explored per item (8!).
pub const DEFAULT_PERMUTATION_CAP: u128 = 40_320;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MatchMode {
    Simple,
    Hard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub exact: bool,
    pub matched: usize,
    pub pred_nodes: usize,
    pub gt_nodes: usize,
}

impl MatchScores {
    pub fn from_counts(matched: usize, pred_nodes: usize, gt_nodes: usize, exact: bool) -> Self {
        let ratio = |n: usize| {
            if n == 0 {
                0.0
            } else {
                matched as f64 / n as f64
            }
        };
        let precision = ratio(pred_nodes);
        let recall = ratio(gt_nodes);
        MatchScores {
            precision,
            recall,
            f1: f1(precision, recall),
            exact,
            matched,
            pred_nodes,
            gt_nodes,
        }
    }

    pub fn zero(pred_nodes: usize, gt_nodes: usize) -> Self {
        Self::from_counts(0, pred_nodes, gt_nodes, false)
    }
}

pub fn f1(precision: f64, recall: f64) -> f64 {
    if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("prediction is not a valid assembly graph: {}", list(.0))]
    InvalidPrediction(Vec<Violation>),
    #[error("ground truth is not a valid assembly graph: {}", list(.0))]
    InvalidGroundTruth(Vec<Violation>),
    #[error("part sets differ: prediction lacks {missing:?}, prediction adds {extra:?}")]
    PartSetMismatch {
        missing: Vec<PartId>,
        extra: Vec<PartId>,
    },
    #[error("{required} relabelings needed, above the cap of {cap}")]
    CapExceeded { required: u128, cap: u128 },
}

fn list(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

fn check_pair(pred: &AssemblyGraph, gt: &AssemblyGraph) -> Result<(Tree, Tree), EvalError> {
    let v = validate(gt);
    if !v.is_empty() {
        return Err(EvalError::InvalidGroundTruth(v));
    }
    let v = validate(pred);
    if !v.is_empty() {
        return Err(EvalError::InvalidPrediction(v));
    }
    let (pp, gp) = (pred.parts(), gt.parts());
    if pp != gp {
        return Err(EvalError::PartSetMismatch {
            missing: gp.difference(&pp).copied().collect(),
            extra: pp.difference(&gp).copied().collect(),
        });
    }
    Ok((
        pred.to_tree().expect("valid graph"),
        gt.to_tree().expect("valid graph"),
    ))
}

/// Unordered-tree canonical string with every leaf replaced by its class
/// representative; children are sorted by their own canonical strings.
fn class_canonical(t: &Tree, classes: &EquivalenceClasses) -> String {
    match t {
        Tree::Leaf(p) => classes.representative(*p).to_string(),
        Tree::Node(ch) => {
            let mut parts: Vec<String> = ch.iter().map(|c| class_canonical(c, classes)).collect();
            parts.sort();
            format!("[{}]", parts.join(","))
        }
    }
}

/// True iff some relabeling of the prediction's leaves within equivalence
/// classes makes it isomorphic to the ground truth.
///
/// Two trees whose class-labelled canonical forms agree admit a
/// class-preserving leaf bijection, which is exactly such a relabeling, so
/// no enumeration is needed here.
pub fn exact_match(
    pred: &AssemblyGraph,
    gt: &AssemblyGraph,
    classes: &EquivalenceClasses,
) -> Result<bool, EvalError> {
    let (p, g) = check_pair(pred, gt)?;
    Ok(class_canonical(&p, classes) == class_canonical(&g, classes))
}

type PartSet = Vec<u32>;

#[derive(Debug, Clone)]
struct NodeView {
    parts: PartSet,
    children: Vec<PartSet>,
}

fn node_views(t: &Tree, out: &mut Vec<NodeView>) -> PartSet {
    match t {
        Tree::Leaf(p) => vec![p.0],
        Tree::Node(ch) => {
            let children: Vec<PartSet> = ch.iter().map(|c| node_views(c, out)).collect();
            let mut parts: PartSet = children.iter().flatten().copied().collect();
            parts.sort_unstable();
            out.push(NodeView { parts, children });
            out.last().expect("pushed").parts.clone()
        }
    }
}

fn relabel(set: &[u32], sigma: &BTreeMap<u32, u32>) -> PartSet {
    let mut v: PartSet = set.iter().map(|p| *sigma.get(p).unwrap_or(p)).collect();
    v.sort_unstable();
    v
}

fn hard_key(n: &NodeView, sigma: &BTreeMap<u32, u32>) -> (PartSet, Vec<PartSet>) {
    let mut ch: Vec<PartSet> = n.children.iter().map(|c| relabel(c, sigma)).collect();
    ch.sort();
    (relabel(&n.parts, sigma), ch)
}

/// Classes whose members are split by some predicted non-leaf node. Every
/// other class is either wholly inside or wholly outside each node, so
/// permuting it changes neither part sets nor child partitions.
fn relevant_classes(views: &[NodeView], classes: &EquivalenceClasses) -> Vec<Vec<u32>> {
    classes
        .classes()
        .iter()
        .filter(|c| {
            views.iter().any(|v| {
                let inside = c
                    .iter()
                    .filter(|p| v.parts.binary_search(&p.0).is_ok())
                    .count();
                inside != 0 && inside != c.len()
            })
        })
        .map(|c| c.iter().map(|p| p.0).collect())
        .collect()
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.reverse();
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).fold(1u128, |a, k| a.saturating_mul(k))
}

/// Best node-level agreement over within-class relabelings of the
/// prediction. Precision and recall share the matched count, so the
/// relabeling maximising it maximises all three scores; the first such
/// relabeling in lexicographic order is kept.
pub fn node_match_scores(
    pred: &AssemblyGraph,
    gt: &AssemblyGraph,
    classes: &EquivalenceClasses,
    mode: MatchMode,
    cap: u128,
) -> Result<MatchScores, EvalError> {
    let (pt, gt_tree) = check_pair(pred, gt)?;
    let exact = class_canonical(&pt, classes) == class_canonical(&gt_tree, classes);
    let mut pv = Vec::new();
    node_views(&pt, &mut pv);
    let mut gv = Vec::new();
    node_views(&gt_tree, &mut gv);
    if exact {
        return Ok(MatchScores::from_counts(pv.len(), pv.len(), gv.len(), true));
    }

    let relevant = relevant_classes(&pv, classes);
    let required = relevant
        .iter()
        .fold(1u128, |a, c| a.saturating_mul(factorial(c.len())));
    if required > cap {
        return Err(EvalError::CapExceeded { required, cap });
    }

    let identity = BTreeMap::new();
    let gt_sets: HashSet<PartSet> = gv.iter().map(|v| v.parts.clone()).collect();
    let gt_hard: HashSet<(PartSet, Vec<PartSet>)> =
        gv.iter().map(|v| hard_key(v, &identity)).collect();

    let count = |sigma: &BTreeMap<u32, u32>| -> usize {
        pv.iter()
            .filter(|v| match mode {
                MatchMode::Simple => gt_sets.contains(&relabel(&v.parts, sigma)),
                MatchMode::Hard => gt_hard.contains(&hard_key(v, sigma)),
            })
            .count()
    };

    let mut perms: Vec<Vec<usize>> = relevant.iter().map(|c| (0..c.len()).collect()).collect();
    let mut best = 0usize;
    loop {
        let mut sigma = BTreeMap::new();
        for (c, perm) in relevant.iter().zip(&perms) {
            for (i, &j) in perm.iter().enumerate() {
                sigma.insert(c[i], c[j]);
            }
        }
        let k = count(&sigma);
        if k > best {
            best = k;
            if best == pv.len().min(gv.len()) {
                break;
            }
        }
        // odometer over the classes, last class fastest
        let mut advanced = false;
        for perm in perms.iter_mut().rev() {
            if next_permutation(perm) {
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    Ok(MatchScores::from_counts(best, pv.len(), gv.len(), false))
}

/// Scores of the best of several predictions for one ground truth, ranked by
/// exact match, then F1, precision and recall; earliest wins ties.
pub fn best_of_k(
    preds: &[AssemblyGraph],
    gt: &AssemblyGraph,
    classes: &EquivalenceClasses,
    mode: MatchMode,
    cap: u128,
) -> Result<Option<(usize, MatchScores)>, EvalError> {
    let mut best: Option<(usize, MatchScores)> = None;
    for (i, p) in preds.iter().enumerate() {
        let s = match node_match_scores(p, gt, classes, mode, cap) {
            Ok(s) => s,
            Err(EvalError::InvalidPrediction(_)) | Err(EvalError::PartSetMismatch { .. }) => {
                continue
            }
            Err(e) => return Err(e),
        };
        let better = match &best {
            None => true,
            Some((_, b)) => {
                (s.exact, s.f1, s.precision, s.recall) > (b.exact, b.f1, b.precision, b.recall)
            }
        };
        if better {
            best = Some((i, s));
        }
    }
    Ok(best)
}

/// Part sets of every non-leaf node; handy for reports and tests.
pub fn non_leaf_part_sets(graph: &AssemblyGraph) -> Vec<BTreeSet<PartId>> {
    graph.non_leaf_nodes().map(|n| n.part_set.clone()).collect()
}

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{exact_match, node_match_scores, EvalError, MatchMode, MatchScores};
use crate::graph::{AssemblyGraph, EquivalenceClasses};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportMode {
    Exact,
    Simple,
    Hard,
}

impl std::str::FromStr for ReportMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(ReportMode::Exact),
            "simple" => Ok(ReportMode::Simple),
            "hard" => Ok(ReportMode::Hard),
            other => Err(format!(
                "unknown mode `{other}` (expected exact, simple or hard)"
            )),
        }
    }
}

/// Inclusive part-count range; `max = None` is open-ended.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Bucket {
    pub label: String,
    pub min: usize,
    pub max: Option<usize>,
}

impl Bucket {
    pub fn new(min: usize, max: Option<usize>) -> Self {
        let label = match max {
            Some(m) if m == min => format!("{min}"),
            Some(m) => format!("{min}~{m}"),
            None => format!("{min}+"),
        };
        Bucket { label, min, max }
    }

    pub fn contains(&self, n: usize) -> bool {
        n >= self.min && self.max.is_none_or(|m| n <= m)
    }

    /// One bucket per part count from `lo` to `hi`.
    pub fn per_count(lo: usize, hi: usize) -> Vec<Bucket> {
        (lo..=hi).map(|n| Bucket::new(n, Some(n))).collect()
    }

    /// Parses `2-4,5-6,7-8,9+` style specifications.
    pub fn parse_list(spec: &str) -> Result<Vec<Bucket>, String> {
        spec.split(',')
            .map(|s| {
                let s = s.trim();
                let num = |t: &str| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| format!("bad bucket `{s}`"))
                };
                if let Some(lo) = s.strip_suffix('+') {
                    Ok(Bucket::new(num(lo)?, None))
                } else if let Some((lo, hi)) = s.split_once('-') {
                    let (lo, hi) = (num(lo)?, num(hi)?);
                    if hi < lo {
                        return Err(format!("bad bucket `{s}`"));
                    }
                    Ok(Bucket::new(lo, Some(hi)))
                } else {
                    let n = num(s)?;
                    Ok(Bucket::new(n, Some(n)))
                }
            })
            .collect()
    }
}

pub const DEFAULT_BUCKETS: [(usize, Option<usize>); 4] =
    [(2, Some(4)), (5, Some(6)), (7, Some(8)), (9, None)];

pub fn default_buckets() -> Vec<Bucket> {
    DEFAULT_BUCKETS
        .iter()
        .map(|(a, b)| Bucket::new(*a, *b))
        .collect()
}

pub struct EvalItem {
    pub id: String,
    /// The prediction, or why none could be produced (unparsable output...).
    pub pred: Result<AssemblyGraph, String>,
    pub gt: AssemblyGraph,
    pub classes: EquivalenceClasses,
    pub part_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemScores {
    pub exact: bool,
    /// `None` when the relabeling cap was exceeded.
    pub simple: Option<MatchScores>,
    pub hard: Option<MatchScores>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemResult {
    pub part_count: usize,
    pub bucket: Option<String>,
    /// `None` when the ground truth itself is unusable.
    pub scores: Option<ItemScores>,
    pub undecided: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MeanScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketSummary {
    pub label: String,
    pub items: usize,
    pub exact: usize,
    /// Percentage of exact matches, `None` for an empty bucket.
    pub success_rate: Option<f64>,
    pub simple: MeanScores,
    pub hard: MeanScores,
    pub undecided: usize,
}

impl BucketSummary {
    /// The cell shown in the table for `mode`, in percent.
    pub fn value(&self, mode: ReportMode) -> Option<f64> {
        match mode {
            ReportMode::Exact => self.success_rate,
            ReportMode::Simple => (self.simple.count > 0).then_some(100.0 * self.simple.f1),
            ReportMode::Hard => (self.hard.count > 0).then_some(100.0 * self.hard.f1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub mode: ReportMode,
    pub permutation_cap: u128,
    pub items: BTreeMap<String, ItemResult>,
    pub buckets: Vec<BucketSummary>,
    /// Item-weighted over every scored item.
    pub overall: BucketSummary,
    /// Items whose node matching exceeded the relabeling cap.
    pub undecided: Vec<String>,
    pub errors: BTreeMap<String, String>,
}

fn score_item(item: &EvalItem, cap: u128) -> (Option<ItemScores>, bool, Option<String>) {
    let pred = match &item.pred {
        Ok(p) => p,
        Err(msg) => return (Some(failed(&item.gt, None)), false, Some(msg.clone())),
    };
    let exact = match exact_match(pred, &item.gt, &item.classes) {
        Ok(e) => e,
        Err(e @ EvalError::InvalidGroundTruth(_)) => return (None, false, Some(e.to_string())),
        Err(e) => {
            return (
                Some(failed(&item.gt, Some(pred))),
                false,
                Some(e.to_string()),
            )
        }
    };
    let mut undecided = false;
    let mut run = |mode| match node_match_scores(pred, &item.gt, &item.classes, mode, cap) {
        Ok(s) => Some(s),
        Err(_) => {
            undecided = true;
            None
        }
    };
    let simple = run(MatchMode::Simple);
    let hard = run(MatchMode::Hard);
    (
        Some(ItemScores {
            exact,
            simple,
            hard,
        }),
        undecided,
        None,
    )
}

fn failed(gt: &AssemblyGraph, pred: Option<&AssemblyGraph>) -> ItemScores {
    let gt_nodes = gt.non_leaf_nodes().count();
    let pred_nodes = pred.map_or(0, |p| p.non_leaf_nodes().count());
    ItemScores {
        exact: false,
        simple: Some(MatchScores::zero(pred_nodes, gt_nodes)),
        hard: Some(MatchScores::zero(pred_nodes, gt_nodes)),
    }
}

fn summarize<'a>(label: &str, results: impl Iterator<Item = &'a ItemResult>) -> BucketSummary {
    let mut s = BucketSummary {
        label: label.to_string(),
        items: 0,
        exact: 0,
        success_rate: None,
        simple: MeanScores::default(),
        hard: MeanScores::default(),
        undecided: 0,
    };
    let add = |m: &mut MeanScores, x: &MatchScores| {
        m.precision += x.precision;
        m.recall += x.recall;
        m.f1 += x.f1;
        m.count += 1;
    };
    for r in results {
        let Some(sc) = &r.scores else { continue };
        s.items += 1;
        s.exact += sc.exact as usize;
        s.undecided += r.undecided as usize;
        if let Some(x) = &sc.simple {
            add(&mut s.simple, x);
        }
        if let Some(x) = &sc.hard {
            add(&mut s.hard, x);
        }
    }
    for m in [&mut s.simple, &mut s.hard] {
        if m.count > 0 {
            let n = m.count as f64;
            m.precision /= n;
            m.recall /= n;
            m.f1 /= n;
        }
    }
    if s.items > 0 {
        s.success_rate = Some(100.0 * s.exact as f64 / s.items as f64);
    }
    s
}

/// Scores every item (in parallel) and tallies the buckets. Items are keyed
/// by id, so the report does not depend on evaluation order.
pub fn batch_evaluate(
    items: &[EvalItem],
    buckets: Option<&[Bucket]>,
    mode: ReportMode,
    cap: u128,
) -> EvaluationReport {
    let defaults = default_buckets();
    let buckets = buckets.unwrap_or(&defaults);
    let results: BTreeMap<String, ItemResult> = items
        .par_iter()
        .map(|item| {
            let (scores, undecided, error) = score_item(item, cap);
            let bucket = buckets
                .iter()
                .find(|b| b.contains(item.part_count))
                .map(|b| b.label.clone());
            (
                item.id.clone(),
                ItemResult {
                    part_count: item.part_count,
                    bucket,
                    scores,
                    undecided,
                    error,
                },
            )
        })
        .collect();
    let summaries = buckets
        .iter()
        .map(|b| {
            summarize(
                &b.label,
                results
                    .values()
                    .filter(|r| r.bucket.as_deref() == Some(&b.label)),
            )
        })
        .collect();
    let overall = summarize("Average", results.values());
    let undecided = results
        .iter()
        .filter(|(_, r)| r.undecided)
        .map(|(k, _)| k.clone())
        .collect();
    let errors = results
        .iter()
        .filter_map(|(k, r)| r.error.clone().map(|e| (k.clone(), e)))
        .collect();
    EvaluationReport {
        mode,
        permutation_cap: cap,
        items: results,
        buckets: summaries,
        overall,
        undecided,
        errors,
    }
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.1}"))
}

impl EvaluationReport {
    /// Aligned text table: one row of scores, one row of item counts.
    pub fn table(&self, method: &str) -> String {
        let mut header = vec!["Method".to_string()];
        let mut row = vec![method.to_string()];
        let mut count = vec!["Count".to_string()];
        for b in &self.buckets {
            header.push(b.label.clone());
            row.push(cell(b.value(self.mode)));
            count.push(b.items.to_string());
        }
        header.push("Average".into());
        row.push(cell(self.overall.value(self.mode)));
        count.push(self.overall.items.to_string());

        let widths: Vec<usize> = (0..header.len())
            .map(|i| {
                [&header, &row, &count]
                    .iter()
                    .map(|r| r[i].len())
                    .max()
                    .unwrap_or(0)
            })
            .collect();
        let mut out = String::new();
        for r in [&header, &row, &count] {
            let line: Vec<String> = r
                .iter()
                .zip(&widths)
                .enumerate()
                .map(|(i, (c, w))| {
                    if i == 0 {
                        format!("{c:<w$}")
                    } else {
                        format!("{c:>w$}")
                    }
                })
                .collect();
            let _ = writeln!(out, "{}", line.join("  ").trim_end());
        }
        if !self.undecided.is_empty() {
            let _ = writeln!(
                out,
                "undecided (relabeling cap {}): {}",
                self.permutation_cap,
                self.undecided.join(", ")
            );
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::parse_nested_list;

    fn item(id: &str, pred: &str, gt: &str) -> EvalItem {
        let gt = parse_nested_list(gt, &[]).unwrap();
        EvalItem {
            id: id.into(),
            pred: Ok(parse_nested_list(pred, &[]).unwrap()),
            part_count: gt.parts().len(),
            gt,
            classes: EquivalenceClasses::none(),
        }
    }

    #[test]
    fn eleven_of_fourteen_prints_78_6() {
        let mut items = Vec::new();
        for i in 0..14 {
            let pred = if i < 11 { "[[1,2],3]" } else { "[1,2,3]" };
            items.push(item(&format!("item{i:02}"), pred, "[[1,2],3]"));
        }
        let r = batch_evaluate(&items, None, ReportMode::Exact, 10);
        assert_eq!(r.buckets[0].items, 14);
        assert_eq!(r.buckets[0].exact, 11);
        let table = r.table("Ours");
        assert!(table.contains("78.6"), "{table}");
        assert_eq!(r.buckets[1].success_rate, None);
    }

    #[test]
    fn bucket_parsing() {
        let b = Bucket::parse_list("2-4, 5-6,7-8,9+").unwrap();
        assert_eq!(b, default_buckets());
        assert_eq!(b[3].label, "9+");
        assert!(Bucket::parse_list("4-2").is_err());
        assert_eq!(Bucket::per_count(2, 3)[1].label, "3");
    }

    #[test]
    fn prediction_errors_count_as_failures() {
        let gt = parse_nested_list("[[1,2],3]", &[]).unwrap();
        let items = vec![
            EvalItem {
                id: "a".into(),
                pred: Err("unparsable".into()),
                gt: gt.clone(),
                classes: EquivalenceClasses::none(),
                part_count: 3,
            },
            item("b", "[1,2,4]", "[[1,2],3]"),
            item("c", "[[1,2],3]", "[[1,2],3]"),
        ];
        let r = batch_evaluate(&items, None, ReportMode::Exact, 10);
        assert_eq!(r.overall.items, 3);
        assert_eq!(r.overall.exact, 1);
        assert_eq!(r.errors.len(), 2);
    }
}

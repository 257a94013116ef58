mod support;

use std::collections::BTreeSet;

use assembly_core::eval::{
    batch_evaluate, best_of_k, exact_match, node_match_scores, Bucket, EvalError, EvalItem,
    MatchMode, ReportMode, DEFAULT_PERMUTATION_CAP,
};
use assembly_core::graph::{
    parse_nested_list, singlestep_baseline, AssemblyGraph, EquivalenceClasses, PartId, Tree,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::*;

const CAP: u128 = DEFAULT_PERMUTATION_CAP;

struct Case {
    gt: Tree,
    pred: Tree,
    classes: Vec<BTreeSet<PartId>>,
}

fn case(seed: u64) -> Case {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.gen_range(2..=7u32);
    let parts = ids(&(1..=n).collect::<Vec<_>>());
    let gt = random_tree(&mut rng, &parts);
    let classes = random_classes(&mut rng, &parts, 2, 3);
    let pred = random_prediction(&mut rng, &gt, &classes);
    Case { gt, pred, classes }
}

fn g(s: &str) -> AssemblyGraph {
    parse_nested_list(s, &[]).unwrap()
}

fn eq(pairs: &[(u32, u32)]) -> EquivalenceClasses {
    EquivalenceClasses::from_pairs(pairs.iter().map(|&(a, b)| (PartId(a), PartId(b))))
}

fn shuffle_children<R: Rng>(rng: &mut R, t: &Tree) -> Tree {
    match t {
        Tree::Leaf(_) => t.clone(),
        Tree::Node(ch) => {
            let mut v: Vec<Tree> = ch.iter().map(|c| shuffle_children(rng, c)).collect();
            v.shuffle(rng);
            Tree::Node(v)
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn agrees_with_brute_force(seed in any::<u64>()) {
        let c = case(seed);
        let (p, gt, cls) = (graph(&c.pred, &c.classes), graph(&c.gt, &c.classes), classes_of(&c.classes));
        let exact = exact_match(&p, &gt, &cls).unwrap();
        prop_assert_eq!(exact, brute_exact(&c.pred, &c.gt, &c.classes));
        for (mode, hard) in [(MatchMode::Simple, false), (MatchMode::Hard, true)] {
            let s = node_match_scores(&p, &gt, &cls, mode, CAP).unwrap();
            let (m, np, ng) = brute_matches(&c.pred, &c.gt, &c.classes, hard);
            prop_assert_eq!((s.matched, s.pred_nodes, s.gt_nodes), (m, np, ng));
            prop_assert!((s.precision - m as f64 / np as f64).abs() < 1e-12);
            prop_assert!((s.recall - m as f64 / ng as f64).abs() < 1e-12);
            prop_assert_eq!(s.exact, exact);
        }
    }

    #[test]
    fn scores_are_symmetric(seed in any::<u64>()) {
        let c = case(seed);
        let (p, gt, cls) = (graph(&c.pred, &c.classes), graph(&c.gt, &c.classes), classes_of(&c.classes));
        prop_assert_eq!(exact_match(&p, &gt, &cls).unwrap(), exact_match(&gt, &p, &cls).unwrap());
        for mode in [MatchMode::Simple, MatchMode::Hard] {
            let a = node_match_scores(&p, &gt, &cls, mode, CAP).unwrap();
            let b = node_match_scores(&gt, &p, &cls, mode, CAP).unwrap();
            prop_assert_eq!(a.matched, b.matched);
            prop_assert_eq!(a.precision, b.recall);
            prop_assert_eq!(a.recall, b.precision);
            prop_assert_eq!(a.f1, b.f1);
        }
    }

    #[test]
    fn relabeling_and_child_order_do_not_matter(seed in any::<u64>()) {
        let c = case(seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let maps = relabelings(&c.classes);
        let m = &maps[rng.gen_range(0..maps.len())];
        let moved = shuffle_children(&mut rng, &relabel(&c.pred, m));
        let cls = classes_of(&c.classes);
        let gt = graph(&c.gt, &c.classes);
        let (p0, p1) = (graph(&c.pred, &c.classes), graph(&moved, &c.classes));
        prop_assert_eq!(exact_match(&p0, &gt, &cls).unwrap(), exact_match(&p1, &gt, &cls).unwrap());
        for mode in [MatchMode::Simple, MatchMode::Hard] {
            let a = node_match_scores(&p0, &gt, &cls, mode, CAP).unwrap();
            let b = node_match_scores(&p1, &gt, &cls, mode, CAP).unwrap();
            prop_assert_eq!((a.matched, a.f1), (b.matched, b.f1));
        }
    }

    #[test]
    fn criteria_are_nested(seed in any::<u64>()) {
        let c = case(seed);
        let (p, gt, cls) = (graph(&c.pred, &c.classes), graph(&c.gt, &c.classes), classes_of(&c.classes));
        let exact = exact_match(&p, &gt, &cls).unwrap();
        let simple = node_match_scores(&p, &gt, &cls, MatchMode::Simple, CAP).unwrap();
        let hard = node_match_scores(&p, &gt, &cls, MatchMode::Hard, CAP).unwrap();
        prop_assert!(hard.matched <= simple.matched);
        if exact {
            prop_assert_eq!(hard.f1, 1.0);
        }
        if hard.f1 == 1.0 {
            prop_assert_eq!(simple.f1, 1.0);
        }
        for s in [simple, hard] {
            prop_assert!((0.0..=1.0).contains(&s.precision) && (0.0..=1.0).contains(&s.recall));
        }
    }
}

#[test]
fn nested_versus_flat_pair() {
    let (p, gt) = (g("[1,[2,3]]"), g("[[1,2],3]"));
    let cls = EquivalenceClasses::none();
    assert!(!exact_match(&p, &gt, &cls).unwrap());
    let s = node_match_scores(&p, &gt, &cls, MatchMode::Simple, CAP).unwrap();
    assert_eq!((s.precision, s.recall, s.f1), (0.5, 0.5, 0.5));
    let h = node_match_scores(&p, &gt, &cls, MatchMode::Hard, CAP).unwrap();
    assert_eq!((h.precision, h.recall), (0.0, 0.0));
}

#[test]
fn equivalent_parts_swap_into_an_exact_match() {
    let (p, gt) = (g("[[2,3],1]"), g("[[1,3],2]"));
    assert!(!exact_match(&p, &gt, &EquivalenceClasses::none()).unwrap());
    let cls = eq(&[(1, 2)]);
    assert!(exact_match(&p, &gt, &cls).unwrap());
    let s = node_match_scores(&p, &gt, &cls, MatchMode::Hard, CAP).unwrap();
    assert!(s.exact);
    assert_eq!(s.f1, 1.0);
}

#[test]
fn single_step_baseline_has_full_simple_precision() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let n = rng.gen_range(2..=9u32);
        let parts = ids(&(0..n).collect::<Vec<_>>());
        let gt_tree = random_tree(&mut rng, &parts);
        let gt = graph(&gt_tree, &[]);
        let base = singlestep_baseline(&parts.iter().copied().collect()).unwrap();
        let s = node_match_scores(
            &base,
            &gt,
            &EquivalenceClasses::none(),
            MatchMode::Simple,
            CAP,
        )
        .unwrap();
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.pred_nodes, 1);
        assert!((s.recall - 1.0 / s.gt_nodes as f64).abs() < 1e-12);
    }
}

#[test]
fn mismatched_part_sets_are_errors() {
    let r = node_match_scores(
        &g("[1,2]"),
        &g("[1,3]"),
        &EquivalenceClasses::none(),
        MatchMode::Simple,
        CAP,
    );
    assert!(matches!(r, Err(EvalError::PartSetMismatch { .. })));
    let r = exact_match(&g("[[1],2]"), &g("[1,2]"), &EquivalenceClasses::none());
    assert!(matches!(r, Err(EvalError::InvalidPrediction(_))));
}

#[test]
fn cap_limits_relabeling_search() {
    let gt = g("[[1,2],[3,4],[5,6]]");
    let p = g("[[1,2,3],[4,5,6]]");
    let cls = eq(&[(1, 2), (2, 3), (3, 4), (4, 5)]);
    let r = node_match_scores(&p, &gt, &cls, MatchMode::Simple, 10);
    assert!(matches!(
        r,
        Err(EvalError::CapExceeded {
            required: 120,
            cap: 10
        })
    ));
    let s = node_match_scores(&p, &gt, &cls, MatchMode::Simple, CAP).unwrap();
    assert_eq!(s.matched, 1);
    // an isomorphic prediction needs no search at all
    let s = node_match_scores(&g("[[1,3],[2,5],[4,6]]"), &gt, &cls, MatchMode::Simple, 10).unwrap();
    assert!(s.exact);
}

#[test]
fn best_of_k_skips_broken_candidates() {
    let gt = g("[[1,2],3]");
    let cls = EquivalenceClasses::none();
    let preds = vec![g("[1,4]"), g("[1,[2,3]]"), g("[[1,2],3]"), g("[[1,2],3]")];
    let (i, s) = best_of_k(&preds, &gt, &cls, MatchMode::Hard, CAP)
        .unwrap()
        .unwrap();
    assert_eq!(i, 2);
    assert!(s.exact);
    assert!(best_of_k(&preds[..1], &gt, &cls, MatchMode::Hard, CAP)
        .unwrap()
        .is_none());
}

#[test]
fn batch_report_matches_a_recount() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut items = Vec::new();
    let mut expected_exact = 0;
    for i in 0..60 {
        let c = case(rng.gen());
        let is_exact = brute_exact(&c.pred, &c.gt, &c.classes);
        let pred = if i % 10 == 9 {
            Err("no prediction".to_string())
        } else {
            expected_exact += is_exact as usize;
            Ok(graph(&c.pred, &c.classes))
        };
        items.push(EvalItem {
            id: format!("item{i:02}"),
            pred,
            part_count: c.gt.leaves().len(),
            gt: graph(&c.gt, &c.classes),
            classes: classes_of(&c.classes),
        });
    }
    let buckets = Bucket::per_count(2, 7);
    let report = batch_evaluate(&items, Some(&buckets), ReportMode::Exact, CAP);
    assert_eq!(report.overall.items, 60);
    assert_eq!(report.overall.exact, expected_exact);
    assert_eq!(report.errors.len(), 6);
    assert_eq!(report.buckets.iter().map(|b| b.items).sum::<usize>(), 60);
    assert_eq!(
        report.buckets.iter().map(|b| b.exact).sum::<usize>(),
        expected_exact
    );
    // order of the input does not matter
    items.reverse();
    let again = batch_evaluate(&items, Some(&buckets), ReportMode::Exact, CAP);
    assert_eq!(again.table("x"), report.table("x"));
}

mod support;

use std::collections::{BTreeMap, BTreeSet};

use assembly_core::graph::{
    count_feasible_orders, feasible_orders, is_feasible_order, parse_nested_list, parse_tree,
    sample_subassembly, to_nested_list, validate, AssemblyGraph, Connectivity, EquivalenceClasses,
    NodeId, PartId, Tree,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use support::{ids, random_classes, random_tree};

/// Counts orders of non-leaf nodes with every parent after its children by
/// trying all permutations.
fn brute_order_count(g: &AssemblyGraph) -> u128 {
    let inner: Vec<NodeId> = g.non_leaf_nodes().map(|n| n.id).collect();
    let parents = g.parents();
    let mut idx: Vec<usize> = (0..inner.len()).collect();
    let mut count = 0;
    permute(&mut idx, 0, &mut |perm| {
        let pos: BTreeMap<NodeId, usize> = perm
            .iter()
            .enumerate()
            .map(|(i, &k)| (inner[k], i))
            .collect();
        let ok = inner
            .iter()
            .all(|n| parents.get(n).is_none_or(|p| pos[n] < pos[p]));
        if ok {
            count += 1;
        }
    });
    count
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut impl FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn text(t: &Tree) -> String {
    match t {
        Tree::Leaf(p) => p.0.to_string(),
        Tree::Node(ch) => format!("[{}]", ch.iter().map(text).collect::<Vec<_>>().join(", ")),
    }
}

fn tree_strategy(max_leaves: u32) -> impl Strategy<Value = Tree> {
    (2..=max_leaves, any::<u64>()).prop_map(|(n, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut parts: Vec<u32> = (0..n).map(|i| i * 3 + rng.gen_range(0..3)).collect();
        parts.sort();
        parts.dedup();
        random_tree(&mut rng, &ids(&parts))
    })
}

proptest! {
    #[test]
    fn nested_list_round_trip(t in tree_strategy(10)) {
        let g = AssemblyGraph::from_tree(&t, []);
        prop_assert!(validate(&g).is_empty());
        let canon = to_nested_list(&g).unwrap();
        prop_assert!(!canon.contains(' '));
        let back = parse_nested_list(&canon, &[]).unwrap();
        prop_assert_eq!(to_nested_list(&back).unwrap(), canon.clone());
        // any child order and whitespace parse to the same canonical text
        let loose = parse_nested_list(&text(&t), &[]).unwrap();
        prop_assert_eq!(to_nested_list(&loose).unwrap(), canon);
        prop_assert_eq!(back.to_tree().unwrap(), t.canonical());
    }

    #[test]
    fn order_count_matches_brute_force(t in tree_strategy(8)) {
        let g = AssemblyGraph::from_tree(&t, []);
        let expected = brute_order_count(&g);
        prop_assert_eq!(count_feasible_orders(&g).unwrap(), expected);
        let all = feasible_orders(&g, usize::MAX).unwrap();
        prop_assert_eq!(all.total, expected);
        prop_assert_eq!(all.orders.len() as u128, expected);
        let distinct: BTreeSet<_> = all.orders.iter().cloned().collect();
        prop_assert_eq!(distinct.len(), all.orders.len());
        for o in &all.orders {
            prop_assert!(is_feasible_order(&g, o).unwrap());
        }
    }

    #[test]
    fn classes_partition_parts(seed in any::<u64>(), n in 2u32..12) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let parts = ids(&(0..n).collect::<Vec<_>>());
        let pairs: Vec<(PartId, PartId)> = (0..rng.gen_range(0..6))
            .map(|_| (parts[rng.gen_range(0..parts.len())], parts[rng.gen_range(0..parts.len())]))
            .collect();
        let eq = EquivalenceClasses::from_pairs(pairs.iter().copied());
        let mut seen = BTreeSet::new();
        for c in eq.classes() {
            prop_assert!(c.len() >= 2);
            for p in c {
                prop_assert!(seen.insert(*p));
            }
        }
        for &(a, b) in &pairs {
            prop_assert!(eq.same_class(a, b));
        }
        // closure is idempotent
        prop_assert_eq!(EquivalenceClasses::from_pairs(eq.pairs()), eq);
    }
}

#[test]
fn known_order_counts() {
    let cases = [
        ("[[0,1],[2,3],[4,5]]", 6),
        ("[[[1,5],2],3,4]", 1),
        ("[[0,1],[2,3]]", 2),
        ("[0,1,2]", 1),
    ];
    for (s, n) in cases {
        let g = parse_nested_list(s, &[]).unwrap();
        assert_eq!(count_feasible_orders(&g).unwrap(), n, "{s}");
    }
}

#[test]
fn order_listing_respects_limit() {
    let g = parse_nested_list("[[0,1],[2,3],[4,5]]", &[]).unwrap();
    let e = feasible_orders(&g, 2).unwrap();
    assert_eq!(e.total, 6);
    assert_eq!(e.orders.len(), 2);
    assert!(e.orders[0] < e.orders[1]);
}

#[test]
fn invalid_graphs_are_rejected_by_order_enumeration() {
    let g = parse_nested_list("[[0,1],[2]]", &[]).unwrap();
    assert!(!validate(&g).is_empty());
    assert!(count_feasible_orders(&g).is_err());
    assert!(feasible_orders(&g, 10).is_err());
}

#[test]
fn malformed_text_is_rejected() {
    for s in [
        "",
        "[",
        "[1,2",
        "[]",
        "[1,,2]",
        "[1,2]]",
        "[1,[1,2]]",
        "1,2",
        "[a,b]",
    ] {
        assert!(parse_tree(s).is_err(), "{s:?}");
    }
    assert!(parse_tree(" [ [ 1 , 2 ] , 3 ] ").is_ok());
}

fn random_connectivity(rng: &mut ChaCha8Rng, n: u32) -> Connectivity {
    // spanning tree plus a few extra edges keeps every graph connected
    let mut edges: Vec<(PartId, PartId)> = (1..n)
        .map(|i| (PartId(rng.gen_range(0..i)), PartId(i)))
        .collect();
    for _ in 0..rng.gen_range(0..n) {
        edges.push((PartId(rng.gen_range(0..n)), PartId(rng.gen_range(0..n))));
    }
    Connectivity::from_edges((0..n).map(PartId), edges)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sampler_output_is_valid_and_reproducible(seed in any::<u64>(), n_parts in 2u32..14, a in 0usize..100, b in 0usize..100) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let conn = random_connectivity(&mut rng, n_parts);
        let m = 1 + a % n_parts as usize;
        let n = 1 + b % m;
        let s = sample_subassembly(&conn, m, n, seed).unwrap();
        prop_assert!(s.is_valid());
        prop_assert_eq!(s.selected.len(), m);
        prop_assert_eq!(s.groups.len(), n);
        prop_assert_eq!(s.sizes().iter().sum::<usize>(), m);
        for g in &s.groups {
            prop_assert!(conn.is_connected(g));
        }
        prop_assert_eq!(sample_subassembly(&conn, m, n, seed).unwrap(), s);
    }
}

#[test]
fn sampler_rejects_bad_parameters() {
    let conn = Connectivity::from_edges((0..3).map(PartId), [(PartId(0), PartId(1))]);
    assert!(sample_subassembly(&conn, 0, 1, 0).is_err());
    assert!(sample_subassembly(&conn, 2, 3, 0).is_err());
    assert!(sample_subassembly(&conn, 4, 1, 0).is_err());
    // only two parts are connected
    assert!(sample_subassembly(&conn, 3, 1, 0).is_err());
}

#[test]
fn random_classes_are_disjoint() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let parts = ids(&[0, 1, 2, 3, 4, 5, 6]);
    for _ in 0..200 {
        let cs = random_classes(&mut rng, &parts, 2, 3);
        let total: usize = cs.iter().map(|c| c.len()).sum();
        let union: BTreeSet<PartId> = cs.iter().flatten().copied().collect();
        assert_eq!(total, union.len());
    }
}

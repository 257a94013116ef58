//! Brute-force reference implementations shared by integration tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use assembly_core::graph::{AssemblyGraph, EquivalenceClasses, PartId, Tree};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn ids(v: &[u32]) -> Vec<PartId> {
    v.iter().map(|&p| PartId(p)).collect()
}

/// Random hierarchical tree over `leaves`: every internal node has at least
/// two children.
pub fn random_tree<R: Rng>(rng: &mut R, leaves: &[PartId]) -> Tree {
    let mut items: Vec<Tree> = leaves.iter().map(|&p| Tree::Leaf(p)).collect();
    items.shuffle(rng);
    if items.len() == 1 {
        return items.pop().unwrap();
    }
    // Repeatedly merge a random group of two or more items, leaving the root
    // to absorb whatever remains.
    while items.len() > 1 {
        if rng.gen_bool(0.3) || items.len() == 2 {
            return Tree::Node(items);
        }
        let k = rng.gen_range(2..items.len());
        items.shuffle(rng);
        let group: Vec<Tree> = items.drain(..k).collect();
        items.push(Tree::Node(group));
    }
    items.pop().unwrap()
}

/// Up to `max_classes` disjoint classes of size 2..=`max_size`.
pub fn random_classes<R: Rng>(
    rng: &mut R,
    parts: &[PartId],
    max_classes: usize,
    max_size: usize,
) -> Vec<BTreeSet<PartId>> {
    let mut pool = parts.to_vec();
    pool.shuffle(rng);
    let mut out = Vec::new();
    for _ in 0..rng.gen_range(0..=max_classes) {
        let size = rng.gen_range(2..=max_size);
        if pool.len() < size {
            break;
        }
        out.push(pool.drain(..size).collect());
    }
    out
}

pub fn pairs_of(classes: &[BTreeSet<PartId>]) -> Vec<(PartId, PartId)> {
    let mut out = Vec::new();
    for c in classes {
        let v: Vec<PartId> = c.iter().copied().collect();
        for i in 0..v.len() {
            for j in i + 1..v.len() {
                out.push((v[i], v[j]));
            }
        }
    }
    out
}

fn permutations(v: &[PartId]) -> Vec<Vec<PartId>> {
    if v.len() <= 1 {
        return vec![v.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..v.len() {
        let mut rest = v.to_vec();
        let x = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, x);
            out.push(p);
        }
    }
    out
}

/// Every leaf relabeling that permutes parts within their class.
pub fn relabelings(classes: &[BTreeSet<PartId>]) -> Vec<BTreeMap<PartId, PartId>> {
    let mut maps = vec![BTreeMap::new()];
    for c in classes {
        let src: Vec<PartId> = c.iter().copied().collect();
        let mut next = Vec::new();
        for m in &maps {
            for perm in permutations(&src) {
                let mut m2: BTreeMap<PartId, PartId> = m.clone();
                for (a, b) in src.iter().zip(&perm) {
                    m2.insert(*a, *b);
                }
                next.push(m2);
            }
        }
        maps = next;
    }
    maps
}

pub fn relabel(t: &Tree, m: &BTreeMap<PartId, PartId>) -> Tree {
    t.map_leaves(&|p| *m.get(&p).unwrap_or(&p))
}

fn leaf_set(t: &Tree) -> BTreeSet<PartId> {
    t.leaves().into_iter().collect()
}

/// Non-leaf nodes as (part set, sorted list of children part sets).
pub fn nodes(t: &Tree) -> Vec<(BTreeSet<PartId>, Vec<BTreeSet<PartId>>)> {
    let mut out = Vec::new();
    fn go(t: &Tree, out: &mut Vec<(BTreeSet<PartId>, Vec<BTreeSet<PartId>>)>) {
        if let Tree::Node(ch) = t {
            let mut kids: Vec<BTreeSet<PartId>> = ch.iter().map(leaf_set).collect();
            kids.sort();
            out.push((leaf_set(t), kids));
            ch.iter().for_each(|c| go(c, out));
        }
    }
    go(t, &mut out);
    out
}

/// Order-insensitive structural identity.
pub fn same_shape(a: &Tree, b: &Tree) -> bool {
    let mut x = nodes(a);
    let mut y = nodes(b);
    x.sort();
    y.sort();
    x == y
}

pub fn brute_exact(pred: &Tree, gt: &Tree, classes: &[BTreeSet<PartId>]) -> bool {
    relabelings(classes)
        .iter()
        .any(|m| same_shape(&relabel(pred, m), gt))
}

/// Best matched node count over all relabelings, with the totals of
/// predicted and ground-truth non-leaf nodes.
pub fn brute_matches(
    pred: &Tree,
    gt: &Tree,
    classes: &[BTreeSet<PartId>],
    hard: bool,
) -> (usize, usize, usize) {
    let g = nodes(gt);
    let mut best = 0;
    let mut np = 0;
    for m in relabelings(classes) {
        let p = nodes(&relabel(pred, &m));
        np = p.len();
        let matched = p
            .iter()
            .filter(|(set, kids)| g.iter().any(|(gs, gk)| gs == set && (!hard || gk == kids)))
            .count();
        best = best.max(matched);
    }
    (best, np, g.len())
}

pub fn graph(t: &Tree, classes: &[BTreeSet<PartId>]) -> AssemblyGraph {
    AssemblyGraph::from_tree(t, pairs_of(classes))
}

pub fn classes_of(classes: &[BTreeSet<PartId>]) -> EquivalenceClasses {
    EquivalenceClasses::from_classes(classes.iter().cloned())
}

/// A prediction for `gt`: a within-class relabeling of it, a relabeling
/// with one subtree flattened, or an unrelated tree on the same parts.
pub fn random_prediction<R: Rng>(rng: &mut R, gt: &Tree, classes: &[BTreeSet<PartId>]) -> Tree {
    let maps = relabelings(classes);
    let m = &maps[rng.gen_range(0..maps.len())];
    match rng.gen_range(0..3) {
        0 => relabel(gt, m),
        1 => flatten_one(rng, &relabel(gt, m)),
        _ => random_tree(rng, &gt.leaves()),
    }
}

fn flatten_one<R: Rng>(rng: &mut R, t: &Tree) -> Tree {
    let Tree::Node(ch) = t else { return t.clone() };
    let inner: Vec<usize> = (0..ch.len())
        .filter(|&i| matches!(ch[i], Tree::Node(_)))
        .collect();
    let Some(&i) = inner.choose(rng) else {
        return t.clone();
    };
    let mut out = Vec::new();
    for (j, c) in ch.iter().enumerate() {
        match c {
            Tree::Node(g) if j == i => out.extend(g.iter().cloned()),
            other => out.push(other.clone()),
        }
    }
    Tree::Node(out)
}

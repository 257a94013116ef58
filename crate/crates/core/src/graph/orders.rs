use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{validate, AssemblyGraph, GraphError, NodeId};

/// Sequence of non-leaf nodes in which every parent follows its children.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AssemblyOrder(pub Vec<NodeId>);

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OrderEnumeration {
    pub orders: Vec<AssemblyOrder>,
    /// Number of linear extensions in total (saturates at `u128::MAX`).
    pub total: u128,
}

/// Non-leaf node → its non-leaf children.
fn non_leaf_children(graph: &AssemblyGraph) -> BTreeMap<NodeId, Vec<NodeId>> {
    graph
        .non_leaf_nodes()
        .map(|n| {
            let kids = n
                .children
                .iter()
                .copied()
                .filter(|c| graph.node(*c).is_some_and(|x| !x.is_leaf()))
                .collect();
            (n.id, kids)
        })
        .collect()
}

fn ensure_valid(graph: &AssemblyGraph) -> Result<(), GraphError> {
    let v = validate(graph);
    if v.is_empty() {
        Ok(())
    } else {
        Err(GraphError::Invalid(v))
    }
}

/// Enumerates up to `limit` feasible orders. Orders come out in
/// lexicographic order of node ids; `total` counts all of them.
pub fn feasible_orders(
    graph: &AssemblyGraph,
    limit: usize,
) -> Result<OrderEnumeration, GraphError> {
    ensure_valid(graph)?;
    let kids = non_leaf_children(graph);
    let total = count_inner(graph, &kids);
    let mut pending: BTreeMap<NodeId, usize> = kids.iter().map(|(k, v)| (*k, v.len())).collect();
    let parents = graph.parents();
    let mut ready: BTreeSet<NodeId> = pending
        .iter()
        .filter(|(_, c)| **c == 0)
        .map(|(k, _)| *k)
        .collect();
    let mut current = Vec::with_capacity(kids.len());
    let mut orders = Vec::new();

    fn rec(
        n: usize,
        limit: usize,
        ready: &mut BTreeSet<NodeId>,
        pending: &mut BTreeMap<NodeId, usize>,
        parents: &BTreeMap<NodeId, NodeId>,
        current: &mut Vec<NodeId>,
        out: &mut Vec<AssemblyOrder>,
    ) {
        if out.len() >= limit {
            return;
        }
        if current.len() == n {
            out.push(AssemblyOrder(current.clone()));
            return;
        }
        let choices: Vec<NodeId> = ready.iter().copied().collect();
        for id in choices {
            ready.remove(&id);
            current.push(id);
            let parent = parents.get(&id).copied();
            if let Some(p) = parent {
                let c = pending.get_mut(&p).expect("parent is non-leaf");
                *c -= 1;
                if *c == 0 {
                    ready.insert(p);
                }
            }
            rec(n, limit, ready, pending, parents, current, out);
            if let Some(p) = parent {
                let c = pending.get_mut(&p).expect("parent is non-leaf");
                if *c == 0 {
                    ready.remove(&p);
                }
                *c += 1;
            }
            current.pop();
            ready.insert(id);
            if out.len() >= limit {
                return;
            }
        }
    }

    if limit > 0 {
        rec(
            kids.len(),
            limit,
            &mut ready,
            &mut pending,
            &parents,
            &mut current,
            &mut orders,
        );
    }
    Ok(OrderEnumeration { orders, total })
}

/// Number of feasible orders, via the multinomial recursion over subtrees:
/// `e(v) = (s(v)-1)! / Π s(c)! · Π e(c)` with `s` the non-leaf subtree size.
pub fn count_feasible_orders(graph: &AssemblyGraph) -> Result<u128, GraphError> {
    ensure_valid(graph)?;
    Ok(count_inner(graph, &non_leaf_children(graph)))
}

fn count_inner(graph: &AssemblyGraph, kids: &BTreeMap<NodeId, Vec<NodeId>>) -> u128 {
    fn go(id: NodeId, kids: &BTreeMap<NodeId, Vec<NodeId>>) -> (usize, u128) {
        let mut size = 0usize;
        let mut ways: u128 = 1;
        for c in &kids[&id] {
            let (s, e) = go(*c, kids);
            // interleave the child's block into what we have so far
            ways = ways
                .saturating_mul(e)
                .saturating_mul(binomial((size + s) as u128, s as u128));
            size += s;
        }
        (size + 1, ways)
    }
    go(graph.root(), kids).1
}

fn binomial(n: u128, k: u128) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) is divisible by (i + 1) after the multiplication
        acc = match acc.checked_mul(n - i) {
            Some(v) => v / (i + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// True iff `order` lists every non-leaf node once, children first.
/// Unknown node ids are an error; leaves, repeats or omissions give `false`.
pub fn is_feasible_order(graph: &AssemblyGraph, order: &AssemblyOrder) -> Result<bool, GraphError> {
    for id in &order.0 {
        if graph.node(*id).is_none() {
            return Err(GraphError::UnknownNode(*id));
        }
    }
    let kids = non_leaf_children(graph);
    if order.0.len() != kids.len() {
        return Ok(false);
    }
    let mut pos: BTreeMap<NodeId, usize> = BTreeMap::new();
    for (i, id) in order.0.iter().enumerate() {
        if !kids.contains_key(id) || pos.insert(*id, i).is_some() {
            return Ok(false);
        }
    }
    Ok(kids
        .iter()
        .all(|(p, cs)| cs.iter().all(|c| pos[c] < pos[p])))
}

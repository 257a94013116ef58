use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Serialize;

use super::{AssemblyGraph, NodeId, PartId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ViolationKind {
    MissingRoot,
    UnknownChild {
        child: NodeId,
    },
    MultipleParents {
        count: usize,
    },
    Cycle,
    Unreachable,
    LeafPartCount {
        count: usize,
    },
    SingleChild,
    OverlappingChildren {
        part: PartId,
    },
    UnionMismatch {
        missing: Vec<PartId>,
        extra: Vec<PartId>,
    },
    DuplicateLeafPart {
        part: PartId,
    },
    UnknownEquivalencePart {
        part: PartId,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub node: Option<NodeId>,
    #[serde(flatten)]
    pub kind: ViolationKind,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = self.node {
            write!(f, "node {n}: ")?;
        }
        let list = |v: &[PartId]| {
            v.iter()
                .map(|p| p.to_string())
                .collect::<Vec<_>>()
                .join(",")
        };
        match &self.kind {
            ViolationKind::MissingRoot => write!(f, "root node does not exist"),
            ViolationKind::UnknownChild { child } => write!(f, "references unknown child {child}"),
            ViolationKind::MultipleParents { count } => write!(f, "has {count} parents"),
            ViolationKind::Cycle => write!(f, "lies on a cycle"),
            ViolationKind::Unreachable => write!(f, "is not reachable from the root"),
            ViolationKind::LeafPartCount { count } => {
                write!(f, "leaf holds {count} parts instead of one")
            }
            ViolationKind::SingleChild => write!(f, "non-leaf with one child"),
            ViolationKind::OverlappingChildren { part } => {
                write!(f, "children overlap on part {part}")
            }
            ViolationKind::UnionMismatch { missing, extra } => write!(
                f,
                "union mismatch: children lack [{}], children add [{}]",
                list(missing),
                list(extra)
            ),
            ViolationKind::DuplicateLeafPart { part } => {
                write!(f, "duplicate leaf part {part}")
            }
            ViolationKind::UnknownEquivalencePart { part } => {
                write!(f, "equivalence references unknown part {part}")
            }
        }
    }
}

fn at(node: NodeId, kind: ViolationKind) -> Violation {
    Violation {
        node: Some(node),
        kind,
    }
}

/// Lists every violated structural invariant. An empty result means the
/// graph is a valid hierarchical assembly graph.
pub fn validate(graph: &AssemblyGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let nodes = &graph.nodes;
    if !nodes.contains_key(&graph.root) {
        out.push(Violation {
            node: None,
            kind: ViolationKind::MissingRoot,
        });
        return out;
    }

    let mut parent_count: BTreeMap<NodeId, usize> = BTreeMap::new();
    for n in nodes.values() {
        for c in &n.children {
            if !nodes.contains_key(c) {
                out.push(at(n.id, ViolationKind::UnknownChild { child: *c }));
            } else {
                *parent_count.entry(*c).or_default() += 1;
            }
        }
    }
    for (id, count) in &parent_count {
        if *count > 1 {
            out.push(at(*id, ViolationKind::MultipleParents { count: *count }));
        }
    }
    if parent_count.contains_key(&graph.root) {
        out.push(at(graph.root, ViolationKind::Cycle));
    }

    // iterative DFS from the root; three colours to find back edges
    #[derive(Clone, Copy, PartialEq)]
    enum Mark {
        Open,
        Done,
    }
    let mut mark: BTreeMap<NodeId, Mark> = BTreeMap::new();
    let mut stack: Vec<(NodeId, usize)> = vec![(graph.root, 0)];
    mark.insert(graph.root, Mark::Open);
    let mut cyclic: BTreeSet<NodeId> = BTreeSet::new();
    while let Some((id, next)) = stack.pop() {
        let children = &nodes[&id].children;
        if next < children.len() {
            stack.push((id, next + 1));
            let c = children[next];
            if !nodes.contains_key(&c) {
                continue;
            }
            match mark.get(&c) {
                None => {
                    mark.insert(c, Mark::Open);
                    stack.push((c, 0));
                }
                Some(Mark::Open) => {
                    if c != graph.root {
                        cyclic.insert(c);
                    }
                }
                Some(Mark::Done) => {}
            }
        } else {
            mark.insert(id, Mark::Done);
        }
    }
    for c in cyclic {
        out.push(at(c, ViolationKind::Cycle));
    }
    for id in nodes.keys() {
        if !mark.contains_key(id) {
            out.push(at(*id, ViolationKind::Unreachable));
        }
    }

    let mut leaf_owner: BTreeMap<PartId, NodeId> = BTreeMap::new();
    for n in nodes.values() {
        if n.is_leaf() {
            if n.part_set.len() != 1 {
                out.push(at(
                    n.id,
                    ViolationKind::LeafPartCount {
                        count: n.part_set.len(),
                    },
                ));
            }
            for p in &n.part_set {
                if leaf_owner.insert(*p, n.id).is_some() {
                    out.push(at(n.id, ViolationKind::DuplicateLeafPart { part: *p }));
                }
            }
            continue;
        }
        if n.children.len() == 1 {
            out.push(at(n.id, ViolationKind::SingleChild));
        }
        let mut union: BTreeSet<PartId> = BTreeSet::new();
        let mut overlaps: BTreeSet<PartId> = BTreeSet::new();
        for c in &n.children {
            if let Some(child) = nodes.get(c) {
                for p in &child.part_set {
                    if !union.insert(*p) {
                        overlaps.insert(*p);
                    }
                }
            }
        }
        for p in overlaps {
            out.push(at(n.id, ViolationKind::OverlappingChildren { part: p }));
        }
        if union != n.part_set {
            out.push(at(
                n.id,
                ViolationKind::UnionMismatch {
                    missing: n.part_set.difference(&union).copied().collect(),
                    extra: union.difference(&n.part_set).copied().collect(),
                },
            ));
        }
    }

    let parts = graph.parts();
    for (a, b) in graph.equivalences() {
        for p in [a, b] {
            if !parts.contains(p) {
                out.push(Violation {
                    node: None,
                    kind: ViolationKind::UnknownEquivalencePart { part: *p },
                });
            }
        }
    }
    out
}

//! Hierarchical assembly graphs: parts as leaves, subassemblies as internal
//! nodes, child→parent assembly edges and undirected equivalence edges
//! between interchangeable parts.

mod baselines;
mod equivalence;
mod nested;
mod orders;
mod sampler;
mod validate;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use baselines::{nearest_part_order, singlestep_baseline, OrderSeed};
pub use equivalence::EquivalenceClasses;
pub use nested::{parse_nested_list, parse_tree, to_nested_list, NestedListError};
pub use orders::{
    count_feasible_orders, feasible_orders, is_feasible_order, AssemblyOrder, OrderEnumeration,
};
pub use sampler::{
    sample_subassembly, Connectivity, SampleError, SubassemblySpec, MAX_SAMPLE_ATTEMPTS,
};
pub use validate::{validate, Violation, ViolationKind};

/// Numeric part label, as marked on the pre-assembly scene.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartId(pub u32);

impl fmt::Display for PartId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u32> for PartId {
    fn from(v: u32) -> Self {
        PartId(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub usize);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphNode {
    pub id: NodeId,
    pub part_set: BTreeSet<PartId>,
    /// Empty iff the node is a leaf.
    pub children: Vec<NodeId>,
    /// Manual page describing the step that forms this node, if known.
    pub step_index: Option<usize>,
}

impl GraphNode {
    pub fn is_leaf(&self) -> bool {
        self.children.is_empty()
    }

    pub fn min_part(&self) -> Option<PartId> {
        self.part_set.iter().next().copied()
    }
}

/// Plain recursive tree, the shape of the nested-list text format.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Tree {
    Leaf(PartId),
    Node(Vec<Tree>),
}

impl Tree {
    pub fn leaves(&self) -> Vec<PartId> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<PartId>) {
        match self {
            Tree::Leaf(p) => out.push(*p),
            Tree::Node(ch) => ch.iter().for_each(|c| c.collect_leaves(out)),
        }
    }

    pub fn min_part(&self) -> Option<PartId> {
        match self {
            Tree::Leaf(p) => Some(*p),
            Tree::Node(ch) => ch.iter().filter_map(|c| c.min_part()).min(),
        }
    }

    /// Same tree with every child list sorted by minimal contained part.
    pub fn canonical(&self) -> Tree {
        match self {
            Tree::Leaf(p) => Tree::Leaf(*p),
            Tree::Node(ch) => {
                let mut ch: Vec<Tree> = ch.iter().map(Tree::canonical).collect();
                ch.sort_by_key(|c| c.min_part());
                Tree::Node(ch)
            }
        }
    }

    /// Relabels every leaf through `f`.
    pub fn map_leaves(&self, f: &impl Fn(PartId) -> PartId) -> Tree {
        match self {
            Tree::Leaf(p) => Tree::Leaf(f(*p)),
            Tree::Node(ch) => Tree::Node(ch.iter().map(|c| c.map_leaves(f)).collect()),
        }
    }
}

impl fmt::Display for Tree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tree::Leaf(p) => write!(f, "{p}"),
            Tree::Node(ch) => {
                f.write_str("[")?;
                for (i, c) in ch.iter().enumerate() {
                    if i > 0 {
                        f.write_str(",")?;
                    }
                    write!(f, "{c}")?;
                }
                f.write_str("]")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GraphError {
    #[error("graph is invalid: {}", join_violations(.0))]
    Invalid(Vec<Violation>),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("need at least {needed} parts, got {got}")]
    TooFewParts { needed: usize, got: usize },
    #[error("input is empty")]
    Empty,
    #[error("no pose or geometry for part {0}")]
    MissingPart(PartId),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// `S = (P, H, R)`: nodes over part sets, child→parent hierarchy given by
/// each node's `children`, and equivalence pairs between parts.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssemblyGraph {
    nodes: BTreeMap<NodeId, GraphNode>,
    root: NodeId,
    equivalences: BTreeSet<(PartId, PartId)>,
}

impl AssemblyGraph {
    /// Assembles a graph from raw nodes without checking any invariant; use
    /// [`validate`] afterwards.
    pub fn from_nodes(
        nodes: impl IntoIterator<Item = GraphNode>,
        root: NodeId,
        equivalences: impl IntoIterator<Item = (PartId, PartId)>,
    ) -> Self {
        AssemblyGraph {
            nodes: nodes.into_iter().map(|n| (n.id, n)).collect(),
            root,
            equivalences: equivalences.into_iter().map(normalize_pair).collect(),
        }
    }

    /// Builds a graph from a tree, numbering nodes in pre-order from 0.
    pub fn from_tree(
        tree: &Tree,
        equivalences: impl IntoIterator<Item = (PartId, PartId)>,
    ) -> Self {
        let mut nodes = BTreeMap::new();
        fn build(t: &Tree, nodes: &mut BTreeMap<NodeId, GraphNode>) -> NodeId {
            let id = NodeId(nodes.len());
            nodes.insert(
                id,
                GraphNode {
                    id,
                    part_set: BTreeSet::new(),
                    children: Vec::new(),
                    step_index: None,
                },
            );
            let (parts, children) = match t {
                Tree::Leaf(p) => (BTreeSet::from([*p]), Vec::new()),
                Tree::Node(ch) => {
                    let ids: Vec<NodeId> = ch.iter().map(|c| build(c, nodes)).collect();
                    let parts = ids
                        .iter()
                        .flat_map(|c| nodes[c].part_set.iter().copied())
                        .collect();
                    (parts, ids)
                }
            };
            let node = nodes.get_mut(&id).expect("just inserted");
            node.part_set = parts;
            node.children = children;
            id
        }
        let root = build(tree, &mut nodes);
        AssemblyGraph {
            nodes,
            root,
            equivalences: equivalences.into_iter().map(normalize_pair).collect(),
        }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn root_node(&self) -> Option<&GraphNode> {
        self.nodes.get(&self.root)
    }

    pub fn node(&self, id: NodeId) -> Option<&GraphNode> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn non_leaf_nodes(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values().filter(|n| !n.is_leaf())
    }

    pub fn leaves(&self) -> impl Iterator<Item = &GraphNode> {
        self.nodes.values().filter(|n| n.is_leaf())
    }

    /// The full part set `𝒫` (the root's part set).
    pub fn parts(&self) -> BTreeSet<PartId> {
        self.root_node()
            .map(|n| n.part_set.clone())
            .unwrap_or_default()
    }

    pub fn equivalences(&self) -> &BTreeSet<(PartId, PartId)> {
        &self.equivalences
    }

    pub fn set_equivalences(&mut self, pairs: impl IntoIterator<Item = (PartId, PartId)>) {
        self.equivalences = pairs.into_iter().map(normalize_pair).collect();
    }

    pub fn equivalence_classes(&self) -> EquivalenceClasses {
        EquivalenceClasses::from_pairs(self.equivalences.iter().copied())
    }

    pub fn set_step_index(&mut self, id: NodeId, step: Option<usize>) -> Result<(), GraphError> {
        let n = self.nodes.get_mut(&id).ok_or(GraphError::UnknownNode(id))?;
        n.step_index = step;
        Ok(())
    }

    /// Child → parent map (the edge set H).
    pub fn parents(&self) -> BTreeMap<NodeId, NodeId> {
        let mut out = BTreeMap::new();
        for n in self.nodes.values() {
            for c in &n.children {
                out.insert(*c, n.id);
            }
        }
        out
    }

    /// Non-leaf node whose part set equals `parts`, if any.
    pub fn find_by_parts(&self, parts: &BTreeSet<PartId>) -> Option<NodeId> {
        self.non_leaf_nodes()
            .find(|n| &n.part_set == parts)
            .map(|n| n.id)
    }

    /// Converts back to a plain tree (child order preserved). Returns `None`
    /// when the structure is not a tree reachable from the root.
    pub fn to_tree(&self) -> Option<Tree> {
        fn go(g: &AssemblyGraph, id: NodeId, depth: usize) -> Option<Tree> {
            if depth > g.nodes.len() {
                return None;
            }
            let n = g.nodes.get(&id)?;
            if n.is_leaf() {
                return Some(Tree::Leaf(*n.part_set.iter().next()?));
            }
            n.children
                .iter()
                .map(|c| go(g, *c, depth + 1))
                .collect::<Option<Vec<_>>>()
                .map(Tree::Node)
        }
        go(self, self.root, 0)
    }

    /// Nested-list text with children sorted by minimal part: two graphs are
    /// isomorphic iff their canonical forms are equal.
    pub fn canonical_form(&self) -> Option<String> {
        self.to_tree().map(|t| t.canonical().to_string())
    }

    /// True when the root's children are all leaves.
    pub fn is_flat(&self) -> bool {
        self.root_node().is_some_and(|r| {
            r.children
                .iter()
                .all(|c| self.nodes.get(c).is_some_and(|n| n.is_leaf()))
        })
    }
}

fn normalize_pair((a, b): (PartId, PartId)) -> (PartId, PartId) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

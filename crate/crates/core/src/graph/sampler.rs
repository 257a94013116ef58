//! Synthetic subassembly sampling: pick `m` physically connected parts and
//! split them into `n` connected groups.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::IteratorRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::PartId;

pub const MAX_SAMPLE_ATTEMPTS: usize = 10_000;

/// Undirected adjacency over parts.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Connectivity {
    adjacency: BTreeMap<PartId, BTreeSet<PartId>>,
}

impl Connectivity {
    pub fn from_edges(
        parts: impl IntoIterator<Item = PartId>,
        edges: impl IntoIterator<Item = (PartId, PartId)>,
    ) -> Self {
        let mut adjacency: BTreeMap<PartId, BTreeSet<PartId>> =
            parts.into_iter().map(|p| (p, BTreeSet::new())).collect();
        for (a, b) in edges {
            if a == b {
                adjacency.entry(a).or_default();
                continue;
            }
            adjacency.entry(a).or_default().insert(b);
            adjacency.entry(b).or_default().insert(a);
        }
        Connectivity { adjacency }
    }

    pub fn parts(&self) -> impl Iterator<Item = PartId> + '_ {
        self.adjacency.keys().copied()
    }

    pub fn len(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_empty(&self) -> bool {
        self.adjacency.is_empty()
    }

    pub fn neighbors(&self, p: PartId) -> impl Iterator<Item = PartId> + '_ {
        self.adjacency.get(&p).into_iter().flatten().copied()
    }

    pub fn edges(&self) -> Vec<(PartId, PartId)> {
        self.adjacency
            .iter()
            .flat_map(|(a, ns)| ns.iter().filter(move |b| a < *b).map(move |b| (*a, *b)))
            .collect()
    }

    /// True when `set` is non-empty and induces a connected subgraph.
    pub fn is_connected(&self, set: &BTreeSet<PartId>) -> bool {
        let Some(&start) = set.iter().next() else {
            return false;
        };
        let mut seen = BTreeSet::from([start]);
        let mut stack = vec![start];
        while let Some(p) = stack.pop() {
            for q in self.neighbors(p) {
                if set.contains(&q) && seen.insert(q) {
                    stack.push(q);
                }
            }
        }
        seen.len() == set.len()
    }

    fn largest_component(&self) -> usize {
        let mut seen = BTreeSet::new();
        let mut best = 0;
        for &s in self.adjacency.keys() {
            if !seen.insert(s) {
                continue;
            }
            let mut size = 1;
            let mut stack = vec![s];
            while let Some(p) = stack.pop() {
                for q in self.neighbors(p) {
                    if seen.insert(q) {
                        size += 1;
                        stack.push(q);
                    }
                }
            }
            best = best.max(size);
        }
        best
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubassemblySpec {
    pub selected: BTreeSet<PartId>,
    /// Disjoint connected groups ordered by smallest member.
    pub groups: Vec<BTreeSet<PartId>>,
    pub connectivity: Connectivity,
}

impl SubassemblySpec {
    /// Group sizes `α_1..α_n`.
    pub fn sizes(&self) -> Vec<usize> {
        self.groups.iter().map(|g| g.len()).collect()
    }

    pub fn is_valid(&self) -> bool {
        let mut union = BTreeSet::new();
        for g in &self.groups {
            if !self.connectivity.is_connected(g) {
                return false;
            }
            for p in g {
                if !union.insert(*p) {
                    return false;
                }
            }
        }
        union == self.selected && self.connectivity.is_connected(&self.selected)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SampleError {
    #[error("invalid parameters: {0}")]
    BadParameters(String),
    #[error("no connected subset of {m} parts split into {n} connected groups after {attempts} attempts")]
    Infeasible { m: usize, n: usize, attempts: usize },
}

fn grow_connected(conn: &Connectivity, m: usize, rng: &mut ChaCha8Rng) -> Option<BTreeSet<PartId>> {
    let start = conn.parts().choose(rng)?;
    let mut set = BTreeSet::from([start]);
    while set.len() < m {
        let frontier: BTreeSet<PartId> = set
            .iter()
            .flat_map(|p| conn.neighbors(*p))
            .filter(|q| !set.contains(q))
            .collect();
        let next = frontier.into_iter().choose(rng)?;
        set.insert(next);
    }
    Some(set)
}

/// Region growing from `n` random seeds; every group stays connected.
fn split_connected(
    conn: &Connectivity,
    selected: &BTreeSet<PartId>,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<BTreeSet<PartId>>> {
    let seeds = selected.iter().copied().choose_multiple(rng, n);
    let mut owner: BTreeMap<PartId, usize> =
        seeds.iter().enumerate().map(|(i, p)| (*p, i)).collect();
    while owner.len() < selected.len() {
        let candidates: Vec<(PartId, usize)> = selected
            .iter()
            .filter(|p| !owner.contains_key(p))
            .flat_map(|p| {
                conn.neighbors(*p)
                    .filter_map(|q| owner.get(&q).map(|g| (*p, *g)))
                    .collect::<Vec<_>>()
            })
            .collect();
        if candidates.is_empty() {
            return None;
        }
        let (p, g) = candidates[rng.gen_range(0..candidates.len())];
        owner.insert(p, g);
    }
    let mut groups = vec![BTreeSet::new(); n];
    for (p, g) in owner {
        groups[g].insert(p);
    }
    groups.sort_by_key(|g| g.iter().next().copied());
    Some(groups)
}

/// Draws a connected `m`-part subassembly split into `n` connected groups.
/// Each attempt grows a random connected set and partitions it by random
/// region growing; attempts that fail are rejected and retried, up to
/// [`MAX_SAMPLE_ATTEMPTS`]. Deterministic for a given seed.
pub fn sample_subassembly(
    conn: &Connectivity,
    m: usize,
    n: usize,
    seed: u64,
) -> Result<SubassemblySpec, SampleError> {
    if m == 0 || n == 0 || n > m {
        return Err(SampleError::BadParameters(format!(
            "need 1 <= n <= m, got m={m}, n={n}"
        )));
    }
    if m > conn.len() {
        return Err(SampleError::BadParameters(format!(
            "m={m} exceeds the {} available parts",
            conn.len()
        )));
    }
    if conn.largest_component() < m {
        return Err(SampleError::Infeasible { m, n, attempts: 0 });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..MAX_SAMPLE_ATTEMPTS {
        let Some(selected) = grow_connected(conn, m, &mut rng) else {
            continue;
        };
        let Some(groups) = split_connected(conn, &selected, n, &mut rng) else {
            continue;
        };
        let spec = SubassemblySpec {
            selected,
            groups,
            connectivity: conn.clone(),
        };
        if spec.is_valid() {
            return Ok(spec);
        }
    }
    Err(SampleError::Infeasible {
        m,
        n,
        attempts: MAX_SAMPLE_ATTEMPTS,
    })
}

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::Point3;
use rand::seq::IteratorRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{AssemblyGraph, GraphError, PartId, Tree};
use crate::geometry::{PointCloud, Pose};

/// Flat one-level tree: the root holds every part as a direct leaf.
pub fn singlestep_baseline(parts: &BTreeSet<PartId>) -> Result<AssemblyGraph, GraphError> {
    if parts.len() < 2 {
        return Err(GraphError::TooFewParts {
            needed: 2,
            got: parts.len(),
        });
    }
    let tree = Tree::Node(parts.iter().map(|p| Tree::Leaf(*p)).collect());
    Ok(AssemblyGraph::from_tree(&tree, []))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OrderSeed {
    #[default]
    Lowest,
    Part(PartId),
    /// Uniformly random start part drawn from a seeded generator.
    Random(u64),
}

/// Greedy nearest-part sequence. Each part is represented by the centroid of
/// its cloud after applying its pose; the next part is the one whose
/// centroid is closest to any already assembled centroid, lower id on ties.
pub fn nearest_part_order(
    clouds: &BTreeMap<PartId, PointCloud>,
    poses: &BTreeMap<PartId, Pose>,
    seed: OrderSeed,
) -> Result<Vec<PartId>, GraphError> {
    if clouds.is_empty() {
        return Err(GraphError::Empty);
    }
    let mut centroids: BTreeMap<PartId, Point3<f64>> = BTreeMap::new();
    for (id, cloud) in clouds {
        let pose = poses.get(id).ok_or(GraphError::MissingPart(*id))?;
        let c = cloud.centroid().ok_or(GraphError::MissingPart(*id))?;
        centroids.insert(*id, pose.transform_point(&c));
    }
    let start = match seed {
        OrderSeed::Lowest => *centroids.keys().next().expect("non-empty"),
        OrderSeed::Part(p) => {
            if !centroids.contains_key(&p) {
                return Err(GraphError::MissingPart(p));
            }
            p
        }
        OrderSeed::Random(s) => {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            *centroids.keys().choose(&mut rng).expect("non-empty")
        }
    };

    let mut order = vec![start];
    // distance from each remaining part to the assembled set
    let mut dist: BTreeMap<PartId, f64> = centroids
        .iter()
        .filter(|(id, _)| **id != start)
        .map(|(id, c)| (*id, (c - centroids[&start]).norm()))
        .collect();
    while !dist.is_empty() {
        let (&next, _) = dist
            .iter()
            .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(b.0)))
            .expect("non-empty");
        dist.remove(&next);
        order.push(next);
        let cn = centroids[&next];
        for (id, d) in dist.iter_mut() {
            *d = d.min((centroids[id] - cn).norm());
        }
    }
    Ok(order)
}

use std::collections::BTreeMap;

use nalgebra::Point3;
use serde::{Deserialize, Serialize};

use crate::geometry::{Aabb, PointCloud, PointIndex, Pose};
use crate::graph::PartId;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Obstacle {
    /// Points already in the world frame.
    Cloud(PointCloud),
    /// Solid axis-aligned box.
    Box(Aabb),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("clearance must be positive and finite, got {0}")]
    BadClearance(f64),
    #[error("pose of part {0} is not finite")]
    BadPose(PartId),
}

/// Static obstacles plus already placed components. Immutable once built;
/// placing a component yields a new world.
#[derive(Clone)]
pub struct World {
    obstacles: Vec<Obstacle>,
    placed: BTreeMap<PartId, (PointCloud, Pose)>,
    clearance: f64,
    index: std::sync::Arc<PointIndex>,
    boxes: Vec<Aabb>,
}

impl std::fmt::Debug for World {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("World")
            .field("obstacles", &self.obstacles.len())
            .field("placed", &self.placed.keys().collect::<Vec<_>>())
            .field("clearance", &self.clearance)
            .finish()
    }
}

impl World {
    pub fn new(
        obstacles: Vec<Obstacle>,
        placed: BTreeMap<PartId, (PointCloud, Pose)>,
        clearance: f64,
    ) -> Result<Self, WorldError> {
        if !(clearance > 0.0 && clearance.is_finite()) {
            return Err(WorldError::BadClearance(clearance));
        }
        for (id, (_, pose)) in &placed {
            if !pose.is_finite() {
                return Err(WorldError::BadPose(*id));
            }
        }
        let mut points = Vec::new();
        let mut boxes = Vec::new();
        for o in &obstacles {
            match o {
                Obstacle::Cloud(c) => points.extend_from_slice(&c.points),
                Obstacle::Box(b) => boxes.push(*b),
            }
        }
        for (cloud, pose) in placed.values() {
            points.extend(cloud.points.iter().map(|p| pose.transform_point(p)));
        }
        Ok(World {
            obstacles,
            placed,
            clearance,
            index: std::sync::Arc::new(PointIndex::new(points)),
            boxes,
        })
    }

    pub fn empty(clearance: f64) -> Result<Self, WorldError> {
        Self::new(Vec::new(), BTreeMap::new(), clearance)
    }

    pub fn clearance(&self) -> f64 {
        self.clearance
    }

    pub fn obstacles(&self) -> &[Obstacle] {
        &self.obstacles
    }

    pub fn placed(&self) -> &BTreeMap<PartId, (PointCloud, Pose)> {
        &self.placed
    }

    /// Copy of this world with one more placed component.
    pub fn with_placed(
        &self,
        id: PartId,
        cloud: PointCloud,
        pose: Pose,
    ) -> Result<World, WorldError> {
        let mut placed = self.placed.clone();
        placed.insert(id, (cloud, pose));
        World::new(self.obstacles.clone(), placed, self.clearance)
    }

    /// Bounding box of every obstacle and placed point, if any.
    pub fn bounds(&self) -> Option<Aabb> {
        let pts = Aabb::from_points(self.index.points());
        self.boxes
            .iter()
            .fold(pts, |acc, b| Some(acc.map_or(*b, |a| a.union(b))))
    }

    /// Distance from `p` to the nearest obstacle point or box (0 inside a box).
    pub fn distance(&self, p: &Point3<f64>) -> f64 {
        let mut d = self
            .index
            .nearest(p)
            .map_or(f64::INFINITY, |(d2, _)| d2.sqrt());
        for b in &self.boxes {
            d = d.min(b.distance(p));
        }
        d
    }

    /// Smallest obstacle distance over a set of world-frame points.
    pub fn min_distance(&self, points: &[Point3<f64>]) -> f64 {
        points
            .iter()
            .map(|p| self.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    /// True iff some point of `cloud` placed at `pose` lies closer than the
    /// clearance to an obstacle point or box.
    pub fn collides(&self, cloud: &PointCloud, pose: &Pose) -> bool {
        self.collides_points(cloud.points.iter().map(|p| pose.transform_point(p)))
    }

    pub fn collides_points(&self, points: impl IntoIterator<Item = Point3<f64>>) -> bool {
        points
            .into_iter()
            .any(|p| self.distance(&p) < self.clearance)
    }

    /// Lower bound on `min distance − clearance` for `points`, which lie
    /// within `radius` of `center`. A single query around the center is
    /// tried first; points are examined one by one only when that bound is
    /// below `needed`.
    pub fn slack(
        &self,
        points: &[Point3<f64>],
        center: &Point3<f64>,
        radius: f64,
        needed: f64,
    ) -> f64 {
        let coarse = self.distance(center) - radius - self.clearance;
        if coarse >= needed {
            return coarse;
        }
        self.min_distance(points) - self.clearance
    }
}

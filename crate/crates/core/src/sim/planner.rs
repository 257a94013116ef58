//! RRT-Connect for a free-flying rigid point cloud in SE(3).

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::World;
use crate::geometry::{geodesic_distance, random_rotation, Aabb, PointCloud, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerParams {
    /// Maximum extension per step in the blended metric.
    pub step: f64,
    /// Meters per radian in `d = ‖Δt‖ + w_rot · GD`.
    pub w_rot: f64,
    pub max_iterations: usize,
    /// Probability of sampling the other tree's root.
    pub goal_bias: f64,
    pub seed: u64,
    /// Largest point displacement between two edge checks near obstacles.
    pub resolution: f64,
    /// Sampling box for the cloud centroid; derived from the scene if absent.
    pub bounds: Option<Aabb>,
    pub shortcut_iterations: usize,
}

impl Default for PlannerParams {
    fn default() -> Self {
        PlannerParams {
            step: 0.2,
            w_rot: 0.3,
            max_iterations: 50_000,
            goal_bias: 0.05,
            seed: 0,
            resolution: 0.002,
            bounds: None,
            shortcut_iterations: 50,
        }
    }
}

impl PlannerParams {
    fn check(&self) -> Result<(), PlanError> {
        let ok = self.step > 0.0
            && self.w_rot > 0.0
            && self.max_iterations > 0
            && (0.0..=1.0).contains(&self.goal_bias)
            && self.resolution > 0.0
            && self.step.is_finite()
            && self.w_rot.is_finite()
            && self.resolution.is_finite();
        if ok {
            Ok(())
        } else {
            Err(PlanError::BadParams(format!("{self:?}")))
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PlanError {
    #[error("start configuration is in collision")]
    StartInCollision,
    #[error("goal configuration is in collision")]
    GoalInCollision,
    #[error("no path found within {iterations} iterations")]
    NoPath { iterations: usize },
    #[error("invalid planner parameters: {0}")]
    BadParams(String),
    #[error("moving cloud is empty")]
    EmptyCloud,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPath {
    /// Waypoints from start to goal, poses of the cloud's own frame.
    pub poses: Vec<Pose>,
    pub iterations: usize,
    pub tree_sizes: (usize, usize),
}

/// Blended SE(3) distance.
pub fn se3_distance(a: &Pose, b: &Pose, w_rot: f64) -> f64 {
    (a.translation - b.translation).norm() + w_rot * geodesic_distance(&a.rotation, &b.rotation)
}

/// Linear translation, spherical-linear rotation; `s` in `[0, 1]`.
pub fn interpolate(a: &Pose, b: &Pose, s: f64) -> Pose {
    let t = a.translation.lerp(&b.translation, s);
    let qb = if a.rotation.coords.dot(&b.rotation.coords) < 0.0 {
        UnitQuaternion::new_unchecked(-b.rotation.into_inner())
    } else {
        b.rotation
    };
    let r = a.rotation.try_slerp(&qb, s, 1e-12).unwrap_or(a.rotation);
    Pose::new(r, t)
}

/// A cloud re-expressed about its centroid, so rotations move points as
/// little as possible. Poses of the original frame `X` relate to centered
/// poses `Y` by `Y = X ∘ shift`.
struct Body {
    points: Vec<Point3<f64>>,
    radius: f64,
    shift: Pose,
}

impl Body {
    fn new(cloud: &PointCloud) -> Option<Body> {
        let c = cloud.centroid()?;
        let points: Vec<Point3<f64>> = cloud.points.iter().map(|p| Point3::from(p - c)).collect();
        let radius = points.iter().map(|p| p.coords.norm()).fold(0.0, f64::max);
        Some(Body {
            points,
            radius,
            shift: Pose::from_translation(c.x, c.y, c.z),
        })
    }

    fn centered(&self, x: &Pose) -> Pose {
        x.compose(&self.shift)
    }

    fn uncentered(&self, y: &Pose) -> Pose {
        y.compose(&self.shift.inverse())
    }

    fn placed(&self, y: &Pose) -> Vec<Point3<f64>> {
        self.points.iter().map(|p| y.transform_point(p)).collect()
    }

    /// Upper bound on how far any point travels between `a` and `b`.
    fn sweep(&self, a: &Pose, b: &Pose) -> f64 {
        (a.translation - b.translation).norm()
            + geodesic_distance(&a.rotation, &b.rotation) * self.radius
    }
}

/// Edge validation: configurations are sampled along the interpolation and
/// each must keep every point at least `clearance + resolution / 2` away
/// from obstacles. Consecutive samples are at most `max(slack, resolution)`
/// of point travel apart, which keeps every intermediate configuration at
/// least `clearance` away.
struct Checker<'a> {
    world: &'a World,
    body: Body,
    resolution: f64,
}

impl Checker<'_> {
    fn slack(&self, y: &Pose) -> f64 {
        let center = Point3::from(y.translation);
        let pts = self.body.placed(y);
        self.world
            .slack(&pts, &center, self.body.radius, self.resolution / 2.0)
    }

    fn config_ok(&self, y: &Pose) -> bool {
        self.slack(y) >= self.resolution / 2.0
    }

    fn motion_ok(&self, a: &Pose, b: &Pose) -> bool {
        let length = self.body.sweep(a, b);
        let mut s = 0.0;
        loop {
            let y = if s >= 1.0 { *b } else { interpolate(a, b, s) };
            let slack = self.slack(&y);
            if slack < self.resolution / 2.0 {
                return false;
            }
            if s >= 1.0 || length == 0.0 {
                return true;
            }
            s = (s + slack.max(self.resolution) / length).min(1.0);
        }
    }
}

struct Tree {
    poses: Vec<Pose>,
    parents: Vec<Option<usize>>,
}

impl Tree {
    fn new(root: Pose) -> Tree {
        Tree {
            poses: vec![root],
            parents: vec![None],
        }
    }

    fn nearest(&self, q: &Pose, w_rot: f64) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, p) in self.poses.iter().enumerate() {
            let d = se3_distance(p, q, w_rot);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    fn add(&mut self, pose: Pose, parent: usize) -> usize {
        self.poses.push(pose);
        self.parents.push(Some(parent));
        self.poses.len() - 1
    }

    fn branch(&self, mut i: usize) -> Vec<Pose> {
        let mut out = vec![self.poses[i]];
        while let Some(p) = self.parents[i] {
            out.push(self.poses[p]);
            i = p;
        }
        out
    }
}

enum Extend {
    Reached(usize),
    Advanced(usize),
    Trapped,
}

fn extend(tree: &mut Tree, q: &Pose, params: &PlannerParams, checker: &Checker) -> Extend {
    let near = tree.nearest(q, params.w_rot);
    let from = tree.poses[near];
    let d = se3_distance(&from, q, params.w_rot);
    let (target, reached) = if d <= params.step {
        (*q, true)
    } else {
        (interpolate(&from, q, params.step / d), false)
    };
    if !checker.motion_ok(&from, &target) {
        return Extend::Trapped;
    }
    let id = tree.add(target, near);
    if reached {
        Extend::Reached(id)
    } else {
        Extend::Advanced(id)
    }
}

fn connect(tree: &mut Tree, q: &Pose, params: &PlannerParams, checker: &Checker) -> Option<usize> {
    loop {
        match extend(tree, q, params, checker) {
            Extend::Reached(id) => return Some(id),
            Extend::Advanced(_) => continue,
            Extend::Trapped => return None,
        }
    }
}

fn default_bounds(world: &World, start: &Pose, goal: &Pose, radius: f64) -> Aabb {
    let s = Point3::from(start.translation);
    let g = Point3::from(goal.translation);
    let mut b = Aabb::from_points(&[s, g]).expect("two points");
    if let Some(wb) = world.bounds() {
        b = b.union(&wb);
    }
    b.expanded(radius + 0.1)
}

fn sample(rng: &mut ChaCha8Rng, bounds: &Aabb) -> Pose {
    let t = Vector3::new(
        rng.gen_range(bounds.min.x..=bounds.max.x),
        rng.gen_range(bounds.min.y..=bounds.max.y),
        rng.gen_range(bounds.min.z..=bounds.max.z),
    );
    Pose::new(random_rotation(rng), t)
}

/// Plans a collision-free motion of `cloud` (given in its own frame) from
/// `start` to `goal`. Deterministic for a fixed `params.seed`.
pub fn rrt_connect(
    world: &World,
    cloud: &PointCloud,
    start: &Pose,
    goal: &Pose,
    params: &PlannerParams,
) -> Result<PlannedPath, PlanError> {
    params.check()?;
    let body = Body::new(cloud).ok_or(PlanError::EmptyCloud)?;
    if world.collides(cloud, start) {
        return Err(PlanError::StartInCollision);
    }
    if world.collides(cloud, goal) {
        return Err(PlanError::GoalInCollision);
    }
    let ys = body.centered(start);
    let yg = body.centered(goal);
    let bounds = params
        .bounds
        .unwrap_or_else(|| default_bounds(world, &ys, &yg, body.radius));
    let checker = Checker {
        world,
        body,
        resolution: params.resolution,
    };
    if !checker.config_ok(&ys) || !checker.config_ok(&yg) {
        // clear of obstacles, but too close to leave with a verified edge
        return Err(PlanError::NoPath { iterations: 0 });
    }

    let finish = |mut ys_path: Vec<Pose>, iterations, sizes, checker: &Checker| {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed ^ 0x5eed);
        shortcut(&mut ys_path, params.shortcut_iterations, &mut rng, checker);
        PlannedPath {
            poses: ys_path.iter().map(|y| checker.body.uncentered(y)).collect(),
            iterations,
            tree_sizes: sizes,
        }
    };

    if checker.motion_ok(&ys, &yg) {
        return Ok(finish(vec![ys, yg], 0, (1, 1), &checker));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut ta = Tree::new(ys);
    let mut tb = Tree::new(yg);
    let mut a_is_start = true;
    for it in 1..=params.max_iterations {
        let q = if rng.gen::<f64>() < params.goal_bias {
            tb.poses[0]
        } else {
            sample(&mut rng, &bounds)
        };
        let new = match extend(&mut ta, &q, params, &checker) {
            Extend::Trapped => None,
            Extend::Reached(i) | Extend::Advanced(i) => Some(i),
        };
        if let Some(ia) = new {
            let qa = ta.poses[ia];
            if let Some(ib) = connect(&mut tb, &qa, params, &checker) {
                let mut from_a = ta.branch(ia);
                from_a.reverse();
                let from_b = tb.branch(ib);
                // both branches end in the shared configuration
                from_a.extend(from_b.into_iter().skip(1));
                if !a_is_start {
                    from_a.reverse();
                }
                let sizes = if a_is_start {
                    (ta.poses.len(), tb.poses.len())
                } else {
                    (tb.poses.len(), ta.poses.len())
                };
                return Ok(finish(from_a, it, sizes, &checker));
            }
        }
        std::mem::swap(&mut ta, &mut tb);
        a_is_start = !a_is_start;
    }
    Err(PlanError::NoPath {
        iterations: params.max_iterations,
    })
}

fn shortcut(path: &mut Vec<Pose>, iterations: usize, rng: &mut ChaCha8Rng, checker: &Checker) {
    for _ in 0..iterations {
        if path.len() < 3 {
            return;
        }
        let i = rng.gen_range(0..path.len() - 2);
        let j = rng.gen_range(i + 2..path.len());
        if checker.motion_ok(&path[i], &path[j]) {
            path.drain(i + 1..j);
        }
    }
}

/// Checks a motion of `cloud` between two poses with the planner's edge
/// test (clearance plus half the resolution at every sample).
pub fn motion_is_valid(
    world: &World,
    cloud: &PointCloud,
    a: &Pose,
    b: &Pose,
    resolution: f64,
) -> bool {
    let Some(body) = Body::new(cloud) else {
        return true;
    };
    let ya = body.centered(a);
    let yb = body.centered(b);
    let checker = Checker {
        world,
        body,
        resolution,
    };
    checker.motion_ok(&ya, &yb)
}

/// Largest point displacement of `cloud` moving from `a` to `b`, bounded by
/// translation plus angle times the distance from the cloud's own origin.
pub fn sweep_bound(cloud: &PointCloud, a: &Pose, b: &Pose) -> f64 {
    (a.translation - b.translation).norm()
        + geodesic_distance(&a.rotation, &b.rotation) * cloud.radius()
}

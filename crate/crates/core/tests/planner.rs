use std::collections::BTreeMap;
use std::time::Instant;

use assembly_core::geometry::{PointCloud, Pose};
use assembly_core::graph::PartId;
use assembly_core::sim::{box_surface, rrt_connect, Obstacle, PlanError, PlannerParams, World};
use nalgebra::{Point3, UnitQuaternion, Vector3};

fn aabb(min: [f64; 3], max: [f64; 3]) -> assembly_core::geometry::Aabb {
    assembly_core::geometry::Aabb::new(Point3::from(min), Point3::from(max))
}

/// Square wall in the x = 0 plane with a centred square hole of side `hole`.
fn wall_with_hole(hole: f64) -> Vec<Obstacle> {
    let h = hole / 2.0;
    let (t, e) = (0.025, 1.0);
    vec![
        Obstacle::Box(aabb([-t, -e, h], [t, e, e])),
        Obstacle::Box(aabb([-t, -e, -e], [t, e, -h])),
        Obstacle::Box(aabb([-t, -e, -h], [t, -h, h])),
        Obstacle::Box(aabb([-t, h, -h], [t, e, h])),
    ]
}

fn cube(side: f64) -> PointCloud {
    PointCloud::new(PartId(0), box_surface([side, side, side], 0.02))
}

fn box_distance(b: &assembly_core::geometry::Aabb, p: &Point3<f64>) -> f64 {
    let dx = (b.min.x - p.x).max(0.0).max(p.x - b.max.x);
    let dy = (b.min.y - p.y).max(0.0).max(p.y - b.max.y);
    let dz = (b.min.z - p.z).max(0.0).max(p.z - b.max.z);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// Brute-force clearance check of every configuration along the path,
/// sampled so that no point moves more than `step` between samples.
fn dense_ok(
    obstacles: &[Obstacle],
    clearance: f64,
    cloud: &PointCloud,
    path: &[Pose],
    step: f64,
) -> bool {
    let radius = cloud
        .points
        .iter()
        .map(|p| p.coords.norm())
        .fold(0.0, f64::max);
    let clear = |pose: &Pose| {
        cloud.points.iter().all(|p| {
            let w = pose.rotation * p + pose.translation;
            obstacles.iter().all(|o| match o {
                Obstacle::Box(b) => box_distance(b, &w) >= clearance,
                Obstacle::Cloud(c) => c.points.iter().all(|q| (q - w).norm() >= clearance),
            })
        })
    };
    for pair in path.windows(2) {
        let (a, b) = (&pair[0], &pair[1]);
        let mut qb = b.rotation;
        if a.rotation.coords.dot(&qb.coords) < 0.0 {
            qb = UnitQuaternion::new_unchecked(-qb.into_inner());
        }
        let sweep = (b.translation - a.translation).norm() + a.rotation.angle_to(&qb) * radius;
        let n = ((sweep / step).ceil() as usize).max(1);
        for i in 0..=n {
            let s = i as f64 / n as f64;
            let r = a.rotation.slerp(&qb, s);
            let t = a.translation * (1.0 - s) + b.translation * s;
            if !clear(&Pose::new(r, t)) {
                return false;
            }
        }
    }
    true
}

#[test]
fn passes_through_wall_gap() {
    let c = cube(0.1);
    let diameter = 0.1 * 3f64.sqrt();
    let obstacles = wall_with_hole(3.0 * diameter);
    let world = World::new(obstacles.clone(), BTreeMap::new(), 0.005).unwrap();
    let start = Pose::from_axis_angle(Vector3::y(), 0.7, Vector3::new(-0.5, 0.6, 0.6));
    let goal = Pose::from_axis_angle(Vector3::z(), -1.2, Vector3::new(0.5, 0.6, -0.6));
    let params = PlannerParams::default();
    let t0 = Instant::now();
    let path = rrt_connect(&world, &c, &start, &goal, &params).unwrap();
    assert!(t0.elapsed().as_secs() < 30);
    assert_eq!(path.poses.first(), Some(&start));
    assert!((path.poses.last().unwrap().translation - goal.translation).norm() < 1e-9);
    assert!(path.poses.len() >= 3, "straight line crosses the wall");
    assert!(dense_ok(
        &obstacles,
        0.005,
        &c,
        &path.poses,
        params.resolution / 10.0
    ));
}

#[test]
fn enclosed_goal_has_no_path() {
    let c = cube(0.06);
    let (i, o) = (0.15, 0.2);
    let obstacles = vec![
        Obstacle::Box(aabb([-o, -o, -o], [o, o, -i])),
        Obstacle::Box(aabb([-o, -o, i], [o, o, o])),
        Obstacle::Box(aabb([-o, -o, -i], [-i, o, i])),
        Obstacle::Box(aabb([i, -o, -i], [o, o, i])),
        Obstacle::Box(aabb([-i, -o, -i], [i, -i, i])),
        Obstacle::Box(aabb([-i, i, -i], [i, o, i])),
    ];
    let world = World::new(obstacles, BTreeMap::new(), 0.005).unwrap();
    let start = Pose::from_translation(0.6, 0.0, 0.0);
    let params = PlannerParams {
        max_iterations: 5_000,
        ..PlannerParams::default()
    };
    let r = rrt_connect(&world, &c, &start, &Pose::identity(), &params);
    assert_eq!(r, Err(PlanError::NoPath { iterations: 5_000 }));
}

#[test]
fn same_seed_same_path() {
    let c = cube(0.1);
    let obstacles = wall_with_hole(0.5);
    let world = World::new(obstacles, BTreeMap::new(), 0.005).unwrap();
    let start = Pose::from_translation(-0.4, 0.0, 0.0);
    let goal = Pose::from_translation(0.4, 0.2, 0.1);
    let p = PlannerParams {
        seed: 7,
        ..PlannerParams::default()
    };
    let a = rrt_connect(&world, &c, &start, &goal, &p).unwrap();
    let b = rrt_connect(&world, &c, &start, &goal, &p).unwrap();
    assert_eq!(a, b);
}

#[test]
fn point_obstacles_are_respected() {
    let c = cube(0.06);
    // a dense sheet of points with a hole
    let mut pts = Vec::new();
    for i in -25..=25 {
        for j in -25..=25 {
            let (y, z) = (i as f64 * 0.01, j as f64 * 0.01);
            if y.abs() > 0.1 || z.abs() > 0.1 {
                pts.push(Point3::new(0.0, y, z));
            }
        }
    }
    let obstacles = vec![Obstacle::Cloud(PointCloud::new(PartId(99), pts))];
    let world = World::new(obstacles.clone(), BTreeMap::new(), 0.01).unwrap();
    let start = Pose::from_translation(-0.3, 0.2, 0.2);
    let goal = Pose::from_translation(0.3, 0.2, -0.2);
    let params = PlannerParams::default();
    let path = rrt_connect(&world, &c, &start, &goal, &params).unwrap();
    assert!(path.poses.len() >= 3);
    assert!(dense_ok(
        &obstacles,
        0.01,
        &c,
        &path.poses,
        params.resolution / 10.0
    ));
}

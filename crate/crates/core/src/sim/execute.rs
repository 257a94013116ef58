use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::planner::{motion_is_valid, rrt_connect, PlanError, PlannerParams};
use super::{Obstacle, World, WorldError};
use crate::geometry::{geodesic_distance, PointCloud, PointIndex, Pose};
use crate::graph::{is_feasible_order, AssemblyGraph, AssemblyOrder, GraphError, NodeId, PartId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub planner: PlannerParams,
    /// Meters.
    pub too_far_translation: f64,
    /// Degrees.
    pub too_far_rotation_deg: f64,
    /// Largest gap between a placed component and the rest of its
    /// subassembly that still counts as attached.
    pub attachment: f64,
    /// Standoff of the approach pose from the mating pose.
    pub approach_offset: f64,
}

impl Default for SimParams {
    fn default() -> Self {
        SimParams {
            planner: PlannerParams::default(),
            too_far_translation: 0.05,
            too_far_rotation_deg: 15.0,
            attachment: 0.01,
            approach_offset: 0.05,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepStatus {
    Success,
    PoseTooFar,
    NoPath,
    FloatingPart,
}

impl std::fmt::Display for StepStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StepStatus::Success => "success",
            StepStatus::PoseTooFar => "pose_too_far",
            StepStatus::NoPath => "no_path",
            StepStatus::FloatingPart => "floating_part",
        })
    }
}

/// Motion of one rigid component. Poses map the component's assembled
/// frame (the frame target poses are given in) to the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentPath {
    pub parts: BTreeSet<PartId>,
    pub poses: Vec<Pose>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub step: usize,
    pub node: NodeId,
    pub status: StepStatus,
    /// Components moved (or meant to be moved) in this step.
    pub moved: Vec<BTreeSet<PartId>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub paths: Option<Vec<ComponentPath>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecuteError {
    #[error("order is not feasible for the graph")]
    InfeasibleOrder,
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("part {part} has no {what}")]
    MissingPart { part: PartId, what: &'static str },
    #[error(transparent)]
    World(#[from] WorldError),
}

pub struct AssemblyTask<'a> {
    pub graph: &'a AssemblyGraph,
    pub order: &'a AssemblyOrder,
    /// World-frame poses each part should end up at.
    pub targets: &'a BTreeMap<PartId, Pose>,
    /// Reference poses for the pose_too_far check; skipped when absent.
    pub ground_truth: Option<&'a BTreeMap<PartId, Pose>>,
    pub initial: &'a BTreeMap<PartId, Pose>,
    pub clouds: &'a BTreeMap<PartId, PointCloud>,
    pub obstacles: &'a [Obstacle],
    pub clearance: f64,
}

/// Runs the assembly steps in order and stops at the first failure.
///
/// In each step the child with the most parts (ties: lowest part id) is the
/// base and stays where it is; every other child is planned onto the base,
/// first to an approach pose `approach_offset` away, then straight in. The
/// straight insertion is only checked against parts outside the step, since
/// mating parts are expected to touch. Finally each moved child must lie
/// within `attachment` of the rest of the step's parts.
pub fn execute_assembly(
    task: &AssemblyTask,
    params: &SimParams,
) -> Result<Vec<StepOutcome>, ExecuteError> {
    let graph = task.graph;
    if !is_feasible_order(graph, task.order)? {
        return Err(ExecuteError::InfeasibleOrder);
    }
    for p in graph.parts() {
        for (map, what) in [
            (task.targets, "target pose"),
            (task.initial, "initial pose"),
        ] {
            if !map.contains_key(&p) {
                return Err(ExecuteError::MissingPart { part: p, what });
            }
        }
        if !task.clouds.contains_key(&p) {
            return Err(ExecuteError::MissingPart {
                part: p,
                what: "point cloud",
            });
        }
    }
    // validates the clearance once up front
    World::new(task.obstacles.to_vec(), BTreeMap::new(), task.clearance)?;

    // current[p] = frame[c] ∘ target[p] for every part p of component c
    let mut current: BTreeMap<PartId, Pose> = task.initial.clone();
    let mut outcomes = Vec::new();

    for (step, &node_id) in task.order.0.iter().enumerate() {
        let node = graph
            .node(node_id)
            .ok_or(GraphError::UnknownNode(node_id))?;
        let mut children: Vec<BTreeSet<PartId>> = node
            .children
            .iter()
            .map(|c| {
                graph
                    .node(*c)
                    .map(|n| n.part_set.clone())
                    .ok_or(GraphError::UnknownNode(*c))
            })
            .collect::<Result<_, _>>()?;
        children.sort_by(|a, b| {
            b.len()
                .cmp(&a.len())
                .then_with(|| a.first().cmp(&b.first()))
        });
        let base = children.remove(0);
        let movers = {
            let mut m = children;
            m.sort_by_key(|c| c.first().copied());
            m
        };
        let anchor = *base.first().expect("non-empty part set");
        let mut outcome = StepOutcome {
            step,
            node: node_id,
            status: StepStatus::Success,
            moved: movers.clone(),
            paths: None,
            detail: None,
        };

        if let Some(gt) = task.ground_truth {
            if let Some(detail) = too_far(&node.part_set, anchor, task.targets, gt, params)? {
                outcome.status = StepStatus::PoseTooFar;
                outcome.detail = Some(detail);
                outcomes.push(outcome);
                break;
            }
        }

        let frame_of = |current: &BTreeMap<PartId, Pose>, p: PartId| {
            current[&p].compose(&task.targets[&p].inverse())
        };
        let base_frame = frame_of(&current, anchor);
        let base_centroid = centroid_of(&base, task, &base_frame);
        let mut paths = Vec::new();
        let mut failure = None;
        for (k, mover) in movers.iter().enumerate() {
            let m_anchor = *mover.first().expect("non-empty part set");
            let start = frame_of(&current, m_anchor);
            let goal = base_frame;
            let body = assembled_cloud(mover, task);
            let world = world_without(task, &current, mover)?;
            let goal_centroid = centroid_of(mover, task, &goal);
            let dir = goal_centroid - base_centroid;
            let u = if dir.norm() > 1e-9 {
                dir.normalize()
            } else {
                Vector3::z()
            };
            let pre = Pose::new(goal.rotation, goal.translation + u * params.approach_offset);

            let mut planner = params.planner;
            planner.seed = params
                .planner
                .seed
                .wrapping_add(((step as u64) << 32) | k as u64)
                .wrapping_mul(0x9E37_79B9_7F4A_7C15);
            let path = match rrt_connect(&world, &body, &start, &pre, &planner) {
                Ok(p) => p,
                Err(e) => {
                    failure = Some(describe(mover, &e));
                    break;
                }
            };
            let mut outside = mover.clone();
            outside.extend(node.part_set.iter().copied());
            let free = world_without(task, &current, &outside)?;
            if !motion_is_valid(&free, &body, &pre, &goal, planner.resolution) {
                failure = Some(format!("insertion of {} is blocked", set_str(mover)));
                break;
            }
            let mut poses = path.poses;
            poses.push(goal);
            for p in mover {
                current.insert(*p, goal.compose(&task.targets[p]));
            }
            paths.push(ComponentPath {
                parts: mover.clone(),
                poses,
            });
        }
        if let Some(detail) = failure {
            outcome.status = StepStatus::NoPath;
            outcome.detail = Some(detail);
            outcomes.push(outcome);
            break;
        }

        if let Some(detail) = floating(node, &movers, &current, task, params.attachment) {
            outcome.status = StepStatus::FloatingPart;
            outcome.detail = Some(detail);
            outcomes.push(outcome);
            break;
        }
        outcome.paths = Some(paths);
        outcomes.push(outcome);
    }
    Ok(outcomes)
}

fn set_str(s: &BTreeSet<PartId>) -> String {
    let v: Vec<String> = s.iter().map(|p| p.to_string()).collect();
    format!("{{{}}}", v.join(","))
}

fn describe(mover: &BTreeSet<PartId>, e: &PlanError) -> String {
    format!("planning {} failed: {e}", set_str(mover))
}

fn too_far(
    parts: &BTreeSet<PartId>,
    anchor: PartId,
    targets: &BTreeMap<PartId, Pose>,
    gt: &BTreeMap<PartId, Pose>,
    params: &SimParams,
) -> Result<Option<String>, ExecuteError> {
    let gt_anchor = gt.get(&anchor).ok_or(ExecuteError::MissingPart {
        part: anchor,
        what: "ground-truth pose",
    })?;
    let t_anchor = &targets[&anchor];
    for p in parts {
        if *p == anchor {
            continue;
        }
        let g = gt.get(p).ok_or(ExecuteError::MissingPart {
            part: *p,
            what: "ground-truth pose",
        })?;
        let rel_t = t_anchor.inverse().compose(&targets[p]);
        let rel_g = gt_anchor.inverse().compose(g);
        let dt = (rel_t.translation - rel_g.translation).norm();
        let dr = geodesic_distance(&rel_t.rotation, &rel_g.rotation).to_degrees();
        if dt > params.too_far_translation || dr > params.too_far_rotation_deg {
            return Ok(Some(format!(
                "part {p} is {dt:.4} m / {dr:.2} deg from its ground-truth pose relative to part {anchor}"
            )));
        }
    }
    Ok(None)
}

/// Union of the component's clouds in its assembled frame.
fn assembled_cloud(parts: &BTreeSet<PartId>, task: &AssemblyTask) -> PointCloud {
    let first = *parts.first().expect("non-empty part set");
    let mut pts = Vec::new();
    for p in parts {
        let t = &task.targets[p];
        pts.extend(task.clouds[p].points.iter().map(|x| t.transform_point(x)));
    }
    PointCloud::new(first, pts)
}

fn centroid_of(parts: &BTreeSet<PartId>, task: &AssemblyTask, frame: &Pose) -> Point3<f64> {
    let c = assembled_cloud(parts, task)
        .centroid()
        .expect("non-empty cloud");
    frame.transform_point(&c)
}

fn world_without(
    task: &AssemblyTask,
    current: &BTreeMap<PartId, Pose>,
    exclude: &BTreeSet<PartId>,
) -> Result<World, ExecuteError> {
    let placed = current
        .iter()
        .filter(|(p, _)| !exclude.contains(p))
        .map(|(p, pose)| (*p, (task.clouds[p].clone(), *pose)))
        .collect();
    Ok(World::new(task.obstacles.to_vec(), placed, task.clearance)?)
}

fn world_points(
    parts: &BTreeSet<PartId>,
    current: &BTreeMap<PartId, Pose>,
    task: &AssemblyTask,
) -> Vec<Point3<f64>> {
    parts
        .iter()
        .flat_map(|p| {
            let pose = current[p];
            task.clouds[p]
                .points
                .iter()
                .map(move |x| pose.transform_point(x))
        })
        .collect()
}

fn floating(
    node: &crate::graph::GraphNode,
    movers: &[BTreeSet<PartId>],
    current: &BTreeMap<PartId, Pose>,
    task: &AssemblyTask,
    threshold: f64,
) -> Option<String> {
    for mover in movers {
        let rest: BTreeSet<PartId> = node.part_set.difference(mover).copied().collect();
        let index = PointIndex::new(world_points(&rest, current, task));
        let gap = world_points(mover, current, task)
            .iter()
            .filter_map(|p| index.nearest(p).map(|(d2, _)| d2.sqrt()))
            .fold(f64::INFINITY, f64::min);
        if gap > threshold {
            return Some(format!(
                "{} is {gap:.4} m from the rest of its subassembly",
                set_str(mover)
            ));
        }
    }
    None
}

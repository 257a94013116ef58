//! JSON scenario files for the simulator.
//!
//! Parts are staged by the scenario author: initial poses must keep every
//! part at least `clearance` above support boxes such as a table, otherwise
//! the first plan reports a start collision.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use nalgebra::{Point3, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::grasp::box_surface;
use super::{
    acr, execute_assembly, success_rate, AssemblyTask, ExecuteError, Obstacle, SimParams,
    TrialResult,
};
use crate::geometry::{load_cloud, Aabb, CloudIoError, PointCloud, Pose};
use crate::graph::{feasible_orders, parse_tree, AssemblyGraph, AssemblyOrder, GraphError, PartId};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudSource {
    /// `.xyz` or `.ply`, relative to the scenario file.
    Path(PathBuf),
    Points(Vec<[f64; 3]>),
    /// Surface samples of a box centred on the part origin.
    Box {
        size: [f64; 3],
        spacing: f64,
    },
}

impl CloudSource {
    /// Loads or builds the cloud; relative paths resolve against `base`.
    pub fn load(&self, part: PartId, base: &Path) -> Result<PointCloud, ScenarioError> {
        let cloud = match self {
            CloudSource::Path(p) => load_cloud(&base.join(p), part)?,
            CloudSource::Points(v) => PointCloud::new(part, points(v)),
            CloudSource::Box { size, spacing } => {
                if spacing.is_nan() || *spacing <= 0.0 {
                    return Err(ScenarioError::Invalid(format!(
                        "part {part}: spacing must be positive"
                    )));
                }
                PointCloud::new(part, box_surface(*size, *spacing))
            }
        };
        if cloud.is_empty() {
            return Err(ScenarioError::Invalid(format!(
                "part {part} has an empty cloud"
            )));
        }
        Ok(cloud)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartSpec {
    pub id: PartId,
    #[serde(flatten)]
    pub cloud: CloudSource,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ObstacleSpec {
    Box { min: [f64; 3], max: [f64; 3] },
    Points(Vec<[f64; 3]>),
    Cloud(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jitter {
    /// Uniform per-axis translation noise bound, meters.
    pub translation: f64,
    /// Largest rotation about a random axis, degrees.
    pub rotation_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub tree: String,
    /// Steps as part sets; the first feasible order when absent.
    #[serde(default)]
    pub order: Option<Vec<BTreeSet<PartId>>>,
    pub parts: Vec<PartSpec>,
    #[serde(default)]
    pub ground_truth: Option<BTreeMap<PartId, Pose>>,
    /// Defaults to the ground truth.
    #[serde(default)]
    pub targets: Option<BTreeMap<PartId, Pose>>,
    pub initial: BTreeMap<PartId, Pose>,
    #[serde(default)]
    pub initial_jitter: Option<Jitter>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleSpec>,
    #[serde(default = "default_clearance")]
    pub clearance: f64,
    #[serde(default)]
    pub params: SimParams,
    #[serde(default)]
    pub seed: u64,
}

fn default_clearance() -> f64 {
    0.005
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("bad scenario JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error("bad tree: {0}")]
    Tree(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Cloud(#[from] CloudIoError),
    #[error("step {0:?} is not a node of the tree")]
    UnknownStep(BTreeSet<PartId>),
    #[error("scenario has neither targets nor ground_truth")]
    NoTargets,
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Execute(#[from] ExecuteError),
}

/// A scenario with clouds loaded and the graph and order resolved.
#[derive(Debug, Clone)]
pub struct LoadedScenario {
    pub graph: AssemblyGraph,
    pub order: AssemblyOrder,
    pub clouds: BTreeMap<PartId, PointCloud>,
    pub targets: BTreeMap<PartId, Pose>,
    pub ground_truth: Option<BTreeMap<PartId, Pose>>,
    pub initial: BTreeMap<PartId, Pose>,
    pub jitter: Option<Jitter>,
    pub obstacles: Vec<Obstacle>,
    pub clearance: f64,
    pub params: SimParams,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub trials: Vec<TrialResult>,
    pub success_rate: f64,
    pub acr: f64,
}

fn points(v: &[[f64; 3]]) -> Vec<Point3<f64>> {
    v.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()
}

impl Scenario {
    pub fn from_file(path: &Path) -> Result<LoadedScenario, ScenarioError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let s: Scenario = serde_json::from_str(&text)?;
        s.resolve(path.parent().unwrap_or(Path::new(".")))
    }

    /// Loads clouds (relative paths against `base`) and resolves the order.
    pub fn resolve(&self, base: &Path) -> Result<LoadedScenario, ScenarioError> {
        let tree = parse_tree(&self.tree).map_err(|e| ScenarioError::Tree(e.to_string()))?;
        let graph = AssemblyGraph::from_tree(&tree, []);
        let order = match &self.order {
            Some(steps) => AssemblyOrder(
                steps
                    .iter()
                    .map(|s| {
                        graph
                            .find_by_parts(s)
                            .ok_or_else(|| ScenarioError::UnknownStep(s.clone()))
                    })
                    .collect::<Result<_, _>>()?,
            ),
            None => feasible_orders(&graph, 1)?
                .orders
                .into_iter()
                .next()
                .ok_or_else(|| ScenarioError::Invalid("tree has no steps".into()))?,
        };
        let mut clouds = BTreeMap::new();
        for spec in &self.parts {
            let cloud = spec.cloud.load(spec.id, base)?;
            if clouds.insert(spec.id, cloud).is_some() {
                return Err(ScenarioError::Invalid(format!(
                    "part {} listed twice",
                    spec.id
                )));
            }
        }
        let mut obstacles = Vec::new();
        for o in &self.obstacles {
            obstacles.push(match o {
                ObstacleSpec::Box { min, max } => {
                    Obstacle::Box(Aabb::new(Point3::from(*min), Point3::from(*max)))
                }
                ObstacleSpec::Points(v) => {
                    Obstacle::Cloud(PointCloud::new(PartId(u32::MAX), points(v)))
                }
                ObstacleSpec::Cloud(p) => {
                    Obstacle::Cloud(load_cloud(&base.join(p), PartId(u32::MAX))?)
                }
            });
        }
        let targets = self
            .targets
            .clone()
            .or_else(|| self.ground_truth.clone())
            .ok_or(ScenarioError::NoTargets)?;
        Ok(LoadedScenario {
            graph,
            order,
            clouds,
            targets,
            ground_truth: self.ground_truth.clone(),
            initial: self.initial.clone(),
            jitter: self.initial_jitter,
            obstacles,
            clearance: self.clearance,
            params: self.params,
            seed: self.seed,
        })
    }
}

impl LoadedScenario {
    /// Initial part poses of trial `trial`, jittered when the scenario asks
    /// for it.
    pub fn initial_poses(&self, trial: u64) -> BTreeMap<PartId, Pose> {
        match self.jitter {
            Some(j) => jittered(&self.initial, j, self.seed.wrapping_add(trial)),
            None => self.initial.clone(),
        }
    }

    /// One trial. Trial `t` uses seed `seed + t` for the initial-pose jitter
    /// and the planner.
    pub fn run_trial(&self, trial: u64) -> Result<TrialResult, ScenarioError> {
        let seed = self.seed.wrapping_add(trial);
        let initial = self.initial_poses(trial);
        let mut params = self.params;
        params.planner.seed = seed;
        let task = AssemblyTask {
            graph: &self.graph,
            order: &self.order,
            targets: &self.targets,
            ground_truth: self.ground_truth.as_ref(),
            initial: &initial,
            clouds: &self.clouds,
            obstacles: &self.obstacles,
            clearance: self.clearance,
        };
        let outcomes = execute_assembly(&task, &params)?;
        Ok(TrialResult {
            outcomes,
            total_steps: self.order.0.len(),
        })
    }

    /// Runs `trials` independent trials in parallel.
    pub fn run(&self, trials: usize) -> Result<SimReport, ScenarioError> {
        if trials == 0 {
            return Err(ScenarioError::Invalid("need at least one trial".into()));
        }
        let results: Vec<TrialResult> = (0..trials as u64)
            .into_par_iter()
            .map(|t| self.run_trial(t))
            .collect::<Result<_, _>>()?;
        let counts: Vec<(usize, usize)> = results
            .iter()
            .map(|t| (t.completed(), t.total_steps))
            .collect();
        let invalid = |e| ScenarioError::Invalid(format!("{e}"));
        Ok(SimReport {
            success_rate: success_rate(&results).map_err(invalid)?,
            acr: acr(&counts).map_err(invalid)?,
            trials: results,
        })
    }
}

fn jittered(initial: &BTreeMap<PartId, Pose>, j: Jitter, seed: u64) -> BTreeMap<PartId, Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    initial
        .iter()
        .map(|(id, pose)| {
            let mut d = Vector3::zeros();
            if j.translation > 0.0 {
                for i in 0..3 {
                    d[i] = rng.gen_range(-j.translation..=j.translation);
                }
            }
            let axis = Vector3::new(
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
                rng.gen::<f64>() - 0.5,
            );
            let angle = rng.gen::<f64>() * j.rotation_deg.to_radians();
            let r = nalgebra::Unit::try_new(axis, 1e-9)
                .map(|a| UnitQuaternion::from_axis_angle(&a, angle))
                .unwrap_or_else(UnitQuaternion::identity);
            (*id, Pose::new(r * pose.rotation, pose.translation + d))
        })
        .collect()
}

//! Object-centric assembly execution: collision world, SE(3) motion
//! planning for free-flying components, heuristic grasps, step-failure
//! classification and success statistics.

mod execute;
mod grasp;
mod planner;
mod scenario;
mod stats;
mod world;

pub use execute::{
    execute_assembly, AssemblyTask, ComponentPath, ExecuteError, SimParams, StepOutcome, StepStatus,
};
pub use grasp::{box_surface, heuristic_grasp, GraspParams, GraspSpec, GraspStrategy};
pub use planner::{
    interpolate, motion_is_valid, rrt_connect, se3_distance, sweep_bound, PlanError, PlannedPath,
    PlannerParams,
};
pub use scenario::{
    CloudSource, Jitter, LoadedScenario, ObstacleSpec, PartSpec, Scenario, ScenarioError, SimReport,
};
pub use stats::{acr, success_rate, StatsError, TrialResult};
pub use world::{Obstacle, World, WorldError};

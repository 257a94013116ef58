use nalgebra::{Matrix3, Point3, Rotation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::geometry::{principal_extents, GeometryError, PointCloud, Pose};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraspStrategy {
    Stick,
    FlatThin,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraspParams {
    /// longest / middle extent at or above which a part is a stick.
    pub stick_ratio: f64,
    /// shortest / middle extent at or below which a part is flat and thin.
    pub flat_ratio: f64,
    /// Depth of the contact below the top surface (or inside the edge).
    pub below_top: f64,
}

impl Default for GraspParams {
    fn default() -> Self {
        GraspParams {
            stick_ratio: 3.0,
            flat_ratio: 0.2,
            below_top: 0.03,
        }
    }
}

/// Gripper frame: x is the closing direction, z the approach direction,
/// origin at the contact point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraspSpec {
    pub pose: Pose,
    pub strategy: GraspStrategy,
    pub contact: Point3<f64>,
    /// Principal extents, largest first.
    pub extents: [f64; 3],
}

fn horizontal(v: &Vector3<f64>) -> Option<Vector3<f64>> {
    let h = Vector3::new(v.x, v.y, 0.0);
    let n = h.norm();
    (n > 1e-9).then(|| h / n)
}

fn gripper_pose(closing: Vector3<f64>, approach: Vector3<f64>, contact: Point3<f64>) -> Pose {
    let z = approach.normalize();
    let x = (closing - z * z.dot(&closing)).normalize();
    let y = z.cross(&x);
    let r = Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[x, y, z]));
    Pose::new(UnitQuaternion::from_rotation_matrix(&r), contact.coords)
}

/// Heuristic grasp for a part cloud (in its own frame) placed at `pose`.
///
/// Sticks are grasped at the centroid from above, closing across the long
/// axis. Flat thin parts standing upright are grasped from above on their
/// top edge, `below_top` under the top surface; lying flat, they are pinched
/// from the side `below_top` inside their far edge. Anything else falls back
/// to the stick rule.
pub fn heuristic_grasp(
    cloud: &PointCloud,
    pose: &Pose,
    params: &GraspParams,
) -> Result<GraspSpec, GeometryError> {
    let world = cloud.transformed(pose);
    let (ext, canon) = principal_extents(&world)?;
    let rot = canon.pose.rotation_matrix();
    let mut axes: Vec<(f64, Vector3<f64>)> = (0..3)
        .map(|i| (ext[i], rot.column(i).into_owned()))
        .collect();
    axes.sort_by(|a, b| b.0.total_cmp(&a.0));
    let (e1, e2, e3) = (axes[0].0, axes[1].0, axes[2].0);
    let extents = [e1, e2, e3];
    let centroid = world.centroid().expect("non-empty");
    let bounds = world.bounds().expect("non-empty");
    let down = -Vector3::z();

    let stick = e2 <= 0.0 || e1 / e2 >= params.stick_ratio;
    let flat = !stick && e3 / e2 <= params.flat_ratio;
    if flat {
        let thin = axes[2].1;
        if let Some(closing) =
            horizontal(&thin).filter(|_| thin.z.abs() < std::f64::consts::FRAC_1_SQRT_2)
        {
            // upright: grip the top edge across the thickness
            let z = (bounds.max.z - params.below_top).max(bounds.min.z);
            let contact = Point3::new(centroid.x, centroid.y, z);
            return Ok(GraspSpec {
                pose: gripper_pose(closing, down, contact),
                strategy: GraspStrategy::FlatThin,
                contact,
                extents,
            });
        }
        // lying down: pinch the rim along the longest in-plane axis
        let long = axes[0].1;
        let reach = world
            .points
            .iter()
            .map(|p| (p - centroid).dot(&long))
            .fold(f64::NEG_INFINITY, f64::max);
        let contact = centroid + long * (reach - params.below_top).max(0.0);
        return Ok(GraspSpec {
            pose: gripper_pose(thin, -long, contact),
            strategy: GraspStrategy::FlatThin,
            contact,
            extents,
        });
    }

    let long = axes[0].1;
    let closing = horizontal(&Vector3::z().cross(&long)).unwrap_or_else(Vector3::x);
    Ok(GraspSpec {
        pose: gripper_pose(closing, down, centroid),
        strategy: GraspStrategy::Stick,
        contact: centroid,
        extents,
    })
}

/// Points on the surface of an axis-aligned box centred at the origin,
/// spaced roughly `spacing` apart.
pub fn box_surface(size: [f64; 3], spacing: f64) -> Vec<Point3<f64>> {
    let n: Vec<usize> = size
        .iter()
        .map(|s| ((s / spacing).ceil() as usize).max(1))
        .collect();
    let coord = |axis: usize, i: usize| -size[axis] / 2.0 + size[axis] * i as f64 / n[axis] as f64;
    let mut pts = Vec::new();
    for i in 0..=n[0] {
        for j in 0..=n[1] {
            for k in 0..=n[2] {
                if i == 0 || i == n[0] || j == 0 || j == n[1] || k == 0 || k == n[2] {
                    pts.push(Point3::new(coord(0, i), coord(1, j), coord(2, k)));
                }
            }
        }
    }
    pts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PartId;

    fn slab(size: [f64; 3]) -> PointCloud {
        PointCloud::new(PartId(0), box_surface(size, 0.01))
    }

    #[test]
    fn stick_grasped_at_centroid() {
        let c = slab([0.4, 0.04, 0.04]);
        let pose = Pose::from_translation(0.1, 0.2, 0.5);
        let g = heuristic_grasp(&c, &pose, &GraspParams::default()).unwrap();
        assert_eq!(g.strategy, GraspStrategy::Stick);
        assert!((g.contact - Point3::new(0.1, 0.2, 0.5)).norm() < 1e-9);
        let x = g.pose.rotation_matrix().column(0).into_owned();
        let z = g.pose.rotation_matrix().column(2).into_owned();
        assert!(x.dot(&Vector3::x()).abs() < 1e-6);
        assert!((z + Vector3::z()).norm() < 1e-9);
    }

    #[test]
    fn upright_board_contact_below_top() {
        // 30 x 30 x 1.5 cm board standing on edge, top at z = 0.3
        let c = slab([0.3, 0.015, 0.3]);
        let pose = Pose::from_translation(0.0, 0.0, 0.15);
        let g = heuristic_grasp(&c, &pose, &GraspParams::default()).unwrap();
        assert_eq!(g.strategy, GraspStrategy::FlatThin);
        assert!((g.contact.z - 0.27).abs() < 1e-9);
        let x = g.pose.rotation_matrix().column(0).into_owned();
        assert!(x.dot(&Vector3::y()).abs() > 1.0 - 1e-6);
    }

    #[test]
    fn cube_defaults_to_stick_rule() {
        let c = slab([0.1, 0.1, 0.1]);
        let g = heuristic_grasp(&c, &Pose::identity(), &GraspParams::default()).unwrap();
        assert_eq!(g.strategy, GraspStrategy::Stick);
        assert!(g.contact.coords.norm() < 1e-9);
    }

    #[test]
    fn degenerate_cloud_is_rejected() {
        let c = PointCloud::from_arrays(PartId(0), &[[0.0; 3], [0.0; 3], [0.0; 3]]);
        assert!(heuristic_grasp(&c, &Pose::identity(), &GraspParams::default()).is_err());
    }
}

use nalgebra::{Matrix3, UnitQuaternion, Vector3};

use super::{GeometryError, PointCloud, PointIndex, Pose};

/// Default part-accuracy threshold.
pub const PART_ACCURACY_THRESHOLD: f64 = 0.01;

/// Below this many point pairs the chamfer distance uses a plain double loop.
const BRUTE_FORCE_PAIRS: usize = 4096;

/// Angle of the relative rotation between `a` and `b`, in `[0, π]`.
///
/// Evaluated through the quaternion half-angle, which stays accurate near 0
/// and π where the trace form loses digits.
pub fn geodesic_distance(a: &UnitQuaternion<f64>, b: &UnitQuaternion<f64>) -> f64 {
    let d = a.inverse() * b;
    2.0 * d.imag().norm().atan2(d.scalar().abs())
}

/// `arccos((tr(Rᵀ R̂) - 1) / 2)` with the argument clamped to `[-1, 1]`.
pub fn geodesic_distance_from_matrices(r: &Matrix3<f64>, r_hat: &Matrix3<f64>) -> f64 {
    let c = ((r.transpose() * r_hat).trace() - 1.0) / 2.0;
    c.clamp(-1.0, 1.0).acos()
}

/// Euclidean distance between two translations.
pub fn rmse_translation(t: &Vector3<f64>, t_hat: &Vector3<f64>) -> f64 {
    (t - t_hat).norm()
}

/// Root-mean-square of translation errors over many pose pairs.
pub fn rmse_translations<'a, I>(pairs: I) -> Option<f64>
where
    I: IntoIterator<Item = (&'a Vector3<f64>, &'a Vector3<f64>)>,
{
    let mut n = 0usize;
    let mut sum = 0.0;
    for (a, b) in pairs {
        sum += (a - b).norm_squared();
        n += 1;
    }
    (n > 0).then(|| (sum / n as f64).sqrt())
}

fn mean_nearest_sq(from: &[nalgebra::Point3<f64>], to: &[nalgebra::Point3<f64>]) -> f64 {
    let sum: f64 = if from.len() * to.len() <= BRUTE_FORCE_PAIRS {
        from.iter()
            .map(|x| {
                to.iter()
                    .map(|y| (x - y).norm_squared())
                    .fold(f64::INFINITY, f64::min)
            })
            .sum()
    } else {
        let index = PointIndex::new(to.to_vec());
        from.iter()
            .map(|x| index.nearest(x).expect("non-empty").0)
            .sum()
    };
    sum / from.len() as f64
}

/// Bidirectional mean of squared nearest-neighbour distances.
pub fn chamfer_distance(s1: &PointCloud, s2: &PointCloud) -> Result<f64, GeometryError> {
    if s1.is_empty() || s2.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(mean_nearest_sq(&s1.points, &s2.points) + mean_nearest_sq(&s2.points, &s1.points))
}

/// How the part-accuracy threshold is compared.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AccuracyMode {
    /// Compare the chamfer distance (a mean of squared distances) directly.
    #[default]
    Squared,
    /// Compare the square root of the chamfer distance.
    Root,
}

/// True when the cloud placed at `pred_pose` is within `threshold` of the
/// same cloud placed at `gt_pose`.
pub fn part_accuracy(
    gt_pose: &Pose,
    pred_pose: &Pose,
    cloud: &PointCloud,
    threshold: f64,
    mode: AccuracyMode,
) -> Result<bool, GeometryError> {
    let cd = chamfer_distance(&cloud.transformed(gt_pose), &cloud.transformed(pred_pose))?;
    let value = match mode {
        AccuracyMode::Squared => cd,
        AccuracyMode::Root => cd.sqrt(),
    };
    Ok(value < threshold)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::PartId;
    use nalgebra::{Point3, Unit};
    use std::f64::consts::PI;

    fn rot(axis: Vector3<f64>, angle: f64) -> UnitQuaternion<f64> {
        UnitQuaternion::from_axis_angle(&Unit::new_normalize(axis), angle)
    }

    #[test]
    fn geodesic_basics() {
        let i = UnitQuaternion::identity();
        assert_eq!(geodesic_distance(&i, &i), 0.0);
        let z = rot(Vector3::z(), PI);
        assert!((geodesic_distance(&i, &z) - PI).abs() < 1e-12);
        let a = rot(Vector3::new(1.0, 2.0, 3.0), 0.7);
        let b = rot(Vector3::new(-1.0, 0.5, 0.0), 2.1);
        assert_eq!(geodesic_distance(&a, &b), geodesic_distance(&b, &a));
    }

    #[test]
    fn trace_form_agrees() {
        let a = rot(Vector3::new(0.3, -1.0, 0.2), 1.3);
        let b = rot(Vector3::new(1.0, 1.0, 0.0), -0.4);
        let m = geodesic_distance_from_matrices(
            a.to_rotation_matrix().matrix(),
            b.to_rotation_matrix().matrix(),
        );
        assert!((m - geodesic_distance(&a, &b)).abs() < 1e-9);
    }

    #[test]
    fn rmse_pythagorean() {
        let t = Vector3::zeros();
        assert_eq!(rmse_translation(&t, &t), 0.0);
        assert_eq!(rmse_translation(&t, &Vector3::new(3.0, 4.0, 0.0)), 5.0);
    }

    #[test]
    fn chamfer_singletons() {
        let a = PointCloud::from_arrays(PartId(0), &[[0.0, 0.0, 0.0]]);
        let b = PointCloud::from_arrays(PartId(1), &[[1.0, 0.0, 0.0]]);
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 2.0);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
        let empty = PointCloud::new(PartId(2), vec![]);
        assert!(matches!(
            chamfer_distance(&a, &empty),
            Err(GeometryError::EmptyCloud)
        ));
    }

    #[test]
    fn part_accuracy_threshold_boundary() {
        // singleton cloud offset by d along x: CD = 2 d^2
        let cloud = PointCloud::new(PartId(0), vec![Point3::origin()]);
        let gt = Pose::identity();
        let below = Pose::from_translation((0.0099_f64 / 2.0).sqrt(), 0.0, 0.0);
        let above = Pose::from_translation((0.0101_f64 / 2.0).sqrt(), 0.0, 0.0);
        let th = PART_ACCURACY_THRESHOLD;
        assert!(part_accuracy(&gt, &below, &cloud, th, AccuracyMode::Squared).unwrap());
        assert!(!part_accuracy(&gt, &above, &cloud, th, AccuracyMode::Squared).unwrap());
        assert!(part_accuracy(&gt, &gt, &cloud, th, AccuracyMode::Squared).unwrap());
        // root mode compares sqrt(CD) = sqrt(2) d
        assert!(!part_accuracy(&gt, &below, &cloud, th, AccuracyMode::Root).unwrap());
    }
}

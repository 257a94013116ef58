use nalgebra::{Matrix3, Rotation3, UnitQuaternion, Vector3, SVD};

use super::{GeometryError, PointCloud, Pose};

/// Relative eigenvalue gap below which two principal axes are reported as
/// ambiguous.
const AMBIGUITY_RELATIVE_GAP: f64 = 1e-8;

/// Result of expressing a cloud in its principal-axis frame.
#[derive(Debug, Clone)]
pub struct Canonicalization {
    /// Input points expressed in the canonical frame (centroid at origin,
    /// diagonal covariance with non-increasing variances).
    pub cloud: PointCloud,
    /// Maps canonical coordinates back to the input frame.
    pub pose: Pose,
    /// Variances along the canonical axes, largest first.
    pub variances: [f64; 3],
    /// Set when two eigenvalues coincide, i.e. the shape has no unique frame.
    pub ambiguous_axes: bool,
}

/// Centers the cloud and rotates it onto its principal axes.
///
/// Axis signs: each of the first two axes points toward the point with the
/// largest absolute projection on it (first such point wins ties); the third
/// axis is their cross product.
pub fn pca_canonicalize(cloud: &PointCloud) -> Result<Canonicalization, GeometryError> {
    if cloud.len() < 3 {
        return Err(GeometryError::TooFewPoints {
            needed: 3,
            got: cloud.len(),
        });
    }
    if !cloud.is_finite() {
        return Err(GeometryError::NonFinite);
    }
    let centroid = cloud.centroid().expect("non-empty");
    let n = cloud.len() as f64;
    let mut cov = Matrix3::zeros();
    for p in &cloud.points {
        let d = p - centroid;
        cov += d * d.transpose();
    }
    cov /= n;

    // SymmetricEigen can return wrong vectors for nearly diagonal input
    let svd = SVD::new(cov, true, false);
    let (eigenvalues, eigenvectors) = (svd.singular_values, svd.u.expect("requested"));
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        eigenvalues[b]
            .partial_cmp(&eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let values = order.map(|i| eigenvalues[i].max(0.0));
    let scale = values[0];
    if scale <= f64::MIN_POSITIVE || scale <= 1e-30 {
        return Err(GeometryError::DegenerateCovariance);
    }
    let ambiguous_axes = (values[0] - values[1]) <= AMBIGUITY_RELATIVE_GAP * scale
        || (values[1] - values[2]) <= AMBIGUITY_RELATIVE_GAP * scale;

    let orient = |axis: Vector3<f64>| -> Vector3<f64> {
        let mut best = 0.0_f64;
        let mut best_proj = 0.0_f64;
        for p in &cloud.points {
            let proj = (p - centroid).dot(&axis);
            if proj.abs() > best {
                best = proj.abs();
                best_proj = proj;
            }
        }
        if best_proj < 0.0 {
            -axis
        } else {
            axis
        }
    };
    let e1 = orient(eigenvectors.column(order[0]).normalize());
    let e2_raw: Vector3<f64> = eigenvectors.column(order[1]).into_owned();
    // re-orthogonalize against e1 before fixing the sign
    let e2 = orient((e2_raw - e1 * e1.dot(&e2_raw)).normalize());
    let e3 = e1.cross(&e2);

    let basis = Matrix3::from_columns(&[e1, e2, e3]);
    let rotation = UnitQuaternion::from_rotation_matrix(&Rotation3::from_matrix_unchecked(basis));
    let pose = Pose::new(rotation, centroid.coords);
    let inv = pose.inverse();
    let canonical = PointCloud::new(
        cloud.part,
        cloud
            .points
            .iter()
            .map(|p| inv.transform_point(p))
            .collect(),
    );
    Ok(Canonicalization {
        cloud: canonical,
        pose,
        variances: values,
        ambiguous_axes,
    })
}

/// Extents (max - min) of the cloud along its principal axes, largest-variance
/// axis first, together with the canonicalization used.
pub fn principal_extents(
    cloud: &PointCloud,
) -> Result<(Vector3<f64>, Canonicalization), GeometryError> {
    let canon = pca_canonicalize(cloud)?;
    let b = canon.cloud.bounds().expect("non-empty");
    Ok((b.extents(), canon))
}

use nalgebra::Point3;
use rstar::primitives::GeomWithData;
use rstar::RTree;

type Entry = GeomWithData<[f64; 3], usize>;

/// Static nearest-neighbour index over a point set.
pub struct PointIndex {
    points: Vec<Point3<f64>>,
    tree: Option<RTree<Entry>>,
}

impl PointIndex {
    pub fn new(points: Vec<Point3<f64>>) -> Self {
        let tree = if points.is_empty() {
            None
        } else {
            let raw: Vec<Entry> = points
                .iter()
                .enumerate()
                .map(|(i, p)| GeomWithData::new([p.x, p.y, p.z], i))
                .collect();
            Some(RTree::bulk_load(raw))
        };
        Self { points, tree }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3<f64>] {
        &self.points
    }

    /// Squared distance to, and index of, the nearest indexed point.
    pub fn nearest(&self, q: &Point3<f64>) -> Option<(f64, usize)> {
        let tree = self.tree.as_ref()?;
        let idx = tree.nearest_neighbor(&[q.x, q.y, q.z])?.data;
        Some(((q - self.points[idx]).norm_squared(), idx))
    }

    /// True if some indexed point lies strictly closer than `radius`.
    pub fn any_within(&self, q: &Point3<f64>, radius: f64) -> bool {
        self.nearest(q).is_some_and(|(d2, _)| d2 < radius * radius)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nearest_matches_linear_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pts: Vec<Point3<f64>> = (0..500)
            .map(|_| Point3::new(rng.gen(), rng.gen(), rng.gen()))
            .collect();
        let index = PointIndex::new(pts.clone());
        for _ in 0..200 {
            let q = Point3::new(rng.gen(), rng.gen(), rng.gen());
            let brute = pts
                .iter()
                .map(|p| (q - p).norm_squared())
                .fold(f64::INFINITY, f64::min);
            let (d2, _) = index.nearest(&q).unwrap();
            assert_eq!(d2, brute);
        }
    }

    #[test]
    fn empty_index() {
        let index = PointIndex::new(Vec::new());
        assert!(index.nearest(&Point3::origin()).is_none());
        assert!(!index.any_within(&Point3::origin(), 1.0));
    }

    #[test]
    fn duplicate_points_are_fine() {
        let index = PointIndex::new(vec![Point3::new(1.0, 1.0, 1.0); 100]);
        assert_eq!(index.nearest(&Point3::origin()).unwrap().0, 3.0);
    }

    #[test]
    fn flat_and_collinear_clouds() {
        let mut plane = Vec::new();
        for i in 0..40 {
            for j in 0..40 {
                plane.push(Point3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        let index = PointIndex::new(plane);
        let (d2, _) = index.nearest(&Point3::new(0.105, 0.1, 0.0)).unwrap();
        assert!((d2 - 0.005f64.powi(2)).abs() < 1e-15);
        let line: Vec<Point3<f64>> = (0..2000).map(|i| Point3::new(0.0, 0.0, i as f64)).collect();
        let index = PointIndex::new(line);
        assert_eq!(
            index.nearest(&Point3::new(1.0, 0.0, 7.0)).unwrap(),
            (1.0, 7)
        );
    }
}

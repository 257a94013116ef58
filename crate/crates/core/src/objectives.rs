//! Reference pose losses for one assembly step and the minimum over
//! reassignments of ground-truth poses among equivalent parts.

use std::collections::BTreeMap;

use nalgebra::UnitQuaternion;
use serde::{Deserialize, Serialize};

use crate::geometry::{chamfer_distance, geodesic_distance, GeometryError, PointCloud, Pose};
use crate::graph::{EquivalenceClasses, PartId};

/// Default limit on the number of reassignments searched.
pub const DEFAULT_LOSS_PERMUTATION_CAP: u128 = 10_080;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub rot: f64,
    pub trans: f64,
    pub chamfer: f64,
    pub pc: f64,
    pub equiv: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            rot: 1.0,
            trans: 1.0,
            chamfer: 1.0,
            pc: 20.0,
            equiv: 0.1,
        }
    }
}

impl LossWeights {
    pub fn new(values: [f64; 5]) -> Result<Self, LossError> {
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(LossError::BadWeights(values.to_vec()));
        }
        let [rot, trans, chamfer, pc, equiv] = values;
        Ok(LossWeights {
            rot,
            trans,
            chamfer,
            pc,
            equiv,
        })
    }

    /// Parses `1,1,1,20,0.1`.
    pub fn parse(text: &str) -> Result<Self, LossError> {
        let vals: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| LossError::BadWeightText(text.to_string()))?;
        let arr: [f64; 5] = vals
            .try_into()
            .map_err(|_| LossError::BadWeightText(text.to_string()))?;
        Self::new(arr)
    }

    pub fn as_array(&self) -> [f64; 5] {
        [self.rot, self.trans, self.chamfer, self.pc, self.equiv]
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LossError {
    #[error("weights must be finite and non-negative, got {0:?}")]
    BadWeights(Vec<f64>),
    #[error("expected five comma-separated weights, got `{0}`")]
    BadWeightText(String),
    #[error("predicted, ground-truth and cloud maps cover different parts")]
    KeyMismatch,
    #[error("equivalence class mentions part {0}, which is not in this step")]
    UnknownClassMember(PartId),
    #[error("step has no components")]
    Empty,
    #[error("{required} reassignments needed, above the cap of {cap}")]
    CapExceeded { required: u128, cap: u128 },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Predicted and ground-truth poses plus canonical-frame clouds for every
/// component of one step.
#[derive(Debug, Clone)]
pub struct StepPrediction {
    pred: BTreeMap<PartId, Pose>,
    gt: BTreeMap<PartId, Pose>,
    clouds: BTreeMap<PartId, PointCloud>,
    classes: EquivalenceClasses,
}

impl StepPrediction {
    pub fn new(
        pred: BTreeMap<PartId, Pose>,
        gt: BTreeMap<PartId, Pose>,
        clouds: BTreeMap<PartId, PointCloud>,
        classes: EquivalenceClasses,
    ) -> Result<Self, LossError> {
        if pred.is_empty() {
            return Err(LossError::Empty);
        }
        if !pred.keys().eq(gt.keys()) || !pred.keys().eq(clouds.keys()) {
            return Err(LossError::KeyMismatch);
        }
        for c in classes.classes() {
            for p in c {
                if !pred.contains_key(p) {
                    return Err(LossError::UnknownClassMember(*p));
                }
            }
        }
        if clouds.values().any(|c| c.is_empty()) {
            return Err(GeometryError::EmptyCloud.into());
        }
        Ok(StepPrediction {
            pred,
            gt,
            clouds,
            classes,
        })
    }

    pub fn pred(&self) -> &BTreeMap<PartId, Pose> {
        &self.pred
    }

    pub fn gt(&self) -> &BTreeMap<PartId, Pose> {
        &self.gt
    }

    pub fn clouds(&self) -> &BTreeMap<PartId, PointCloud> {
        &self.clouds
    }

    pub fn classes(&self) -> &EquivalenceClasses {
        &self.classes
    }

    /// Same prediction with component `j` compared against the ground-truth
    /// pose of `assignment[j]`.
    pub fn reassigned(&self, assignment: &BTreeMap<PartId, PartId>) -> StepPrediction {
        let gt = self
            .gt
            .keys()
            .map(|j| {
                let src = assignment.get(j).unwrap_or(j);
                (*j, self.gt[src])
            })
            .collect();
        StepPrediction {
            pred: self.pred.clone(),
            gt,
            clouds: self.clouds.clone(),
            classes: self.classes.clone(),
        }
    }
}

/// Geodesic rotation loss; identical to the geometry metric.
pub fn rot_geodesic_loss(r: &UnitQuaternion<f64>, r_hat: &UnitQuaternion<f64>) -> f64 {
    geodesic_distance(r, r_hat)
}

/// Mean over points of `‖R p − R̂ p‖`.
pub fn pointcloud_mse_loss(
    r: &UnitQuaternion<f64>,
    r_hat: &UnitQuaternion<f64>,
    cloud: &PointCloud,
) -> Result<f64, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let sum: f64 = cloud
        .points
        .iter()
        .map(|p| (r * p - r_hat * p).norm())
        .sum();
    Ok(sum / cloud.len() as f64)
}

/// `−Σ_class Σ_pairs CD(P̂_j1, P̂_j2)` over predicted placements.
pub fn equiv_repulsion_loss(step: &StepPrediction) -> Result<f64, GeometryError> {
    let placed: BTreeMap<PartId, PointCloud> = step
        .classes
        .classes()
        .iter()
        .flatten()
        .map(|j| (*j, step.clouds[j].transformed(&step.pred[j])))
        .collect();
    let mut total = 0.0;
    for (a, b) in step.classes.pairs() {
        total += chamfer_distance(&placed[&a], &placed[&b])?;
    }
    Ok(-total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentLoss {
    pub rot: f64,
    pub trans: f64,
    pub chamfer: f64,
    pub pc: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TermValues {
    pub rot: f64,
    pub trans: f64,
    pub chamfer: f64,
    pub pc: f64,
    pub equiv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    /// Per-component terms averaged over components (these enter `total`).
    pub mean: TermValues,
    /// Per-component terms summed over components.
    pub sum: TermValues,
    /// `mean` multiplied by the weights.
    pub weighted: TermValues,
    pub components: BTreeMap<PartId, ComponentLoss>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct LossOptions {
    /// Use `‖t − t̂‖²` instead of `‖t − t̂‖` for the translation term.
    pub squared_translation: bool,
}

pub fn component_loss(
    pred: &Pose,
    gt: &Pose,
    cloud: &PointCloud,
    opts: LossOptions,
) -> Result<ComponentLoss, GeometryError> {
    let dt = (gt.translation - pred.translation).norm();
    Ok(ComponentLoss {
        rot: rot_geodesic_loss(&gt.rotation, &pred.rotation),
        trans: if opts.squared_translation {
            dt * dt
        } else {
            dt
        },
        chamfer: chamfer_distance(&cloud.transformed(pred), &cloud.transformed(gt))?,
        pc: pointcloud_mse_loss(&gt.rotation, &pred.rotation, cloud)?,
    })
}

pub fn total_loss(
    step: &StepPrediction,
    weights: &LossWeights,
    opts: LossOptions,
) -> Result<LossBreakdown, GeometryError> {
    let mut components = BTreeMap::new();
    let mut sum = TermValues::default();
    for (j, cloud) in &step.clouds {
        let c = component_loss(&step.pred[j], &step.gt[j], cloud, opts)?;
        sum.rot += c.rot;
        sum.trans += c.trans;
        sum.chamfer += c.chamfer;
        sum.pc += c.pc;
        components.insert(*j, c);
    }
    sum.equiv = equiv_repulsion_loss(step)?;
    let n = components.len() as f64;
    let mean = TermValues {
        rot: sum.rot / n,
        trans: sum.trans / n,
        chamfer: sum.chamfer / n,
        pc: sum.pc / n,
        equiv: sum.equiv,
    };
    let weighted = TermValues {
        rot: weights.rot * mean.rot,
        trans: weights.trans * mean.trans,
        chamfer: weights.chamfer * mean.chamfer,
        pc: weights.pc * mean.pc,
        equiv: weights.equiv * mean.equiv,
    };
    let total = weighted.rot + weighted.trans + weighted.chamfer + weighted.pc + weighted.equiv;
    Ok(LossBreakdown {
        total,
        mean,
        sum,
        weighted,
        components,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationMin {
    pub loss: LossBreakdown,
    /// Component → part whose ground-truth pose it is scored against.
    pub assignment: BTreeMap<PartId, PartId>,
    pub permutations_tried: u128,
}

fn next_permutation(v: &mut [usize]) -> bool {
    if v.len() < 2 {
        return false;
    }
    let mut i = v.len() - 1;
    while i > 0 && v[i - 1] >= v[i] {
        i -= 1;
    }
    if i == 0 {
        v.reverse();
        return false;
    }
    let mut j = v.len() - 1;
    while v[j] <= v[i - 1] {
        j -= 1;
    }
    v.swap(i - 1, j);
    v[i..].reverse();
    true
}

/// Minimum of [`total_loss`] over every reassignment of ground-truth poses
/// within equivalence classes. Ties go to the lexicographically smallest
/// assignment (listed in component order).
pub fn permutation_min_loss(
    step: &StepPrediction,
    weights: &LossWeights,
    opts: LossOptions,
    cap: u128,
) -> Result<PermutationMin, LossError> {
    let required = step.classes.permutation_count();
    if required > cap {
        return Err(LossError::CapExceeded { required, cap });
    }
    let classes: Vec<Vec<PartId>> = step
        .classes
        .classes()
        .iter()
        .map(|c| c.iter().copied().collect())
        .collect();
    let identity: BTreeMap<PartId, PartId> = step.pred.keys().map(|j| (*j, *j)).collect();

    // Per-component terms depend only on (component, gt source); cache them.
    let mut cache: BTreeMap<(PartId, PartId), ComponentLoss> = BTreeMap::new();
    let mut perms: Vec<Vec<usize>> = classes.iter().map(|c| (0..c.len()).collect()).collect();
    let mut best: Option<(f64, Vec<PartId>, BTreeMap<PartId, PartId>)> = None;
    let mut tried: u128 = 0;
    loop {
        let mut assignment = identity.clone();
        for (c, perm) in classes.iter().zip(&perms) {
            for (i, &k) in perm.iter().enumerate() {
                assignment.insert(c[i], c[k]);
            }
        }
        tried += 1;
        let mut terms = TermValues::default();
        for (j, src) in &assignment {
            let c = match cache.get(&(*j, *src)) {
                Some(c) => *c,
                None => {
                    let c = component_loss(&step.pred[j], &step.gt[src], &step.clouds[j], opts)?;
                    cache.insert((*j, *src), c);
                    c
                }
            };
            terms.rot += c.rot;
            terms.trans += c.trans;
            terms.chamfer += c.chamfer;
            terms.pc += c.pc;
        }
        let n = assignment.len() as f64;
        let total = weights.rot * terms.rot / n
            + weights.trans * terms.trans / n
            + weights.chamfer * terms.chamfer / n
            + weights.pc * terms.pc / n;
        let key: Vec<PartId> = assignment.values().copied().collect();
        let better = match &best {
            None => true,
            Some((b, bk, _)) => total < *b || (total == *b && key < *bk),
        };
        if better {
            best = Some((total, key, assignment));
        }
        let mut advanced = false;
        for perm in perms.iter_mut().rev() {
            if next_permutation(perm) {
                advanced = true;
                break;
            }
        }
        if !advanced {
            break;
        }
    }
    let (_, _, assignment) = best.expect("at least the identity is tried");
    let loss = total_loss(&step.reassigned(&assignment), weights, opts)?;
    Ok(PermutationMin {
        loss,
        assignment,
        permutations_tried: tried,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Point3, Vector3};
    use std::f64::consts::PI;

    fn unit_point(id: u32) -> PointCloud {
        PointCloud::new(PartId(id), vec![Point3::new(1.0, 0.0, 0.0)])
    }

    fn step(
        pred: &[(u32, Pose)],
        gt: &[(u32, Pose)],
        classes: EquivalenceClasses,
    ) -> StepPrediction {
        StepPrediction::new(
            pred.iter().map(|(k, p)| (PartId(*k), *p)).collect(),
            gt.iter().map(|(k, p)| (PartId(*k), *p)).collect(),
            pred.iter()
                .map(|(k, _)| (PartId(*k), unit_point(*k)))
                .collect(),
            classes,
        )
        .unwrap()
    }

    #[test]
    fn antipodal_point() {
        let rz = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI);
        let l = pointcloud_mse_loss(&UnitQuaternion::identity(), &rz, &unit_point(0)).unwrap();
        assert!((l - 2.0).abs() < 1e-12);
    }

    #[test]
    fn perfect_prediction_is_zero() {
        let p = Pose::from_translation(1.0, 2.0, 3.0);
        let s = step(&[(0, p)], &[(0, p)], EquivalenceClasses::none());
        assert_eq!(
            total_loss(&s, &LossWeights::default(), LossOptions::default())
                .unwrap()
                .total,
            0.0
        );
    }

    #[test]
    fn repulsion_of_two_singletons() {
        let s = step(
            &[
                (0, Pose::identity()),
                (1, Pose::from_translation(1.0, 0.0, 0.0)),
            ],
            &[(0, Pose::identity()), (1, Pose::identity())],
            EquivalenceClasses::from_pairs([(PartId(0), PartId(1))]),
        );
        assert!((equiv_repulsion_loss(&s).unwrap() + 2.0).abs() < 1e-12);
    }

    #[test]
    fn swapped_prediction_is_recovered() {
        let a = Pose::from_translation(0.0, 0.0, 0.0);
        let b = Pose::from_axis_angle(Vector3::x(), 0.4, Vector3::new(0.5, 0.0, 0.0));
        let s = step(
            &[(3, b), (5, a)],
            &[(3, a), (5, b)],
            EquivalenceClasses::from_pairs([(PartId(3), PartId(5))]),
        );
        let w = LossWeights::default();
        let plain = total_loss(&s, &w, LossOptions::default()).unwrap().total;
        let best = permutation_min_loss(&s, &w, LossOptions::default(), 100).unwrap();
        assert!(best.loss.total < plain);
        assert_eq!(best.assignment[&PartId(3)], PartId(5));
        assert!((best.loss.total - w.equiv * best.loss.mean.equiv).abs() < 1e-12);
    }

    #[test]
    fn key_mismatch_and_bad_weights() {
        let mut pred = BTreeMap::new();
        pred.insert(PartId(0), Pose::identity());
        let gt = BTreeMap::new();
        let clouds = BTreeMap::new();
        assert!(matches!(
            StepPrediction::new(pred, gt, clouds, EquivalenceClasses::none()),
            Err(LossError::KeyMismatch)
        ));
        assert!(LossWeights::parse("1,1,1,20").is_err());
        assert!(LossWeights::parse("1,1,-1,20,0.1").is_err());
        assert_eq!(
            LossWeights::parse("1, 1,1,20,0.1").unwrap(),
            LossWeights::default()
        );
    }
}

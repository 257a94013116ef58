use std::collections::BTreeMap;

use super::Pose;

/// Transform taking manual-frame poses into the world frame, fixed by one
/// anchor part seen in both: `world = alignment ∘ manual`.
pub fn solve_frame_alignment(anchor_world: &Pose, anchor_manual: &Pose) -> Pose {
    anchor_world.compose(&anchor_manual.inverse())
}

pub fn map_targets_to_world<K: Ord + Clone>(
    alignment: &Pose,
    manual_targets: &BTreeMap<K, Pose>,
) -> BTreeMap<K, Pose> {
    manual_targets
        .iter()
        .map(|(k, p)| (k.clone(), alignment.compose(p)))
        .collect()
}

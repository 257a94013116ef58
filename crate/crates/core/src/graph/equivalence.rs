use std::collections::{BTreeMap, BTreeSet};

use super::PartId;

/// Partition of parts into interchangeable groups, obtained as the
/// transitive closure of equivalence pairs. Only groups with at least two
/// members are stored; every other part is its own class.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EquivalenceClasses {
    classes: Vec<BTreeSet<PartId>>,
    rep: BTreeMap<PartId, PartId>,
}

impl EquivalenceClasses {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (PartId, PartId)>) -> Self {
        let mut parent: BTreeMap<PartId, PartId> = BTreeMap::new();
        fn find(parent: &mut BTreeMap<PartId, PartId>, x: PartId) -> PartId {
            let mut r = x;
            while let Some(&p) = parent.get(&r) {
                if p == r {
                    break;
                }
                r = p;
            }
            // path compression
            let mut c = x;
            while c != r {
                let next = parent[&c];
                parent.insert(c, r);
                c = next;
            }
            r
        }
        for (a, b) in pairs {
            parent.entry(a).or_insert(a);
            parent.entry(b).or_insert(b);
            let ra = find(&mut parent, a);
            let rb = find(&mut parent, b);
            if ra != rb {
                let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
                parent.insert(hi, lo);
            }
        }
        let keys: Vec<PartId> = parent.keys().copied().collect();
        let mut groups: BTreeMap<PartId, BTreeSet<PartId>> = BTreeMap::new();
        for k in keys {
            let r = find(&mut parent, k);
            groups.entry(r).or_default().insert(k);
        }
        Self::from_classes(groups.into_values())
    }

    /// Builds from explicit groups. Overlapping groups are merged.
    pub fn from_classes(groups: impl IntoIterator<Item = BTreeSet<PartId>>) -> Self {
        let mut pairs = Vec::new();
        let mut singles = Vec::new();
        for g in groups {
            let mut it = g.iter();
            if let Some(first) = it.next() {
                singles.push(*first);
                for other in it {
                    pairs.push((*first, *other));
                }
            }
        }
        // merging needs union-find only when groups overlap
        let mut seen: BTreeMap<PartId, usize> = BTreeMap::new();
        let mut classes: Vec<BTreeSet<PartId>> = Vec::new();
        let mut overlap = false;
        for (a, b) in &pairs {
            let ia = seen.get(a).copied();
            let ib = seen.get(b).copied();
            match (ia, ib) {
                (Some(i), None) => {
                    classes[i].insert(*b);
                    seen.insert(*b, i);
                }
                (None, Some(i)) => {
                    classes[i].insert(*a);
                    seen.insert(*a, i);
                }
                (None, None) => {
                    classes.push(BTreeSet::from([*a, *b]));
                    seen.insert(*a, classes.len() - 1);
                    seen.insert(*b, classes.len() - 1);
                }
                (Some(i), Some(j)) => {
                    if i != j {
                        overlap = true;
                    }
                }
            }
        }
        if overlap {
            return Self::from_pairs(pairs);
        }
        let _ = singles;
        classes.retain(|c| c.len() >= 2);
        classes.sort_by_key(|c| *c.iter().next().expect("non-empty"));
        let mut rep = BTreeMap::new();
        for c in &classes {
            let r = *c.iter().next().expect("non-empty");
            for p in c {
                rep.insert(*p, r);
            }
        }
        Self { classes, rep }
    }

    /// Non-trivial classes, ordered by smallest member.
    pub fn classes(&self) -> &[BTreeSet<PartId>] {
        &self.classes
    }

    pub fn is_trivial(&self) -> bool {
        self.classes.is_empty()
    }

    /// Smallest member of the class containing `p`.
    pub fn representative(&self, p: PartId) -> PartId {
        self.rep.get(&p).copied().unwrap_or(p)
    }

    pub fn same_class(&self, a: PartId, b: PartId) -> bool {
        self.representative(a) == self.representative(b)
    }

    pub fn class_of(&self, p: PartId) -> Option<&BTreeSet<PartId>> {
        let r = self.rep.get(&p)?;
        self.classes.iter().find(|c| c.contains(r))
    }

    /// Every unordered pair of distinct equivalent parts.
    pub fn pairs(&self) -> Vec<(PartId, PartId)> {
        let mut out = Vec::new();
        for c in &self.classes {
            let v: Vec<PartId> = c.iter().copied().collect();
            for i in 0..v.len() {
                for j in i + 1..v.len() {
                    out.push((v[i], v[j]));
                }
            }
        }
        out
    }

    /// Number of within-class relabelings, `Π |class|!`, saturating.
    pub fn permutation_count(&self) -> u128 {
        self.classes.iter().fold(1u128, |acc, c| {
            let f = (1..=c.len() as u128).fold(1u128, |a, k| a.saturating_mul(k));
            acc.saturating_mul(f)
        })
    }

    /// Keeps only members in `parts`, dropping classes that become trivial.
    pub fn restricted_to(&self, parts: &BTreeSet<PartId>) -> Self {
        Self::from_classes(
            self.classes
                .iter()
                .map(|c| c.intersection(parts).copied().collect::<BTreeSet<_>>()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(v: u32) -> PartId {
        PartId(v)
    }

    #[test]
    fn transitive_closure() {
        let eq = EquivalenceClasses::from_pairs([(p(3), p(1)), (p(1), p(2)), (p(7), p(8))]);
        assert_eq!(eq.classes().len(), 2);
        assert_eq!(eq.classes()[0], BTreeSet::from([p(1), p(2), p(3)]));
        assert_eq!(eq.representative(p(3)), p(1));
        assert_eq!(eq.representative(p(5)), p(5));
        assert!(eq.same_class(p(2), p(3)));
        assert_eq!(eq.pairs().len(), 4);
        assert_eq!(eq.permutation_count(), 12);
    }

    #[test]
    fn overlapping_groups_merge() {
        let eq = EquivalenceClasses::from_classes([
            BTreeSet::from([p(1), p(2)]),
            BTreeSet::from([p(2), p(3)]),
            BTreeSet::from([p(9)]),
        ]);
        assert_eq!(eq.classes(), &[BTreeSet::from([p(1), p(2), p(3)])]);
    }

    #[test]
    fn restriction_drops_trivial_classes() {
        let eq = EquivalenceClasses::from_pairs([(p(1), p(2)), (p(3), p(4))]);
        let r = eq.restricted_to(&BTreeSet::from([p(1), p(3), p(4)]));
        assert_eq!(r.classes(), &[BTreeSet::from([p(3), p(4)])]);
    }
}

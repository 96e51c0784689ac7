use fixedbitset::FixedBitSet;
use serde::{Serialize, Serializer};

/// A set of row ids, `p(D)` for some predicate `p`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selection {
    bits: FixedBitSet,
    count: usize,
}

impl Selection {
    pub fn empty(universe: usize) -> Selection {
        Selection {
            bits: FixedBitSet::with_capacity(universe),
            count: 0,
        }
    }

    pub fn all(universe: usize) -> Selection {
        let mut bits = FixedBitSet::with_capacity(universe);
        bits.insert_range(..);
        Selection { bits, count: universe }
    }

    pub fn from_rows(universe: usize, rows: impl IntoIterator<Item = usize>) -> Selection {
        let mut bits = FixedBitSet::with_capacity(universe);
        for r in rows {
            bits.insert(r);
        }
        Self::from_bits(bits)
    }

    pub(crate) fn from_bits(bits: FixedBitSet) -> Selection {
        let count = bits.count_ones(..);
        Selection { bits, count }
    }

    /// Number of rows in the underlying dataset.
    pub fn universe(&self) -> usize {
        self.bits.len()
    }

    pub fn len(&self) -> usize {
        self.count
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn contains(&self, row: usize) -> bool {
        self.bits.contains(row)
    }

    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.bits.ones()
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.rows().collect()
    }

    pub fn intersection(&self, other: &Selection) -> Selection {
        let mut bits = self.bits.clone();
        bits.intersect_with(&other.bits);
        Self::from_bits(bits)
    }

    pub fn union(&self, other: &Selection) -> Selection {
        let mut bits = self.bits.clone();
        bits.union_with(&other.bits);
        Self::from_bits(bits)
    }

    pub fn difference(&self, other: &Selection) -> Selection {
        let mut bits = self.bits.clone();
        bits.difference_with(&other.bits);
        Self::from_bits(bits)
    }

    pub fn complement(&self) -> Selection {
        let mut bits = self.bits.clone();
        bits.toggle_range(..);
        Self::from_bits(bits)
    }

    pub fn intersection_count(&self, other: &Selection) -> usize {
        self.bits.intersection_count(&other.bits)
    }

    pub fn intersects(&self, other: &Selection) -> bool {
        !self.bits.is_disjoint(&other.bits)
    }

    pub fn is_subset(&self, other: &Selection) -> bool {
        self.bits.is_subset(&other.bits)
    }
}

impl Serialize for Selection {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(self.rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn set_operations() {
        let a = Selection::from_rows(6, [0, 1, 2]);
        let b = Selection::from_rows(6, [2, 3]);
        assert_eq!(a.intersection(&b).to_vec(), vec![2]);
        assert_eq!(a.union(&b).to_vec(), vec![0, 1, 2, 3]);
        assert_eq!(a.difference(&b).to_vec(), vec![0, 1]);
        assert_eq!(a.complement().to_vec(), vec![3, 4, 5]);
        assert_eq!(a.complement().len(), 3);
        assert_eq!(a.intersection_count(&b), 1);
        assert!(a.intersects(&b));
        assert!(Selection::from_rows(6, [1]).is_subset(&a));
        assert_eq!(Selection::all(6).len(), 6);
        assert!(Selection::empty(6).is_empty());
    }
}

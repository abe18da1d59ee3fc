use std::fmt;

use ndarray::ArrayView1;

use crate::error::{Error, Result};

/// A sorted, duplicate-free set of 0-based indices into a length-`n` vector.
#[derive(Debug, Clone, PartialEq, Eq, Default, Hash)]
pub struct SupportSet {
    indices: Vec<usize>,
}

impl SupportSet {
    /// Build from arbitrary indices; sorts and rejects duplicates or indices `>= n`.
    pub fn new(mut indices: Vec<usize>, n: usize) -> Result<Self> {
        indices.sort_unstable();
        if indices.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::OutOfRange("duplicate support index".into()));
        }
        if let Some(&last) = indices.last() {
            if last >= n {
                return Err(Error::OutOfRange(format!(
                    "support index {last} outside [0, {n})"
                )));
            }
        }
        Ok(SupportSet { indices })
    }

    pub(crate) fn from_sorted(indices: Vec<usize>) -> Self {
        debug_assert!(indices.windows(2).all(|w| w[0] < w[1]));
        SupportSet { indices }
    }

    pub fn empty() -> Self {
        SupportSet::default()
    }

    /// Contiguous block `[start, start + len)`.
    pub fn block(start: usize, len: usize) -> Self {
        SupportSet {
            indices: (start..start + len).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn iter(&self) -> impl Iterator<Item = usize> + '_ {
        self.indices.iter().copied()
    }

    pub fn contains(&self, i: usize) -> bool {
        self.indices.binary_search(&i).is_ok()
    }

    pub fn intersection_len(&self, other: &SupportSet) -> usize {
        self.iter().filter(|&i| other.contains(i)).count()
    }

    /// `|self \ other|`.
    pub fn difference_len(&self, other: &SupportSet) -> usize {
        self.len() - self.intersection_len(other)
    }

    pub fn difference(&self, other: &SupportSet) -> SupportSet {
        SupportSet::from_sorted(self.iter().filter(|&i| !other.contains(i)).collect())
    }

    /// Remove one index, keeping the set sorted.
    pub fn without(&self, i: usize) -> SupportSet {
        SupportSet::from_sorted(self.iter().filter(|&j| j != i).collect())
    }
}

impl fmt::Display for SupportSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.indices.iter().map(|i| i.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

impl FromIterator<usize> for SupportSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut v: Vec<usize> = iter.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        SupportSet { indices: v }
    }
}

/// `{i : |x_i| >= ω}`.
pub fn thresh(x: ArrayView1<'_, f64>, omega: f64) -> SupportSet {
    SupportSet::from_sorted(
        x.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() >= omega)
            .map(|(i, _)| i)
            .collect(),
    )
}

/// Indices of the `k` largest-magnitude entries; lower index wins ties.
pub fn prune(x: ArrayView1<'_, f64>, k: usize) -> SupportSet {
    let mut order: Vec<usize> = (0..x.len()).collect();
    // Stable sort: equal magnitudes keep ascending index order.
    order.sort_by(|&i, &j| x[j].abs().total_cmp(&x[i].abs()));
    order.truncate(k.min(x.len()));
    order.sort_unstable();
    SupportSet::from_sorted(order)
}

/// Decide between plain and weighted ℓ1 from the two previous support estimates.
///
/// Weighted ℓ1 is used when at least half of `prev2` survived into `prev1`; the
/// weight on `prev1` is then the fraction of `prev1`-sized extras that dropped
/// out, `|prev2 \ prev1| / |prev1|`. Any zero denominator selects plain ℓ1.
pub fn support_overlap_policy(prev2: &SupportSet, prev1: &SupportSet) -> (bool, f64) {
    if prev2.is_empty() || prev1.is_empty() {
        return (false, 1.0);
    }
    let overlap = prev2.intersection_len(prev1) as f64 / prev2.len() as f64;
    if overlap < 0.5 {
        return (false, 1.0);
    }
    let lambda = prev2.difference_len(prev1) as f64 / prev1.len() as f64;
    (true, lambda.min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn set(v: &[usize]) -> SupportSet {
        v.iter().copied().collect()
    }

    #[test]
    fn thresh_examples() {
        let x = array![3.0, 0.5, -2.0];
        assert_eq!(thresh(x.view(), 1.0), set(&[0, 2]));
        assert_eq!(thresh(x.view(), 4.0), SupportSet::empty());
        assert_eq!(thresh(x.view(), 0.0), set(&[0, 1, 2]));
    }

    #[test]
    fn prune_examples() {
        assert_eq!(prune(array![3.0, -5.0, 1.0].view(), 2), set(&[0, 1]));
        assert_eq!(prune(array![3.0, -5.0, 1.0].view(), 0), SupportSet::empty());
        assert_eq!(prune(array![2.0, 2.0, 1.0].view(), 1), set(&[0]));
    }

    #[test]
    fn policy_examples() {
        assert_eq!(
            support_overlap_policy(&set(&[1, 2, 3, 4]), &set(&[1, 2, 3, 5])),
            (true, 0.25)
        );
        assert_eq!(support_overlap_policy(&SupportSet::empty(), &set(&[1])), (false, 1.0));
        assert_eq!(support_overlap_policy(&set(&[1, 2]), &set(&[3, 4])), (false, 1.0));
    }

    #[test]
    fn new_validates() {
        assert!(SupportSet::new(vec![2, 0], 3).is_ok());
        assert!(SupportSet::new(vec![1, 1], 3).is_err());
        assert!(SupportSet::new(vec![3], 3).is_err());
    }

    proptest! {
        #[test]
        fn prune_size(v in proptest::collection::vec(-10.0f64..10.0, 0..20), k in 0usize..30) {
            let x = ndarray::Array1::from(v.clone());
            let t = prune(x.view(), k);
            prop_assert_eq!(t.len(), k.min(v.len()));
            // Every kept magnitude dominates every dropped one.
            let min_kept = t.iter().map(|i| v[i].abs()).fold(f64::INFINITY, f64::min);
            for (i, e) in v.iter().enumerate() {
                if !t.contains(i) {
                    prop_assert!(e.abs() <= min_kept);
                }
            }
        }

        #[test]
        fn thresh_is_exact(v in proptest::collection::vec(-10.0f64..10.0, 0..20), w in 0.0f64..10.0) {
            let x = ndarray::Array1::from(v.clone());
            let t = thresh(x.view(), w);
            for (i, e) in v.iter().enumerate() {
                prop_assert_eq!(t.contains(i), e.abs() >= w);
            }
        }
    }
}

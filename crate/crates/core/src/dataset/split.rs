use rand::seq::SliceRandom;

use super::{Dataset, SplitTag};
use crate::error::{Error, Result};
use crate::seed;

/// Result of a stratified split: the part index of every sample plus the
/// sample indices of every part (ascending).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitAssignment {
    pub part_of: Vec<usize>,
    pub parts: Vec<Vec<usize>>,
}

/// Stratified random partition of `ds` into `fractions.len()` parts.
///
/// Each outcome class is shuffled under `seed` and cut into parts by the
/// largest-remainder rule, so every part keeps the class ratio to within one
/// sample per class.
pub fn split_dataset(ds: &Dataset, fractions: &[f64], seed: u64) -> Result<SplitAssignment> {
    split_labels(&ds.labels(), fractions, seed)
}

pub(crate) fn split_labels(labels: &[u8], fractions: &[f64], seed: u64) -> Result<SplitAssignment> {
    if fractions.is_empty() {
        return Err(Error::Precondition("no split fractions given".into()));
    }
    if fractions.iter().any(|f| !f.is_finite() || *f < 0.0) {
        return Err(Error::Precondition("split fractions must be non-negative".into()));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Precondition(format!(
            "split fractions sum to {total}, expected 1"
        )));
    }
    if let Some(k) = fractions.iter().position(|&f| f == 0.0) {
        return Err(Error::EmptyPart(k));
    }
    let k = fractions.len();
    let mut rng = seed::rng(seed);
    let mut part_of = vec![usize::MAX; labels.len()];
    for class in [0u8, 1u8] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(Error::ClassTooSmall {
                class,
                count: members.len(),
                parts: k,
            });
        }
        members.shuffle(&mut rng);
        let counts = allocate(members.len(), fractions);
        let mut start = 0;
        for (part, &c) in counts.iter().enumerate() {
            for &i in &members[start..start + c] {
                part_of[i] = part;
            }
            start += c;
        }
    }
    let mut parts = vec![Vec::new(); k];
    for (i, &p) in part_of.iter().enumerate() {
        parts[p].push(i);
    }
    if let Some(empty) = parts.iter().position(|p| p.is_empty()) {
        return Err(Error::EmptyPart(empty));
    }
    Ok(SplitAssignment { part_of, parts })
}

/// Largest-remainder apportionment of `n` items; ties go to the lower part.
fn allocate(n: usize, fractions: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = fractions.iter().map(|f| f * n as f64).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &part in order.iter().take(n.saturating_sub(assigned)) {
        counts[part] += 1;
    }
    counts
}

/// Tag every sample of `ds` with one of `tags` using [`split_dataset`].
pub fn assign_splits(ds: Dataset, tags: &[SplitTag], fractions: &[f64], seed: u64) -> Result<Dataset> {
    if tags.len() != fractions.len() {
        return Err(Error::ArityMismatch {
            expected: fractions.len(),
            got: tags.len(),
        });
    }
    let split = split_dataset(&ds, fractions, seed)?;
    let per_sample: Vec<SplitTag> = split.part_of.iter().map(|&p| tags[p]).collect();
    ds.with_splits(&per_sample)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn seventy_thirty_balanced() {
        let labels: Vec<u8> = (0..100).map(|i| (i % 2) as u8).collect();
        let s = split_labels(&labels, &[0.7, 0.3], 5).unwrap();
        assert_eq!(s.parts[0].len(), 70);
        assert_eq!(s.parts[1].len(), 30);
        let pos_train = s.parts[0].iter().filter(|&&i| labels[i] == 1).count();
        assert!((pos_train as i64 - 35).abs() <= 1);
        assert_eq!(s, split_labels(&labels, &[0.7, 0.3], 5).unwrap());
        assert_ne!(s, split_labels(&labels, &[0.7, 0.3], 6).unwrap());
    }

    #[test]
    fn empty_part_and_small_class_errors() {
        let labels = vec![0, 1, 0, 1];
        assert!(matches!(
            split_labels(&labels, &[1.0, 0.0], 1),
            Err(Error::EmptyPart(1))
        ));
        assert!(matches!(
            split_labels(&[0, 0, 0, 1], &[0.5, 0.5], 1),
            Err(Error::ClassTooSmall { class: 1, .. })
        ));
        assert!(split_labels(&labels, &[0.5, 0.4], 1).is_err());
    }

    proptest! {
        #[test]
        fn parts_are_disjoint_and_exhaustive(
            labels in proptest::collection::vec(0u8..2, 6..120),
            seed in any::<u64>(),
            a in 0.2f64..0.8,
        ) {
            let fr = [a, 1.0 - a];
            prop_assume!(labels.iter().filter(|&&y| y == 1).count() >= 2);
            prop_assume!(labels.iter().filter(|&&y| y == 0).count() >= 2);
            if let Ok(s) = split_labels(&labels, &fr, seed) {
                let mut all: Vec<usize> = s.parts.concat();
                all.sort();
                prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                prop_assert_eq!(s.parts[0].len() + s.parts[1].len(), labels.len());
            }
        }
    }
}

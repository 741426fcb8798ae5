use rand::seq::SliceRandom;

use super::MixedDataset;
use crate::{rng, Error, Result};

/// Train / validation / test folds and the source row indices of each.
#[derive(Debug, Clone)]
pub struct Split {
    pub train: MixedDataset,
    pub val: MixedDataset,
    pub test: MixedDataset,
    /// Source indices of each fold, ascending.
    pub indices: [Vec<usize>; 3],
}

/// Largest-remainder apportionment of `n` items over `ratios`.
/// Equal remainders go to the earlier fold.
pub fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let quotas: Vec<f64> = ratios.iter().map(|r| n as f64 * r).collect();
    let mut counts: Vec<usize> = quotas.iter().map(|q| (q + 1e-9).floor() as usize).collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    order.sort_by(|&a, &b| {
        let ra = quotas[a] - counts[a] as f64;
        let rb = quotas[b] - counts[b] as f64;
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    for &f in order.iter().take(n.saturating_sub(assigned)) {
        counts[f] += 1;
    }
    counts
}

/// Stratified split into three folds.
///
/// Each class is shuffled with its own stream of `seed` and cut according to
/// [`apportion`], so per-fold class counts do not depend on the seed.
pub fn stratified_split(dataset: &MixedDataset, ratios: [f64; 3], seed: u64) -> Result<Split> {
    if ratios.iter().any(|r| !(*r >= 0.0)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!("split ratios {ratios:?} must be >= 0 and sum to 1")));
    }
    let mut folds: [Vec<usize>; 3] = Default::default();
    for (stream, label) in [(0u64, false), (1u64, true)] {
        let mut idx = dataset.indices_with_label(label);
        let name = if label { "minority" } else { "majority" };
        if idx.len() < 3 {
            return Err(Error::TooFewRows(format!(
                "{name} class has {} rows, at least 3 are needed to fill every fold",
                idx.len()
            )));
        }
        let counts = apportion(idx.len(), &ratios);
        if counts.iter().zip(&ratios).any(|(&c, &r)| r > 0.0 && c == 0) {
            return Err(Error::TooFewRows(format!(
                "{name} class with {} rows cannot occupy all folds (counts {counts:?})",
                idx.len()
            )));
        }
        idx.shuffle(&mut rng::stream(seed, stream));
        let mut start = 0;
        for (f, &c) in counts.iter().enumerate() {
            folds[f].extend_from_slice(&idx[start..start + c]);
            start += c;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(Split {
        train: dataset.select(&folds[0]),
        val: dataset.select(&folds[1]),
        test: dataset.select(&folds[2]),
        indices: folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{ColumnSpec, TabularSchema};
    use ndarray::Array2;
    use std::sync::Arc;

    fn dataset(n: usize, minority: usize) -> MixedDataset {
        let schema = TabularSchema::new(
            vec![ColumnSpec::continuous("a"), ColumnSpec::categorical("y", ["0", "1"])],
            "y",
            "1",
        )
        .unwrap();
        let cont = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let labels = (0..n).map(|i| i % (n / minority) == 0 && i / (n / minority) < minority).collect();
        MixedDataset::new(Arc::new(schema), cont, Array2::zeros((n, 0)), labels).unwrap()
    }

    fn class_counts(d: &MixedDataset) -> (usize, usize) {
        (d.minority_count(), d.majority_count())
    }

    #[test]
    fn exact_proportions() {
        let d = dataset(100, 10);
        assert_eq!(d.minority_count(), 10);
        let s = stratified_split(&d, [0.6, 0.2, 0.2], 1).unwrap();
        assert_eq!(class_counts(&s.train), (6, 54));
        assert_eq!(class_counts(&s.val), (2, 18));
        assert_eq!(class_counts(&s.test), (2, 18));
    }

    #[test]
    fn deterministic_and_exhaustive() {
        let d = dataset(100, 10);
        let a = stratified_split(&d, [0.6, 0.2, 0.2], 5).unwrap();
        let b = stratified_split(&d, [0.6, 0.2, 0.2], 5).unwrap();
        assert_eq!(a.indices, b.indices);
        let mut all: Vec<usize> = a.indices.iter().flatten().copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn seeds_change_membership_not_counts() {
        let d = dataset(100, 10);
        let base = stratified_split(&d, [0.6, 0.2, 0.2], 0).unwrap();
        let mut distinct = 0;
        for seed in 1..=20 {
            let s = stratified_split(&d, [0.6, 0.2, 0.2], seed).unwrap();
            assert_eq!(class_counts(&s.train), class_counts(&base.train));
            assert_eq!(class_counts(&s.val), class_counts(&base.val));
            assert_eq!(class_counts(&s.test), class_counts(&base.test));
            if s.indices != base.indices {
                distinct += 1;
            }
        }
        assert_eq!(distinct, 20);
    }

    #[test]
    fn largest_remainder() {
        assert_eq!(apportion(10, &[0.6, 0.2, 0.2]), vec![6, 2, 2]);
        assert_eq!(apportion(7, &[0.6, 0.2, 0.2]), vec![4, 2, 1]);
        assert_eq!(apportion(3, &[0.6, 0.2, 0.2]), vec![2, 1, 0]);
        assert_eq!(apportion(4, &[0.6, 0.2, 0.2]), vec![2, 1, 1]);
        assert_eq!(apportion(5, &[0.6, 0.2, 0.2]), vec![3, 1, 1]);
    }

    #[test]
    fn tiny_classes_are_rejected() {
        assert!(stratified_split(&dataset(100, 2), [0.6, 0.2, 0.2], 0).is_err());
        // 3 rows: 90/5/5 -> [3, 0, 0], two folds would be empty
        assert!(stratified_split(&dataset(100, 3), [0.9, 0.05, 0.05], 0).is_err());
        assert!(stratified_split(&dataset(100, 4), [0.6, 0.2, 0.2], 0).is_ok());
        assert!(stratified_split(&dataset(100, 10), [0.5, 0.2, 0.2], 0).is_err());
    }
}

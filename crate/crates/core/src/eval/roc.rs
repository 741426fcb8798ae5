use crate::{Error, Result};

/// Area under the ROC curve: the probability that a random positive scores
/// above a random negative, ties counted one half.
///
/// Computed with the rank-sum formula using average ranks for ties.
pub fn roc_auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!("{} scores for {} labels", scores.len(), labels.len())));
    }
    if let Some(s) = scores.iter().find(|s| s.is_nan()) {
        return Err(Error::InvalidArgument(format!("score {s} is not a number")));
    }
    let n_pos = labels.iter().filter(|&&l| l).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument("ROC-AUC needs both classes".into()));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // twice the rank sum of positives, so tied groups stay integral
    let mut rank_sum2: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j share the average (i + 1 + j) / 2
        let positives = order[i..j].iter().filter(|&&k| labels[k]).count() as u128;
        rank_sum2 += positives * (i + 1 + j) as u128;
        i = j;
    }
    let (p, n) = (n_pos as u128, n_neg as u128);
    // U = R - p(p+1)/2, everything doubled
    let u2 = rank_sum2 - p * (p + 1);
    Ok(u2 as f64 / (2 * p * n) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn examples() {
        assert_eq!(roc_auc(&[0.1, 0.2, 0.8, 0.9], &[false, false, true, true]).unwrap(), 1.0);
        assert_eq!(roc_auc(&[0.5; 4], &[false, true, false, true]).unwrap(), 0.5);
        assert_eq!(roc_auc(&[0.1, 0.4, 0.35, 0.8], &[false, false, true, true]).unwrap(), 0.75);
        assert!(roc_auc(&[0.1, 0.2], &[true, true]).is_err());
        assert!(roc_auc(&[0.1], &[true, false]).is_err());
    }
}

use std::cmp::Ordering;

use super::{GroupedPredictions, MetricError};

/// ROC AUC via the Mann-Whitney rank sum, ties counted as one half.
pub fn auc(gp: &GroupedPredictions) -> Result<f64, MetricError> {
    let scores = gp.scores();
    let labels = gp.labels();
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(MetricError::SingleClass);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap_or(Ordering::Equal));

    // Twice the rank sum of positives, with midranks for ties; stays integral.
    let mut twice_rank_sum: u128 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1, midrank = (i + j + 2) / 2
        let twice_midrank = (i + j + 2) as u128;
        let positives = order[i..=j].iter().filter(|&&k| labels[k]).count() as u128;
        twice_rank_sum += positives * twice_midrank;
        i = j + 1;
    }
    let n_pos = n_pos as u128;
    let twice_u = twice_rank_sum - n_pos * (n_pos + 1);
    Ok(twice_u as f64 / (2 * n_pos * n_neg as u128) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gp(score: &[f64], y: &[u8]) -> GroupedPredictions {
        let n = score.len();
        GroupedPredictions::new(score.to_vec(), y.iter().map(|&v| v == 1).collect(), vec![false; n]).unwrap()
    }

    #[test]
    fn separating_scores() {
        assert_eq!(auc(&gp(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1])).unwrap(), 1.0);
        assert_eq!(auc(&gp(&[0.9, 0.8, 0.2, 0.1], &[0, 0, 1, 1])).unwrap(), 0.0);
    }

    #[test]
    fn four_point_example() {
        // pairs (pos, neg): (0.35,0.1) (0.35,0.4) (0.8,0.1) (0.8,0.4) -> 3 of 4 concordant
        assert_eq!(auc(&gp(&[0.1, 0.4, 0.35, 0.8], &[0, 0, 1, 1])).unwrap(), 0.75);
    }

    #[test]
    fn ties_count_half() {
        assert_eq!(auc(&gp(&[0.5, 0.5], &[0, 1])).unwrap(), 0.5);
        assert_eq!(auc(&gp(&[0.5, 0.5, 0.7], &[0, 1, 1])).unwrap(), 0.75);
    }

    #[test]
    fn single_class() {
        assert_eq!(auc(&gp(&[0.1, 0.3], &[1, 1])), Err(MetricError::SingleClass));
    }
}

//! Fairness and accuracy metrics over `(score, label, group)` triples.
//!
//! Group `false` is white (0), group `true` is black (1). All reductions are
//! integer counts divided once, so results do not depend on summation order.

mod auc;
mod calibration;
mod gaps;

pub use auc::auc;
pub use calibration::{calibration_table, CalibrationBin, CalibrationTable};
pub use gaps::{accuracy, binarize, error_rate_gaps, group_rates, high_risk_gap, GroupRates};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("length mismatch: {scores} scores, {labels} labels, {groups} groups")]
    LengthMismatch { scores: usize, labels: usize, groups: usize },

    #[error("score {0} outside [0, 1]")]
    ScoreOutOfRange(f64),

    #[error("threshold {0} outside [0, 1]")]
    InvalidThreshold(f64),

    #[error("group {0} has no rows")]
    EmptyGroup(u8),

    #[error("group {group} has no {needed} rows; rate undefined")]
    UndefinedRate { group: u8, needed: &'static str },

    #[error("need both positive and negative labels")]
    SingleClass,

    #[error("need at least two bins, got {0}")]
    InvalidBinCount(usize),

    #[error("no predictions")]
    Empty,

    #[error("decile {0} outside 1-10")]
    InvalidDecile(u8),
}

/// Scores with their true labels and group memberships.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupedPredictions {
    score: Vec<f64>,
    y_true: Vec<bool>,
    group: Vec<bool>,
}

impl GroupedPredictions {
    pub fn new(score: Vec<f64>, y_true: Vec<bool>, group: Vec<bool>) -> Result<Self, MetricError> {
        if score.len() != y_true.len() || score.len() != group.len() {
            return Err(MetricError::LengthMismatch { scores: score.len(), labels: y_true.len(), groups: group.len() });
        }
        if let Some(&bad) = score.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(MetricError::ScoreOutOfRange(bad));
        }
        Ok(GroupedPredictions { score, y_true, group })
    }

    /// COMPAS deciles mapped onto `[0, 1]` via `(d - 1) / 9`.
    pub fn from_deciles(deciles: &[u8], y_true: Vec<bool>, group: Vec<bool>) -> Result<Self, MetricError> {
        let score = deciles
            .iter()
            .map(|&d| if (1..=10).contains(&d) { Ok(decile_score(d)) } else { Err(MetricError::InvalidDecile(d)) })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(score, y_true, group)
    }

    pub fn len(&self) -> usize {
        self.score.len()
    }

    pub fn is_empty(&self) -> bool {
        self.score.is_empty()
    }

    pub fn scores(&self) -> &[f64] {
        &self.score
    }

    pub fn labels(&self) -> &[bool] {
        &self.y_true
    }

    pub fn groups(&self) -> &[bool] {
        &self.group
    }

    /// Same predictions with the two groups swapped.
    pub fn swap_groups(&self) -> Self {
        GroupedPredictions { group: self.group.iter().map(|g| !g).collect(), ..self.clone() }
    }
}

pub fn decile_score(d: u8) -> f64 {
    (d as f64 - 1.0) / 9.0
}

/// Score threshold equivalent to "decile >= `min_decile`" under [`decile_score`].
pub fn decile_threshold(min_decile: u8) -> f64 {
    decile_score(min_decile)
}

/// Every metric for one model at one threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub high_risk_gap: f64,
    pub fp_gap: f64,
    pub fn_gap: f64,
    pub auc: f64,
    pub accuracy: f64,
    pub threshold: f64,
    pub groups: [GroupRates; 2],
    pub calibration: CalibrationTable,
}

impl FairnessReport {
    pub fn evaluate(gp: &GroupedPredictions, threshold: f64, n_bins: usize) -> Result<Self, MetricError> {
        let (fp_gap, fn_gap) = error_rate_gaps(gp, threshold)?;
        Ok(FairnessReport {
            high_risk_gap: high_risk_gap(gp, threshold)?,
            fp_gap,
            fn_gap,
            auc: auc(gp)?,
            accuracy: accuracy(gp, threshold)?,
            threshold,
            groups: group_rates(gp, threshold)?,
            calibration: calibration_table(gp, n_bins)?,
        })
    }

    /// Largest of the two error-rate gaps.
    pub fn max_error_gap(&self) -> f64 {
        self.fp_gap.max(self.fn_gap)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(
            GroupedPredictions::new(vec![0.1], vec![true, false], vec![true]),
            Err(MetricError::LengthMismatch { .. })
        ));
        assert_eq!(
            GroupedPredictions::new(vec![1.2], vec![true], vec![true]),
            Err(MetricError::ScoreOutOfRange(1.2))
        );
        assert_eq!(
            GroupedPredictions::from_deciles(&[0], vec![true], vec![true]),
            Err(MetricError::InvalidDecile(0))
        );
    }

    #[test]
    fn decile_mapping() {
        assert_eq!(decile_score(1), 0.0);
        assert_eq!(decile_score(10), 1.0);
        let t = decile_threshold(5);
        assert!(decile_score(5) >= t && decile_score(4) < t);
    }
}

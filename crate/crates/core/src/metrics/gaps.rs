use serde::{Deserialize, Serialize};

use super::{GroupedPredictions, MetricError};

/// `score >= threshold` is high risk; ties go to high risk.
pub fn binarize(scores: &[f64], threshold: f64) -> Result<Vec<bool>, MetricError> {
    check_threshold(threshold)?;
    if let Some(&bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(MetricError::ScoreOutOfRange(bad));
    }
    Ok(scores.iter().map(|&s| s >= threshold).collect())
}

fn check_threshold(threshold: f64) -> Result<(), MetricError> {
    if (0.0..=1.0).contains(&threshold) {
        Ok(())
    } else {
        Err(MetricError::InvalidThreshold(threshold))
    }
}

/// Confusion counts for one group.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
struct Counts {
    tp: usize,
    fp: usize,
    tn: usize,
    fn_: usize,
}

impl Counts {
    fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

fn confusion(gp: &GroupedPredictions, threshold: f64) -> Result<[Counts; 2], MetricError> {
    check_threshold(threshold)?;
    let mut c = [Counts::default(); 2];
    for ((&s, &y), &g) in gp.scores().iter().zip(gp.labels()).zip(gp.groups()) {
        let slot = &mut c[g as usize];
        match (s >= threshold, y) {
            (true, true) => slot.tp += 1,
            (true, false) => slot.fp += 1,
            (false, false) => slot.tn += 1,
            (false, true) => slot.fn_ += 1,
        }
    }
    Ok(c)
}

/// Per-group rates at a threshold; a rate is `None` when its denominator is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupRates {
    pub count: usize,
    pub high_risk_rate: Option<f64>,
    pub fp_rate: Option<f64>,
    pub fn_rate: Option<f64>,
    pub base_rate: Option<f64>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn group_rates(gp: &GroupedPredictions, threshold: f64) -> Result<[GroupRates; 2], MetricError> {
    let c = confusion(gp, threshold)?;
    Ok(c.map(|c| GroupRates {
        count: c.total(),
        high_risk_rate: ratio(c.tp + c.fp, c.total()),
        fp_rate: ratio(c.fp, c.fp + c.tn),
        fn_rate: ratio(c.fn_, c.fn_ + c.tp),
        base_rate: ratio(c.tp + c.fn_, c.total()),
    }))
}

/// `|P(high risk | group 0) - P(high risk | group 1)|`.
pub fn high_risk_gap(gp: &GroupedPredictions, threshold: f64) -> Result<f64, MetricError> {
    let c = confusion(gp, threshold)?;
    let mut rates = [0.0; 2];
    for (g, c) in c.iter().enumerate() {
        rates[g] = ratio(c.tp + c.fp, c.total()).ok_or(MetricError::EmptyGroup(g as u8))?;
    }
    Ok((rates[0] - rates[1]).abs())
}

/// `(FP gap, FN gap)` as absolute differences of per-group rates.
pub fn error_rate_gaps(gp: &GroupedPredictions, threshold: f64) -> Result<(f64, f64), MetricError> {
    let c = confusion(gp, threshold)?;
    let mut fpr = [0.0; 2];
    let mut fnr = [0.0; 2];
    for (g, c) in c.iter().enumerate() {
        fpr[g] = ratio(c.fp, c.fp + c.tn).ok_or(MetricError::UndefinedRate { group: g as u8, needed: "negative" })?;
        fnr[g] = ratio(c.fn_, c.fn_ + c.tp).ok_or(MetricError::UndefinedRate { group: g as u8, needed: "positive" })?;
    }
    Ok(((fpr[0] - fpr[1]).abs(), (fnr[0] - fnr[1]).abs()))
}

pub fn accuracy(gp: &GroupedPredictions, threshold: f64) -> Result<f64, MetricError> {
    if gp.is_empty() {
        return Err(MetricError::Empty);
    }
    let c = confusion(gp, threshold)?;
    let correct: usize = c.iter().map(|c| c.tp + c.tn).sum();
    Ok(correct as f64 / gp.len() as f64)
}

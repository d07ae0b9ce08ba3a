use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{GroupedPredictions, MetricError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationBin {
    pub bin_low: f64,
    pub bin_high: f64,
    pub group: u8,
    pub count: usize,
    pub positives: usize,
    /// Empirical `P(Y = 1 | score in bin, group)`; `None` for empty bins.
    pub rate: Option<f64>,
}

/// Equal-width bins over `[0, 1]`, one entry per `(bin, group)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub n_bins: usize,
    /// Ordered by bin, then group.
    pub bins: Vec<CalibrationBin>,
}

impl CalibrationTable {
    pub fn entry(&self, bin: usize, group: u8) -> &CalibrationBin {
        &self.bins[bin * 2 + group as usize]
    }

    /// Largest between-group rate difference over bins where both groups
    /// have at least `min_count` rows. `None` if no bin qualifies.
    pub fn max_group_difference(&self, min_count: usize) -> Option<f64> {
        (0..self.n_bins)
            .filter_map(|b| {
                let (w, k) = (self.entry(b, 0), self.entry(b, 1));
                if w.count >= min_count && k.count >= min_count {
                    Some((w.rate? - k.rate?).abs())
                } else {
                    None
                }
            })
            .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))))
    }

    /// `bin_low,bin_high,group,count,rate`; empty rates are blank.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "bin_low,bin_high,group,count,rate")?;
        for b in &self.bins {
            let rate = b.rate.map(|r| format!("{r:.4}")).unwrap_or_default();
            writeln!(w, "{:.4},{:.4},{},{},{}", b.bin_low, b.bin_high, b.group, b.count, rate)?;
        }
        Ok(())
    }
}

fn bin_index(score: f64, n_bins: usize) -> usize {
    ((score * n_bins as f64).floor() as usize).min(n_bins - 1)
}

pub fn calibration_table(gp: &GroupedPredictions, n_bins: usize) -> Result<CalibrationTable, MetricError> {
    if n_bins < 2 {
        return Err(MetricError::InvalidBinCount(n_bins));
    }
    let mut counts = vec![[0usize; 2]; n_bins];
    let mut positives = vec![[0usize; 2]; n_bins];
    for ((&s, &y), &g) in gp.scores().iter().zip(gp.labels()).zip(gp.groups()) {
        let b = bin_index(s, n_bins);
        counts[b][g as usize] += 1;
        if y {
            positives[b][g as usize] += 1;
        }
    }
    let width = 1.0 / n_bins as f64;
    let mut bins = Vec::with_capacity(n_bins * 2);
    for b in 0..n_bins {
        for g in 0..2 {
            let count = counts[b][g];
            bins.push(CalibrationBin {
                bin_low: b as f64 * width,
                bin_high: if b + 1 == n_bins { 1.0 } else { (b + 1) as f64 * width },
                group: g as u8,
                count,
                positives: positives[b][g],
                rate: (count > 0).then(|| positives[b][g] as f64 / count as f64),
            });
        }
    }
    Ok(CalibrationTable { n_bins, bins })
}

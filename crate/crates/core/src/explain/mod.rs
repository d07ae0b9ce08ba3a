//! Permutation feature importance and one-at-a-time record ablation.

use std::io::Write;

use ndarray::{Array2, Axis};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset, RawRecord, Scaler};
use crate::metrics::{auc, GroupedPredictions, MetricError};
use crate::train::{TrainError, TrainedPair};

#[derive(Debug, Error)]
pub enum ExplainError {
    #[error("test set is empty")]
    EmptyTest,

    #[error("repeats must be at least 1")]
    InvalidRepeats,

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Train(#[from] TrainError),
}

impl From<DataError> for ExplainError {
    fn from(e: DataError) -> Self {
        ExplainError::SchemaMismatch(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean AUC drop when the column is shuffled.
    pub importance: f64,
    pub std: f64,
}

/// Sorted by importance, largest first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceReport {
    pub baseline_auc: f64,
    pub repeats: usize,
    pub seed: u64,
    pub features: Vec<FeatureImportance>,
}

impl ImportanceReport {
    /// Fraction of total absolute importance held by the top `k` features.
    pub fn top_share(&self, k: usize) -> f64 {
        let total: f64 = self.features.iter().map(|f| f.importance.abs()).sum();
        if total == 0.0 {
            return 0.0;
        }
        let mut abs: Vec<f64> = self.features.iter().map(|f| f.importance.abs()).collect();
        abs.sort_by(|a, b| b.total_cmp(a));
        abs.iter().take(k).sum::<f64>() / total
    }

    pub fn get(&self, feature: &str) -> Option<&FeatureImportance> {
        self.features.iter().find(|f| f.feature == feature)
    }

    pub fn rank_of(&self, feature: &str) -> Option<usize> {
        self.features.iter().position(|f| f.feature == feature)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "feature,importance,std")?;
        for f in &self.features {
            writeln!(w, "{},{:.4},{:.4}", f.feature, f.importance, f.std)?;
        }
        Ok(())
    }
}

fn auc_of(pair: &TrainedPair, x: &Array2<f64>, test: &Dataset) -> Result<f64, ExplainError> {
    let probs = pair.predict(x.view())?;
    Ok(auc(&GroupedPredictions::new(probs, test.labels(), test.groups())?)?)
}

/// Mean drop in test AUC when each feature column is shuffled.
///
/// Repeat `r` draws its permutations from its own stream of the master
/// seed, so repeats run in parallel without changing the result.
pub fn permutation_importance(
    pair: &TrainedPair,
    test: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<ImportanceReport, ExplainError> {
    if test.n_rows() == 0 {
        return Err(ExplainError::EmptyTest);
    }
    if repeats == 0 {
        return Err(ExplainError::InvalidRepeats);
    }
    let names = test.column_names();
    if names.len() != test.n_features() {
        return Err(ExplainError::SchemaMismatch("column names do not match feature matrix".to_string()));
    }
    let baseline_auc = auc_of(pair, &test.x, test)?;

    let drops: Vec<Vec<f64>> = (0..repeats)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut out = Vec::with_capacity(names.len());
            for j in 0..test.n_features() {
                let mut perm: Vec<usize> = (0..test.n_rows()).collect();
                perm.shuffle(&mut rng);
                let mut x = test.x.clone();
                let shuffled = test.x.column(j).select(Axis(0), &perm);
                x.column_mut(j).assign(&shuffled);
                out.push(baseline_auc - auc_of(pair, &x, test)?);
            }
            Ok(out)
        })
        .collect::<Result<_, ExplainError>>()?;

    let n = repeats as f64;
    let mut features: Vec<FeatureImportance> = names
        .into_iter()
        .enumerate()
        .map(|(j, feature)| {
            let mean = drops.iter().map(|d| d[j]).sum::<f64>() / n;
            let var = if repeats > 1 {
                drops.iter().map(|d| (d[j] - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            FeatureImportance { feature, importance: mean, std: var.sqrt() }
        })
        .collect();
    features.sort_by(|a, b| b.importance.total_cmp(&a.importance).then_with(|| a.feature.cmp(&b.feature)));
    Ok(ImportanceReport { baseline_auc, repeats, seed, features })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureDelta {
    pub feature: String,
    /// Value in model units (standardized for continuous columns).
    pub value: f64,
    /// Score minus the score with this column set to its training mean.
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecordExplanation {
    pub score: f64,
    pub deltas: Vec<FeatureDelta>,
}

/// Scores an encoded, standardized row and ablates each column to its
/// training mean in turn.
pub fn explain_row(pair: &TrainedPair, row: &[f64], scaler: &Scaler) -> Result<RecordExplanation, ExplainError> {
    let width = scaler.width();
    if row.len() != width || pair.predictor.input_dim() != width {
        return Err(ExplainError::SchemaMismatch(format!(
            "row has {} values, scaler {width}, model {}",
            row.len(),
            pair.predictor.input_dim()
        )));
    }
    // row 0 is the record itself, row j+1 has column j replaced by its mean
    let mut batch = Array2::zeros((width + 1, width));
    for mut r in batch.outer_iter_mut() {
        r.assign(&ndarray::ArrayView1::from(row));
    }
    for j in 0..width {
        batch[[j + 1, j]] = scaler.transformed_mean(j);
    }
    let scores = pair.predict(batch.view())?;
    let score = scores[0];
    let deltas = scaler
        .columns
        .iter()
        .enumerate()
        .map(|(j, c)| FeatureDelta { feature: c.name.clone(), value: row[j], delta: score - scores[j + 1] })
        .collect();
    Ok(RecordExplanation { score, deltas })
}

pub fn explain_record(pair: &TrainedPair, record: &RawRecord, scaler: &Scaler) -> Result<RecordExplanation, ExplainError> {
    let row = scaler.transform_record(record)?;
    explain_row(pair, &row, scaler)
}

/// The two inmates discussed in the case study, reconstructed from the
/// attributes the text gives (sex and charge degree are not stated).
pub fn case_study_records() -> Vec<(&'static str, RawRecord)> {
    let base = |age, race: &str, priors, decile| RawRecord {
        age,
        sex: "Male".to_string(),
        race: race.to_string(),
        priors_count: priors,
        charge_degree: "F".to_string(),
        juv_fel_count: 0,
        juv_misd_count: 0,
        juv_other_count: 0,
        jail_in: None,
        jail_out: None,
        recid_label: 0,
        compas_decile: Some(decile),
    };
    vec![
        ("Joe", RawRecord { recid_label: 0, ..base(55, "African-American", 1, 8) }),
        ("Bob", RawRecord { recid_label: 1, ..base(27, "Caucasian", 13, 5) }),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{encode_dataset, standardize_features, FeatureSchema};
    use crate::train::{train, TrainConfig};
    use rand::Rng;

    fn records(n: usize, seed: u64) -> Vec<RawRecord> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| {
                let priors: u32 = rng.gen_range(0..15);
                let age: u32 = rng.gen_range(18..70);
                let p = crate::nn::sigmoid(0.3 * priors as f64 - 0.05 * (age as f64 - 35.0) - 1.0);
                RawRecord {
                    age,
                    sex: if rng.gen_bool(0.8) { "Male" } else { "Female" }.to_string(),
                    race: if rng.gen_bool(0.6) { "African-American" } else { "Caucasian" }.to_string(),
                    priors_count: priors,
                    charge_degree: if rng.gen_bool(0.6) { "F" } else { "M" }.to_string(),
                    juv_fel_count: rng.gen_range(0..2),
                    juv_misd_count: rng.gen_range(0..2),
                    juv_other_count: rng.gen_range(0..2),
                    jail_in: None,
                    jail_out: None,
                    recid_label: u8::from(rng.gen::<f64>() < p),
                    compas_decile: Some(rng.gen_range(1..=10)),
                }
            })
            .collect()
    }

    fn fitted() -> (TrainedPair, Dataset, Scaler) {
        let schema = FeatureSchema::default();
        let tr = encode_dataset(&records(400, 1), &schema).unwrap();
        let te = encode_dataset(&records(200, 2), &schema).unwrap();
        let (tr, te, scaler) = standardize_features(&tr, &te).unwrap();
        let cfg = TrainConfig {
            mode: "baseline".into(),
            alpha: 0.0,
            lr: 3e-3,
            epochs: 15,
            batch_size: 32,
            predictor_hidden: vec![16],
            ..TrainConfig::default()
        };
        (train(&tr, &te, &cfg).unwrap(), te, scaler)
    }

    #[test]
    fn ignored_feature_has_no_importance() {
        let (mut pair, te, _) = fitted();
        let j = te.column_names().iter().position(|n| n == "juv_other_count").unwrap();
        pair.predictor.layers_mut()[0].weights.row_mut(j).fill(0.0);
        let rep = permutation_importance(&pair, &te, 3, 5).unwrap();
        assert!(rep.get("juv_other_count").unwrap().importance.abs() <= 1e-3);
        assert_eq!(rep.features.len(), 10);
        assert!(rep.features.iter().all(|f| f.std >= 0.0));
        // priors drive the synthetic label
        assert_eq!(rep.rank_of("priors_count"), Some(0));
    }

    #[test]
    fn importance_is_deterministic() {
        let (pair, te, _) = fitted();
        assert_eq!(permutation_importance(&pair, &te, 4, 9).unwrap(), permutation_importance(&pair, &te, 4, 9).unwrap());
        assert!(matches!(permutation_importance(&pair, &te, 0, 9), Err(ExplainError::InvalidRepeats)));
        let empty = te.select(&[]);
        assert!(matches!(permutation_importance(&pair, &empty, 1, 9), Err(ExplainError::EmptyTest)));
    }

    #[test]
    fn mean_record_has_zero_deltas() {
        let (pair, _, scaler) = fitted();
        let row: Vec<f64> = (0..scaler.width()).map(|j| scaler.transformed_mean(j)).collect();
        let e = explain_row(&pair, &row, &scaler).unwrap();
        assert!(e.deltas.iter().all(|d| d.delta == 0.0));
        assert!(e.score > 0.0 && e.score < 1.0);
    }

    #[test]
    fn record_explanation_and_ordering() {
        let (pair, _, scaler) = fitted();
        let cases = case_study_records();
        let joe = explain_record(&pair, &cases[0].1, &scaler).unwrap();
        let bob = explain_record(&pair, &cases[1].1, &scaler).unwrap();
        assert!(bob.score > joe.score);
        assert_eq!(joe.deltas.len(), 10);
        let priors = bob.deltas.iter().find(|d| d.feature == "priors_count").unwrap();
        assert!(priors.delta > 0.0);
    }

    #[test]
    fn malformed_record() {
        let (pair, _, scaler) = fitted();
        let mut rec = case_study_records()[0].1.clone();
        rec.sex = "Unknown".into();
        assert!(matches!(explain_record(&pair, &rec, &scaler), Err(ExplainError::SchemaMismatch(_))));
        assert!(matches!(explain_row(&pair, &[0.0; 3], &scaler), Err(ExplainError::SchemaMismatch(_))));
    }

    #[test]
    fn top_share() {
        let rep = ImportanceReport {
            baseline_auc: 0.7,
            repeats: 1,
            seed: 0,
            features: [0.4, 0.3, 0.2, 0.1]
                .iter()
                .enumerate()
                .map(|(i, &v)| FeatureImportance { feature: format!("f{i}"), importance: v, std: 0.0 })
                .collect(),
        };
        assert!((rep.top_share(3) - 0.9).abs() < 1e-12);
    }
}

//! End-to-end orchestration: ingest, train, evaluate, compare, sweep and
//! explain, plus on-disk layout of training artifacts.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{
    encode_dataset, load_records, split_dataset, standardize_features, DataError, Dataset, FeatureSchema,
    IngestReport, RecordFilter, Scaler, SplitSpec,
};
use crate::explain::ExplainError;
use crate::metrics::{decile_threshold, FairnessReport, GroupedPredictions, MetricError};
use crate::nn::{NetworkCheckpoint, NnError};
use crate::report::{DatasetFingerprint, ReportError};
use crate::train::{train, EpochRecord, TrainConfig, TrainError, TrainedPair};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Data(#[from] DataError),

    #[error(transparent)]
    Train(#[from] TrainError),

    #[error(transparent)]
    Metric(#[from] MetricError),

    #[error(transparent)]
    Explain(#[from] ExplainError),

    #[error(transparent)]
    Report(#[from] ReportError),

    #[error("checkpoint: {0}")]
    Checkpoint(#[from] NnError),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Every setting that influences results.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub data: PathBuf,
    pub filter: RecordFilter,
    pub split: SplitSpec,
    /// Fraction of the training split used for fitting; the rest validates.
    pub fit_fraction: f64,
    pub train: TrainConfig,
    pub compas_high_risk_decile: u8,
    pub bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            data: PathBuf::from("data/compas-scores-two-years.csv"),
            filter: RecordFilter::default(),
            split: SplitSpec::default(),
            fit_fraction: 0.8,
            train: TrainConfig::default(),
            compas_high_risk_decile: 5,
            bins: 10,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), PipelineError> {
        let bad = |m: String| Err(PipelineError::Config(m));
        if !(self.split.train_fraction > 0.0 && self.split.train_fraction < 1.0) {
            return bad(format!("split fraction {} must lie in (0, 1)", self.split.train_fraction));
        }
        if !(self.fit_fraction > 0.0 && self.fit_fraction < 1.0) {
            return bad(format!("fit fraction {} must lie in (0, 1)", self.fit_fraction));
        }
        if !(1..=10).contains(&self.compas_high_risk_decile) {
            return bad(format!("COMPAS high-risk decile {} outside 1-10", self.compas_high_risk_decile));
        }
        if self.bins < 2 {
            return bad(format!("need at least 2 calibration bins, got {}", self.bins));
        }
        self.train.validate().map_err(|e| PipelineError::Config(e.to_string()))
    }

    /// Flat `flag -> value` view, used for manifests.
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let t = &self.train;
        let list = |v: &[usize]| v.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(",");
        let mut m = BTreeMap::new();
        let mut put = |k: &str, v: String| {
            m.insert(k.to_string(), v);
        };
        put("data", self.data.display().to_string());
        put("recid-column", self.filter.recid_column.clone());
        put("races", self.filter.races.join(","));
        put("charge-degrees", self.filter.charge_degrees.join(","));
        put("screening-window", self.filter.screening_window_days.map(|d| d.to_string()).unwrap_or_default());
        put("max-parse-errors", self.filter.max_parse_errors.to_string());
        put("split-fraction", self.split.train_fraction.to_string());
        put("split-seed", self.split.seed.to_string());
        put("fit-fraction", self.fit_fraction.to_string());
        put("mode", t.mode.clone());
        put("alpha", t.alpha.to_string());
        put("lr", t.lr.to_string());
        put("adversary-lr", t.adversary_lr.map(|v| v.to_string()).unwrap_or_default());
        put("batch", t.batch_size.to_string());
        put("epochs", t.epochs.to_string());
        put("seed", t.seed.to_string());
        put("predictor-hidden", list(&t.predictor_hidden));
        put("adversary-hidden", list(&t.adversary_hidden));
        put("threshold", t.threshold.to_string());
        put("gap-limit", t.gap_limit.to_string());
        put("compas-high-risk-decile", self.compas_high_risk_decile.to_string());
        put("bins", self.bins.to_string());
        m
    }
}

/// Encoded data, split and standardized.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub ingest: IngestReport,
    /// Encoded rows before splitting or scaling.
    pub encoded: Dataset,
    /// Whole training split, standardized.
    pub train: Dataset,
    pub fit: Dataset,
    pub valid: Dataset,
    pub test: Dataset,
    pub scaler: Scaler,
}

impl Prepared {
    pub fn fingerprint(&self, source: &Path) -> DatasetFingerprint {
        DatasetFingerprint {
            source: source.display().to_string(),
            rows_read: self.ingest.rows_read,
            rows_kept: self.ingest.rows_kept,
            train_rows: self.train.n_rows(),
            test_rows: self.test.n_rows(),
            checksum: self.encoded.checksum(),
        }
    }
}

pub fn prepare(cfg: &RunConfig) -> Result<Prepared, PipelineError> {
    let (records, ingest) = load_records(&cfg.data, &cfg.filter)?;
    let schema = FeatureSchema {
        group_levels: group_levels(&cfg.filter)?,
        ..FeatureSchema::default()
    };
    let encoded = encode_dataset(&records, &schema)?;
    let (train_raw, test_raw) = split_dataset(&encoded, &cfg.split)?;
    let (train, test, scaler) = standardize_features(&train_raw, &test_raw)?;
    let fit_spec = SplitSpec { train_fraction: cfg.fit_fraction, seed: cfg.split.seed.wrapping_add(1) };
    let (fit, valid) = split_dataset(&train, &fit_spec)?;
    Ok(Prepared { ingest, encoded, train, fit, valid, test, scaler })
}

fn group_levels(filter: &RecordFilter) -> Result<[String; 2], PipelineError> {
    match filter.races.as_slice() {
        [white, black] => Ok([white.clone(), black.clone()]),
        other => Err(PipelineError::Config(format!("exactly two races required, got {other:?}"))),
    }
}

/// COMPAS deciles on `ds`, binarized at `decile >= high_risk_decile`.
///
/// Rows without a decile are skipped.
pub fn compas_report(ds: &Dataset, high_risk_decile: u8, bins: usize) -> Result<FairnessReport, PipelineError> {
    let mut deciles = Vec::new();
    let mut y = Vec::new();
    let mut g = Vec::new();
    for i in 0..ds.n_rows() {
        if let Some(d) = ds.compas_decile[i] {
            deciles.push(d);
            y.push(ds.y[i] == 1);
            g.push(ds.d[i] == 1);
        }
    }
    let gp = GroupedPredictions::from_deciles(&deciles, y, g)?;
    Ok(FairnessReport::evaluate(&gp, decile_threshold(high_risk_decile), bins)?)
}

pub fn model_predictions(pair: &TrainedPair, ds: &Dataset) -> Result<GroupedPredictions, PipelineError> {
    let probs = pair.predict(ds.x.view())?;
    Ok(GroupedPredictions::new(probs, ds.labels(), ds.groups())?)
}

pub fn model_report(pair: &TrainedPair, ds: &Dataset, threshold: f64, bins: usize) -> Result<FairnessReport, PipelineError> {
    Ok(FairnessReport::evaluate(&model_predictions(pair, ds)?, threshold, bins)?)
}

pub fn train_model(prepared: &Prepared, cfg: &TrainConfig) -> Result<TrainedPair, PipelineError> {
    Ok(train(&prepared.fit, &prepared.valid, cfg)?)
}

/// Trains one model per seed in parallel; results keep seed order.
pub fn train_seeds(prepared: &Prepared, cfg: &TrainConfig, seeds: &[u64]) -> Vec<Result<TrainedPair, PipelineError>> {
    seeds
        .par_iter()
        .map(|&seed| train_model(prepared, &TrainConfig { seed, ..cfg.clone() }))
        .collect()
}

pub const PREDICTOR_FILE: &str = "predictor.json";
pub const ADVERSARY_FILE: &str = "adversary.json";
pub const HISTORY_FILE: &str = "history.json";
pub const SCALER_FILE: &str = "scaler.json";
pub const RUN_CONFIG_FILE: &str = "run_config.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct HistoryFile {
    mode: String,
    selected_epoch: usize,
    epochs: Vec<EpochRecord>,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), PipelineError> {
    let text = serde_json::to_string_pretty(value).map_err(ReportError::from)?;
    fs::write(path, text + "\n").map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, PipelineError> {
    let text = fs::read_to_string(path).map_err(|source| PipelineError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| PipelineError::Report(ReportError::from(e)))
}

pub fn ensure_dir(dir: &Path) -> Result<(), PipelineError> {
    fs::create_dir_all(dir).map_err(|source| PipelineError::Io { path: dir.to_path_buf(), source })
}

/// Writes checkpoints, history, scaler and run config; returns the paths written.
pub fn save_trained(dir: &Path, pair: &TrainedPair, scaler: &Scaler, cfg: &RunConfig) -> Result<Vec<PathBuf>, PipelineError> {
    ensure_dir(dir)?;
    let config = serde_json::to_value(&pair.config).map_err(ReportError::from)?;
    let mut written = Vec::new();

    let path = dir.join(PREDICTOR_FILE);
    NetworkCheckpoint::from_net(&pair.predictor, "predictor", pair.config.seed, config.clone()).save(&path)?;
    written.push(path);
    if let Some(adv) = &pair.adversary {
        let path = dir.join(ADVERSARY_FILE);
        NetworkCheckpoint::from_net(adv, "adversary", pair.config.seed, config).save(&path)?;
        written.push(path);
    }
    let history = HistoryFile { mode: pair.mode.clone(), selected_epoch: pair.selected_epoch, epochs: pair.history.clone() };
    for (name, value) in [
        (HISTORY_FILE, serde_json::to_value(&history)),
        (SCALER_FILE, serde_json::to_value(scaler)),
        (RUN_CONFIG_FILE, serde_json::to_value(cfg)),
    ] {
        let path = dir.join(name);
        write_json(&path, &value.map_err(ReportError::from)?)?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_trained(dir: &Path) -> Result<(TrainedPair, Scaler, RunConfig), PipelineError> {
    let pred_ck = NetworkCheckpoint::load(&dir.join(PREDICTOR_FILE))?;
    let predictor = pred_ck.to_net()?;
    let config: TrainConfig = serde_json::from_value(pred_ck.config.clone()).map_err(ReportError::from)?;
    let adv_path = dir.join(ADVERSARY_FILE);
    let adversary = if adv_path.exists() { Some(NetworkCheckpoint::load(&adv_path)?.to_net()?) } else { None };
    let history: HistoryFile = read_json(&dir.join(HISTORY_FILE))?;
    let scaler: Scaler = read_json(&dir.join(SCALER_FILE))?;
    let run: RunConfig = read_json(&dir.join(RUN_CONFIG_FILE))?;
    if scaler.width() != predictor.input_dim() {
        return Err(PipelineError::Checkpoint(NnError::Format(format!(
            "scaler has {} columns, predictor expects {}",
            scaler.width(),
            predictor.input_dim()
        ))));
    }
    let pair = TrainedPair {
        mode: history.mode,
        predictor,
        adversary,
        history: history.epochs,
        selected_epoch: history.selected_epoch,
        config,
    };
    Ok((pair, scaler, run))
}

/// Grid over predictor depth, width and alpha.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub layers: Vec<usize>,
    pub units: Vec<usize>,
    pub alphas: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid { layers: vec![1, 2, 3], units: vec![32, 64, 128, 256], alphas: vec![0.0, 0.1, 0.5, 1.0, 2.0] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub layers: usize,
    pub units: usize,
    pub alpha: f64,
    pub auc: f64,
    pub accuracy: f64,
    pub high_risk_gap: f64,
    pub fp_gap: f64,
    pub fn_gap: f64,
    pub selected_epoch: usize,
}

/// Trains every grid cell in parallel and scores it on the test split.
pub fn sweep(prepared: &Prepared, base: &TrainConfig, grid: &SweepGrid, bins: usize) -> Result<Vec<SweepCell>, PipelineError> {
    let cells: Vec<(usize, usize, f64)> = grid
        .layers
        .iter()
        .flat_map(|&l| grid.units.iter().flat_map(move |&u| grid.alphas.iter().map(move |&a| (l, u, a))))
        .collect();
    if cells.is_empty() {
        return Err(PipelineError::Config("empty sweep grid".to_string()));
    }
    cells
        .par_iter()
        .map(|&(layers, units, alpha)| {
            let cfg = TrainConfig { alpha, predictor_hidden: vec![units; layers], ..base.clone() };
            let pair = train_model(prepared, &cfg)?;
            let r = model_report(&pair, &prepared.test, cfg.threshold, bins)?;
            Ok(SweepCell {
                layers,
                units,
                alpha,
                auc: r.auc,
                accuracy: r.accuracy,
                high_risk_gap: r.high_risk_gap,
                fp_gap: r.fp_gap,
                fn_gap: r.fn_gap,
                selected_epoch: pair.selected_epoch,
            })
        })
        .collect()
}

pub fn sweep_csv(cells: &[SweepCell]) -> String {
    let mut out = String::from("layers,units,alpha,auc,accuracy,high_risk_gap,fp_gap,fn_gap,selected_epoch\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4},{}\n",
            c.layers, c.units, c.alpha, c.auc, c.accuracy, c.high_risk_gap, c.fp_gap, c.fn_gap, c.selected_epoch
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_map_covers_flags() {
        let m = RunConfig::default().to_map();
        for key in [
            "data",
            "recid-column",
            "mode",
            "alpha",
            "lr",
            "batch",
            "epochs",
            "seed",
            "split-fraction",
            "threshold",
            "compas-high-risk-decile",
            "bins",
        ] {
            assert!(m.contains_key(key), "{key}");
        }
    }

    #[test]
    fn validate_rejects_bad_values() {
        let mut cfg = RunConfig::default();
        cfg.compas_high_risk_decile = 11;
        assert!(matches!(cfg.validate(), Err(PipelineError::Config(_))));
        let mut cfg = RunConfig::default();
        cfg.split.train_fraction = 1.0;
        assert!(cfg.validate().is_err());
        assert!(RunConfig::default().validate().is_ok());
    }

    #[test]
    fn race_list_must_have_two_entries() {
        let filter = RecordFilter { races: vec!["Caucasian".into()], ..RecordFilter::default() };
        assert!(matches!(group_levels(&filter), Err(PipelineError::Config(_))));
    }
}

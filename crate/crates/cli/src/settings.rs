//! Layering of defaults, config file and command-line flags.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use advfair::pipeline::{RunConfig, SweepGrid};
use advfair::report::{parse_config, ConfigFile};

use crate::exit::Failure;

/// Keys that map onto [`RunConfig`].
const RUN_KEYS: &[&str] = &[
    "data",
    "recid-column",
    "races",
    "charge-degrees",
    "screening-window",
    "max-parse-errors",
    "split-fraction",
    "split-seed",
    "fit-fraction",
    "mode",
    "alpha",
    "lr",
    "adversary-lr",
    "batch",
    "epochs",
    "seed",
    "predictor-hidden",
    "adversary-hidden",
    "threshold",
    "gap-limit",
    "compas-high-risk-decile",
    "bins",
];

/// Keys consumed by individual subcommands.
const COMMAND_KEYS: &[&str] = &[
    "out",
    "model",
    "format",
    "baseline",
    "adversarial",
    "layers",
    "units",
    "alphas",
    "repeats",
    "record",
    "case",
];

/// Effective settings: config file entries overlaid with command-line flags.
#[derive(Debug, Clone, Default)]
pub struct Settings {
    entries: ConfigFile,
}

impl Settings {
    pub fn load(config: Option<&Path>, flags: Vec<(&'static str, Option<String>)>) -> Result<Self, Failure> {
        let mut entries = match config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| Failure::config(format!("cannot read config file {}: {e}", path.display())))?;
                parse_config(&text).map_err(|e| Failure::config(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        if let Some(bad) = entries.keys().find(|k| !RUN_KEYS.contains(k) && !COMMAND_KEYS.contains(k)) {
            return Err(Failure::config(format!("unknown config key {bad:?}")));
        }
        for (key, value) in flags {
            if let Some(v) = value {
                entries.insert(key, &v);
            }
        }
        Ok(Settings { entries })
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).filter(|v| !v.is_empty())
    }

    pub fn parse<T: FromStr>(&self, key: &str) -> Result<Option<T>, Failure>
    where
        T::Err: std::fmt::Display,
    {
        match self.get(key) {
            None => Ok(None),
            Some(_) => self.entries.parse(key).map_err(Failure::config),
        }
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(PathBuf::from)
    }

    /// Subcommand settings that were given, for the manifest. The output
    /// directory is left out so a run's identity does not depend on where
    /// it was written.
    pub fn command_entries(&self) -> Vec<(String, String)> {
        COMMAND_KEYS
            .iter()
            .filter(|k| **k != "out")
            .filter_map(|k| self.get(k).map(|v| (k.to_string(), v.to_string())))
            .collect()
    }

    pub fn out_dir(&self) -> PathBuf {
        self.path("out").unwrap_or_else(|| PathBuf::from("advfair-out"))
    }

    /// Applies every run-affecting key present onto `rc`.
    pub fn apply(&self, rc: &mut RunConfig) -> Result<(), Failure> {
        if let Some(v) = self.path("data") {
            rc.data = v;
        }
        if let Some(v) = self.get("recid-column") {
            rc.filter.recid_column = v.to_string();
        }
        if let Some(v) = self.get("races") {
            rc.filter.races = split_list(v);
        }
        if let Some(v) = self.get("charge-degrees") {
            rc.filter.charge_degrees = split_list(v);
        }
        if let Some(v) = self.parse("screening-window")? {
            rc.filter.screening_window_days = Some(v);
        }
        if let Some(v) = self.parse("max-parse-errors")? {
            rc.filter.max_parse_errors = v;
        }
        if let Some(v) = self.parse("split-fraction")? {
            rc.split.train_fraction = v;
        }
        if let Some(v) = self.parse("split-seed")? {
            rc.split.seed = v;
        }
        if let Some(v) = self.parse("fit-fraction")? {
            rc.fit_fraction = v;
        }
        let t = &mut rc.train;
        if let Some(v) = self.get("mode") {
            t.mode = v.to_string();
        }
        if let Some(v) = self.parse("alpha")? {
            t.alpha = v;
        }
        if let Some(v) = self.parse("lr")? {
            t.lr = v;
        }
        if let Some(v) = self.parse("adversary-lr")? {
            t.adversary_lr = Some(v);
        }
        if let Some(v) = self.parse("batch")? {
            t.batch_size = v;
        }
        if let Some(v) = self.parse("epochs")? {
            t.epochs = v;
        }
        if let Some(v) = self.parse("seed")? {
            t.seed = v;
        }
        if let Some(v) = self.get("predictor-hidden") {
            t.predictor_hidden = parse_list("predictor-hidden", v)?;
        }
        if let Some(v) = self.get("adversary-hidden") {
            t.adversary_hidden = parse_list("adversary-hidden", v)?;
        }
        if let Some(v) = self.parse("threshold")? {
            t.threshold = v;
        }
        if let Some(v) = self.parse("gap-limit")? {
            t.gap_limit = v;
        }
        if let Some(v) = self.parse("compas-high-risk-decile")? {
            rc.compas_high_risk_decile = v;
        }
        if let Some(v) = self.parse("bins")? {
            rc.bins = v;
        }
        rc.validate()?;
        Ok(())
    }

    pub fn sweep_grid(&self) -> Result<SweepGrid, Failure> {
        let mut grid = SweepGrid::default();
        if let Some(v) = self.get("layers") {
            grid.layers = parse_list("layers", v)?;
        }
        if let Some(v) = self.get("units") {
            grid.units = parse_list("units", v)?;
        }
        if let Some(v) = self.get("alphas") {
            grid.alphas = parse_list("alphas", v)?;
        }
        if grid.layers.contains(&0) || grid.units.contains(&0) {
            return Err(Failure::config("sweep layers and units must be positive"));
        }
        if grid.alphas.iter().any(|a| !a.is_finite() || *a < 0.0) {
            return Err(Failure::config("sweep alphas must be finite and >= 0"));
        }
        Ok(grid)
    }
}

fn split_list(v: &str) -> Vec<String> {
    v.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}

pub fn parse_list<T: FromStr>(key: &str, v: &str) -> Result<Vec<T>, Failure>
where
    T::Err: std::fmt::Display,
{
    split_list(v)
        .iter()
        .map(|s| s.parse::<T>().map_err(|e| Failure::config(format!("{key}: {s:?}: {e}"))))
        .collect()
}

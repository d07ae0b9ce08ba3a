use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReportError;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetFingerprint {
    pub source: String,
    pub rows_read: usize,
    pub rows_kept: usize,
    pub train_rows: usize,
    pub test_rows: usize,
    pub checksum: String,
}

/// Everything needed to reproduce a run's artifacts.
///
/// `id` hashes the command, config and dataset fingerprint only, so it is
/// stable across re-runs; `created_at` is informational.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub id: String,
    pub command: String,
    pub config: BTreeMap<String, String>,
    pub dataset: DatasetFingerprint,
    pub seed: u64,
    pub version: String,
    pub created_at: String,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: BTreeMap<String, String>, dataset: DatasetFingerprint, seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        for (k, v) in &config {
            h.update(k.as_bytes());
            h.update([0]);
            h.update(v.as_bytes());
            h.update([0]);
        }
        h.update(dataset.checksum.as_bytes());
        let id: String = h.finalize().iter().take(8).map(|b| format!("{b:02x}")).collect();
        RunManifest {
            id,
            command: command.to_string(),
            config,
            dataset,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            created_at: created_at(),
            outputs: Vec::new(),
        }
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    pub fn save(&self, path: &Path) -> Result<(), ReportError> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text + "\n").map_err(|source| ReportError::Io { path: path.to_path_buf(), source })
    }
}

/// Wall-clock time, unless `SOURCE_DATE_EPOCH` pins it for reproducible builds.
fn created_at() -> String {
    let pinned = std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|s| s.trim().parse::<i64>().ok())
        .and_then(|secs| chrono::DateTime::from_timestamp(secs, 0));
    pinned.unwrap_or_else(chrono::Utc::now).to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

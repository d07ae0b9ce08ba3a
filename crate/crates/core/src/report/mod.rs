//! Report rendering, run manifests and key-value config files.

mod config;
mod manifest;
mod reference;
mod render;

pub use config::{parse_config, ConfigFile};
pub use manifest::{DatasetFingerprint, RunManifest};
pub use reference::{ReferenceRow, REPORTED_ROWS};
pub use render::{emit_report, render_json, render_text, render_csv, NamedReport, ReportFormat};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("unknown report format {0:?} (json, text, csv)")]
    UnknownFormat(String),
}

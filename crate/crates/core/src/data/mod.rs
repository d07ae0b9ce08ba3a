//! Loading, encoding, splitting and standardizing criminal-records data.

mod encode;
mod records;
mod scale;
mod split;

pub use encode::{encode_dataset, encode_record, ColumnKind, Dataset, FeatureField, FeatureSchema};
pub use records::{load_records, IngestReport, RawRecord, RecordFilter, RowError};
pub use scale::{standardize_features, ColumnScale, Scaler};
pub use split::{split_dataset, split_indices, SplitSpec};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("input not found: {0}")]
    InputNotFound(PathBuf),

    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("{count} rows failed to parse (limit {limit}); first at line {first_line}: {first_message}")]
    TooManyParseErrors {
        count: usize,
        limit: usize,
        first_line: u64,
        first_message: String,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("no records to encode")]
    EmptyInput,

    #[error("unknown category {value:?} for field {field}")]
    UnknownCategory { field: &'static str, value: String },

    #[error("degenerate split: {train} train rows, {test} test rows")]
    DegenerateSplit { train: usize, test: usize },

    #[error("invalid split fraction {0}")]
    InvalidFraction(f64),

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
}

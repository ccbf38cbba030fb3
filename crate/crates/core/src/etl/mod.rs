//! Extraction, declarative mapping and loading of raw source files.
//!
//! Reading, mapping, unit conversion and synonym lookup are pure and run per
//! source; [`run_pipeline`] is the only part that touches the store.

mod mapping;
mod pipeline;
mod source;
mod synonym;
mod units;

use std::fmt;

use thiserror::Error;

pub use mapping::{
    apply_mapping, compile_mapping, load_mapping, Binding, CompiledMapping, MappingError,
    MappingSpec, Transform,
};
pub use pipeline::{
    read_reject_ledger, reject_ledger_bytes, run_pipeline, write_reject_ledger, LoadReport, PipelineSource, TableLoad,
};
pub use source::{read_source, RawRow, SourceDescriptor, SourceFormat, SourceItem, SourceRows};
pub use synonym::{normalize_synonym, SynonymRegistry, SynonymTable, CROPS};
pub use units::{convert_unit, is_known_unit, scale_exponent, UnitError};

use crate::store::StoreError;

#[derive(Debug, Error)]
pub enum EtlError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("mapping for {source_name}: {error}")]
    Mapping {
        source_name: String,
        error: MappingError,
    },
    #[error(transparent)]
    Store(#[from] StoreError),
}

/// Why a source row was excluded from the load.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum ReasonCode {
    TypeError,
    UnitError,
    MissingRequired,
    SynonymMiss,
    RangeError,
}

impl ReasonCode {
    pub const ALL: [ReasonCode; 5] = [
        ReasonCode::TypeError,
        ReasonCode::UnitError,
        ReasonCode::MissingRequired,
        ReasonCode::SynonymMiss,
        ReasonCode::RangeError,
    ];

    pub fn token(self) -> &'static str {
        match self {
            ReasonCode::TypeError => "type-error",
            ReasonCode::UnitError => "unit-error",
            ReasonCode::MissingRequired => "missing-required",
            ReasonCode::SynonymMiss => "synonym-miss",
            ReasonCode::RangeError => "range-error",
        }
    }

    pub fn from_token(token: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|r| r.token() == token)
    }
}

impl fmt::Display for ReasonCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.token())
    }
}

/// Binding name used for rejects that concern the whole row, such as a wrong
/// field count.
pub const WHOLE_ROW: &str = "*";

/// A source row excluded from the load, naming the first failing binding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RejectRecord {
    pub source: String,
    /// 1-based, header excluded.
    pub row: usize,
    pub binding: String,
    pub reason: ReasonCode,
    pub raw: String,
    /// Human-readable detail; not part of the ledger file.
    pub message: String,
}

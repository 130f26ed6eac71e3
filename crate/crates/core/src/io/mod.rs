//! Interchange formats and storage.

pub mod archive;
pub mod canonical;
pub mod responses;
pub mod store;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::model::StudyDefinition;

/// Version written into every study, report and archive document.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("malformed document: {0}")]
    MalformedDocument(String),
    #[error("unsupported schema_version {found} (this build reads {SCHEMA_VERSION})")]
    UnsupportedSchema { found: String },
    #[error("line {line}: malformed row: {message}")]
    MalformedRow { line: u64, message: String },
    #[error("line {line}: unknown id: {message}")]
    UnknownId { line: u64, message: String },
    #[error("line {line}: duplicate cell: {message}")]
    DuplicateCell { line: u64, message: String },
    #[error("line {line}: value out of range: {message}")]
    ValueOutOfRange { line: u64, message: String },
    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl IoError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MalformedDocument(_) => "MALFORMED_DOCUMENT",
            Self::UnsupportedSchema { .. } => "UNSUPPORTED_SCHEMA",
            Self::MalformedRow { .. } => "MALFORMED_ROW",
            Self::UnknownId { .. } => "UNKNOWN_ID",
            Self::DuplicateCell { .. } => "DUPLICATE_CELL",
            Self::ValueOutOfRange { .. } => "VALUE_OUT_OF_RANGE",
            Self::File { .. } => "IO_ERROR",
        }
    }

    /// Line number for row-level CSV errors.
    pub fn line(&self) -> Option<u64> {
        match self {
            Self::MalformedRow { line, .. }
            | Self::UnknownId { line, .. }
            | Self::DuplicateCell { line, .. }
            | Self::ValueOutOfRange { line, .. } => Some(*line),
            _ => None,
        }
    }

    pub(crate) fn file(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::File {
            path: path.display().to_string(),
            source,
        }
    }
}

/// Parse a versioned JSON document strictly: the version is checked before
/// the body, and unknown fields anywhere are errors.
pub fn parse_versioned<T: DeserializeOwned>(text: &str) -> Result<T, IoError> {
    let value: Value =
        serde_json::from_str(text).map_err(|e| IoError::MalformedDocument(e.to_string()))?;
    let version = value
        .get("schema_version")
        .ok_or_else(|| IoError::MalformedDocument("missing schema_version".into()))?;
    if version.as_u64() != Some(u64::from(SCHEMA_VERSION)) {
        return Err(IoError::UnsupportedSchema {
            found: version.to_string(),
        });
    }
    serde_json::from_value(value).map_err(|e| IoError::MalformedDocument(e.to_string()))
}

/// Canonical text of any serializable document.
pub fn to_document<T: Serialize + ?Sized>(value: &T) -> String {
    canonical::to_canonical_string(value).expect("in-memory documents serialize")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyDocument {
    pub schema_version: u32,
    pub study: StudyDefinition,
}

impl StudyDocument {
    pub fn new(study: StudyDefinition) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            study,
        }
    }
}

pub fn write_study(study: &StudyDefinition) -> String {
    to_document(&StudyDocument::new(study.clone()))
}

pub fn parse_study(text: &str) -> Result<StudyDefinition, IoError> {
    parse_versioned::<StudyDocument>(text).map(|d| d.study)
}

pub fn read_file(path: &std::path::Path) -> Result<String, IoError> {
    std::fs::read_to_string(path).map_err(|e| IoError::file(path, e))
}

pub fn write_file(path: &std::path::Path, contents: &str) -> Result<(), IoError> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| IoError::file(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| IoError::file(path, e))
}

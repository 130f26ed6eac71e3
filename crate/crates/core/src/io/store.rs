//! Append-only JSON Lines event store, one canonical event record per line.

use std::fs::{File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use super::{canonical, IoError};
use crate::delphi::EventRecord;

#[derive(Debug, Clone)]
pub struct EventStore {
    path: PathBuf,
}

impl EventStore {
    pub fn new(path: impl Into<PathBuf>) -> Self {
        Self { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn exists(&self) -> bool {
        self.path.exists()
    }

    /// Append records and flush them to disk.
    pub fn append(&self, records: &[EventRecord]) -> Result<(), IoError> {
        if records.is_empty() {
            return Ok(());
        }
        if let Some(parent) = self.path.parent().filter(|p| !p.as_os_str().is_empty()) {
            std::fs::create_dir_all(parent).map_err(|e| IoError::file(parent, e))?;
        }
        let mut buf = String::new();
        for r in records {
            buf.push_str(&canonical::to_canonical_line(r).expect("event records serialize"));
            buf.push('\n');
        }
        let mut file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&self.path)
            .map_err(|e| IoError::file(&self.path, e))?;
        file.write_all(buf.as_bytes())
            .and_then(|()| file.sync_data())
            .map_err(|e| IoError::file(&self.path, e))
    }

    pub fn load(&self) -> Result<Vec<EventRecord>, IoError> {
        let text = std::fs::read_to_string(&self.path).map_err(|e| IoError::file(&self.path, e))?;
        parse_lines(&text)
    }

    /// Replace the file contents with exactly `records`.
    pub fn rewrite(&self, records: &[EventRecord]) -> Result<(), IoError> {
        File::create(&self.path).map_err(|e| IoError::file(&self.path, e))?;
        self.append(records)
    }
}

pub fn parse_lines(text: &str) -> Result<Vec<EventRecord>, IoError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| IoError::MalformedRow {
                line: i as u64 + 1,
                message: e.to_string(),
            })
        })
        .collect()
}

pub fn to_lines(records: &[EventRecord]) -> String {
    records
        .iter()
        .map(|r| canonical::to_canonical_line(r).expect("event records serialize") + "\n")
        .collect()
}

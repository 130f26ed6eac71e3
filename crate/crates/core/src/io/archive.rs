//! The study archive: the event log plus the snapshots derived from it.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{parse_versioned, to_document, IoError};
use crate::clock::StepClock;
use crate::delphi::{
    AuditEntry, DelphiEngine, EngineError, EventRecord, FeedbackPacket, Round, Submission,
};
use crate::model::{Respondent, StudyDefinition};
use crate::report::AnalysisReport;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundSnapshot {
    pub round: Round,
    /// Effective submissions, one per respondent, ordered by respondent id.
    pub submissions: Vec<Submission>,
    pub history: Vec<AuditEntry>,
    pub feedback: Option<FeedbackPacket>,
    pub feedback_digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoredReport {
    /// Number of events the report was computed from.
    pub after_seq: u64,
    pub report: AnalysisReport,
}

/// Complete, replayable record of a study. Everything except `events` is
/// derived and is checked against a replay when loaded.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyArchive {
    pub schema_version: u32,
    pub study_id: String,
    pub study: StudyDefinition,
    pub roster: Vec<Respondent>,
    pub rounds: Vec<RoundSnapshot>,
    pub reports: Vec<StoredReport>,
    pub events: Vec<EventRecord>,
}

impl StudyArchive {
    pub fn to_document(&self) -> String {
        to_document(self)
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        parse_versioned(text)
    }

    /// Replay the events and confirm every derived artifact is reproduced.
    pub fn verify(&self) -> Result<DelphiEngine, EngineError> {
        DelphiEngine::from_archive(self, Arc::new(StepClock::fixed()))
    }
}

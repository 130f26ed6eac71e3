//! Delphi round lifecycle.
//!
//! Every mutation is recorded as an [`Event`] and applied through a single
//! `apply` path, so replaying a log re-validates and rebuilds exactly the same
//! state. Legal transitions are Draft→Open→Closed→Briefed; a round's next wave
//! (same kind) may only open once the previous wave has been briefed.

mod packet;
mod round;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::Arc;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) use packet::{alias_of, complete_weight_vectors, rating_matrix};
pub use packet::{FeedbackPacket, ScenarioSums};
pub use round::{
    round_id, round_items, Acknowledgment, AuditEntry, BriefingContext, CanonicalRating, PacketRef,
    Payload, RawPayload, RawRating, Round, RoundKind, RoundState, Submission,
};

use crate::aggregation::AggregationError;
use crate::clock::Clock;
use crate::io::archive::{RoundSnapshot, StoredReport, StudyArchive};
use crate::io::canonical;
use crate::model::{
    validate_roster, validate_study, Finding, Respondent, ScaleDef, StudyDefinition,
};
use crate::reliability::{ItemKey, StatsError};
use crate::report::{build_report, AnalysisReport};
use crate::scales::{check_raw_weights, remap_rating, ScaleError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Conflict,
    NotFound,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("study definition is invalid: {}", summarize(.0))]
    StudyInvalid(Vec<Finding>),
    #[error("roster is invalid: {}", summarize(.0))]
    RosterInvalid(Vec<Finding>),
    #[error("respondent {0} is already registered")]
    DuplicateRespondent(String),
    #[error("unknown respondent {0}")]
    UnknownRespondent(String),
    #[error("unknown round {0}")]
    UnknownRound(String),
    #[error("rating rounds require a scale")]
    ScaleRequired,
    #[error("weight elicitation rounds take no scale")]
    ScaleForbidden,
    #[error("scale {0} is malformed (min must be below max)")]
    InvalidScale(String),
    #[error("wave {got} of {kind} is out of sequence; next wave is {expected}")]
    WaveOutOfSequence {
        kind: RoundKind,
        expected: u32,
        got: u32,
    },
    #[error("wave {wave} of {kind} cannot open before wave {} is briefed", .wave - 1)]
    PredecessorNotBriefed { kind: RoundKind, wave: u32 },
    #[error("round {0} is not in draft")]
    RoundNotDraft(String),
    #[error("round {0} is not open")]
    RoundNotOpen(String),
    #[error("round {0} is not closed")]
    NotClosed(String),
    #[error("feedback for round {0} has never been retrieved")]
    FeedbackNeverRetrieved(String),
    #[error("round {0} has no feedback yet")]
    FeedbackUnavailable(String),
    #[error("round {0} has no complete submissions")]
    NoSubmissions(String),
    #[error("no submission from {respondent} in round {round}")]
    NoSubmission { round: String, respondent: String },
    #[error("payload kind does not match round kind {0}")]
    PayloadKindMismatch(RoundKind),
    #[error("payload is empty")]
    EmptyPayload,
    #[error("item {criterion}@{scenario} is not part of this round")]
    UnknownItem { criterion: String, scenario: String },
    #[error("item {criterion}@{scenario} appears twice")]
    DuplicateCell { criterion: String, scenario: String },
    #[error("{0}")]
    ValueOutOfRange(String),
    #[error(transparent)]
    Weights(#[from] ScaleError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Aggregation(#[from] AggregationError),
    #[error("archive is inconsistent: {0}")]
    ArchiveCorrupt(String),
}

fn summarize(findings: &[Finding]) -> String {
    findings
        .iter()
        .map(|f| format!("{} {}", f.code, f.subject))
        .collect::<Vec<_>>()
        .join(", ")
}

impl EngineError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::StudyInvalid(_) => "STUDY_INVALID",
            Self::RosterInvalid(_) => "ROSTER_INVALID",
            Self::DuplicateRespondent(_) => "DUPLICATE_RESPONDENT",
            Self::UnknownRespondent(_) => "UNKNOWN_RESPONDENT",
            Self::UnknownRound(_) => "UNKNOWN_ROUND",
            Self::ScaleRequired => "SCALE_REQUIRED",
            Self::ScaleForbidden => "SCALE_FORBIDDEN",
            Self::InvalidScale(_) => "INVALID_SCALE",
            Self::WaveOutOfSequence { .. } => "WAVE_OUT_OF_SEQUENCE",
            Self::PredecessorNotBriefed { .. } => "PREDECESSOR_NOT_BRIEFED",
            Self::RoundNotDraft(_) => "ROUND_NOT_DRAFT",
            Self::RoundNotOpen(_) => "ROUND_NOT_OPEN",
            Self::NotClosed(_) => "NOT_CLOSED",
            Self::FeedbackNeverRetrieved(_) => "FEEDBACK_NEVER_RETRIEVED",
            Self::FeedbackUnavailable(_) => "FEEDBACK_UNAVAILABLE",
            Self::NoSubmissions(_) => "NO_SUBMISSIONS",
            Self::NoSubmission { .. } => "NO_SUBMISSION",
            Self::PayloadKindMismatch(_) => "PAYLOAD_KIND_MISMATCH",
            Self::EmptyPayload => "EMPTY_PAYLOAD",
            Self::UnknownItem { .. } => "UNKNOWN_ITEM",
            Self::DuplicateCell { .. } => "DUPLICATE_CELL",
            Self::ValueOutOfRange(_) => "VALUE_OUT_OF_RANGE",
            Self::Weights(e) => e.code(),
            Self::Stats(e) => e.code(),
            Self::Aggregation(e) => e.code(),
            Self::ArchiveCorrupt(_) => "ARCHIVE_CORRUPT",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Self::UnknownRound(_) | Self::NoSubmission { .. } => ErrorClass::NotFound,
            Self::DuplicateRespondent(_)
            | Self::WaveOutOfSequence { .. }
            | Self::PredecessorNotBriefed { .. }
            | Self::RoundNotDraft(_)
            | Self::RoundNotOpen(_)
            | Self::NotClosed(_)
            | Self::FeedbackNeverRetrieved(_)
            | Self::FeedbackUnavailable(_)
            | Self::NoSubmissions(_) => ErrorClass::Conflict,
            _ => ErrorClass::Validation,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Event {
    StudyCreated {
        study: StudyDefinition,
    },
    RespondentRegistered {
        respondent: Respondent,
    },
    RoundCreated {
        round_id: String,
        kind: RoundKind,
        wave_number: u32,
        scale: Option<ScaleDef>,
    },
    RoundOpened {
        round_id: String,
    },
    SubmissionRecorded {
        submission: Submission,
    },
    SubmissionRetracted {
        round_id: String,
        respondent_id: String,
    },
    RoundClosed {
        round_id: String,
        packet_digest: String,
    },
    RoundBriefed {
        round_id: String,
    },
    /// An analysis report snapshot was taken; its digest covers the report
    /// computed from all preceding events.
    ReportRecorded {
        report_digest: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EventRecord {
    pub seq: u64,
    pub at: DateTime<Utc>,
    pub event: Event,
}

#[derive(Debug, Clone)]
struct RoundRecord {
    round: Round,
    submissions: BTreeMap<String, Submission>,
    history: Vec<AuditEntry>,
    packet: Option<FeedbackPacket>,
    packet_digest: Option<String>,
}

pub struct DelphiEngine {
    study: StudyDefinition,
    roster: BTreeMap<String, Respondent>,
    rounds: Vec<RoundRecord>,
    log: Vec<EventRecord>,
    reports: Vec<StoredReport>,
    last_briefed: Option<PacketRef>,
    /// Rounds whose feedback the facilitator has fetched. Not archived:
    /// reading feedback never changes the record.
    retrieved: BTreeSet<String>,
    clock: Arc<dyn Clock>,
}

impl fmt::Debug for DelphiEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DelphiEngine")
            .field("study", &self.study.id)
            .field("rounds", &self.rounds.len())
            .field("events", &self.log.len())
            .finish()
    }
}

impl DelphiEngine {
    /// Validate `study` and start a fresh log.
    pub fn create(study: StudyDefinition, clock: Arc<dyn Clock>) -> Result<Self, EngineError> {
        let report = validate_study(&study);
        if !report.is_valid() {
            return Err(EngineError::StudyInvalid(report.findings));
        }
        let mut engine = Self::empty(study.clone(), clock);
        engine.commit(Event::StudyCreated { study })?;
        Ok(engine)
    }

    fn empty(study: StudyDefinition, clock: Arc<dyn Clock>) -> Self {
        Self {
            study,
            roster: BTreeMap::new(),
            rounds: Vec::new(),
            log: Vec::new(),
            reports: Vec::new(),
            last_briefed: None,
            retrieved: BTreeSet::new(),
            clock,
        }
    }

    /// Rebuild an engine by re-applying a recorded log.
    pub fn replay(events: &[EventRecord], clock: Arc<dyn Clock>) -> Result<Self, EngineError> {
        let first = events
            .first()
            .ok_or_else(|| EngineError::ArchiveCorrupt("event log is empty".into()))?;
        let Event::StudyCreated { study } = &first.event else {
            return Err(EngineError::ArchiveCorrupt(
                "first event must create the study".into(),
            ));
        };
        let mut engine = Self::empty(study.clone(), clock);
        for (i, record) in events.iter().enumerate() {
            if record.seq != i as u64 + 1 {
                return Err(EngineError::ArchiveCorrupt(format!(
                    "event {} carries sequence number {}",
                    i + 1,
                    record.seq
                )));
            }
            if i > 0 && matches!(record.event, Event::StudyCreated { .. }) {
                return Err(EngineError::ArchiveCorrupt("study created twice".into()));
            }
            engine.apply(&record.event, record.at)?;
            engine.log.push(record.clone());
        }
        Ok(engine)
    }

    /// Replay an archive and check every stored artifact is reproduced.
    pub fn from_archive(
        archive: &StudyArchive,
        clock: Arc<dyn Clock>,
    ) -> Result<Self, EngineError> {
        let engine = Self::replay(&archive.events, clock)?;
        let rebuilt = engine.archive();
        let expected = canonical::to_canonical_string(archive).map_err(json_corrupt)?;
        let actual = canonical::to_canonical_string(&rebuilt).map_err(json_corrupt)?;
        if expected != actual {
            return Err(EngineError::ArchiveCorrupt(
                "derived snapshot differs from replayed state".into(),
            ));
        }
        Ok(engine)
    }

    fn commit(&mut self, event: Event) -> Result<u64, EngineError> {
        let at = self.clock.now();
        self.apply(&event, at)?;
        let seq = self.log.len() as u64 + 1;
        self.log.push(EventRecord { seq, at, event });
        Ok(seq)
    }

    fn record_mut(&mut self, round_id: &str) -> Result<&mut RoundRecord, EngineError> {
        self.rounds
            .iter_mut()
            .find(|r| r.round.id == round_id)
            .ok_or_else(|| EngineError::UnknownRound(round_id.to_string()))
    }

    fn record(&self, round_id: &str) -> Result<&RoundRecord, EngineError> {
        self.rounds
            .iter()
            .find(|r| r.round.id == round_id)
            .ok_or_else(|| EngineError::UnknownRound(round_id.to_string()))
    }

    fn wave(&self, kind: RoundKind, wave: u32) -> Option<&RoundRecord> {
        self.rounds
            .iter()
            .find(|r| r.round.kind == kind && r.round.wave_number == wave)
    }

    fn waves_of(&self, kind: RoundKind) -> u32 {
        self.rounds.iter().filter(|r| r.round.kind == kind).count() as u32
    }

    fn check_predecessor(&self, kind: RoundKind, wave: u32) -> Result<(), EngineError> {
        if wave > 1 {
            let briefed = self
                .wave(kind, wave - 1)
                .is_some_and(|r| r.round.state == RoundState::Briefed);
            if !briefed {
                return Err(EngineError::PredecessorNotBriefed { kind, wave });
            }
        }
        Ok(())
    }

    fn check_round_shape(
        &self,
        kind: RoundKind,
        wave_number: u32,
        scale: Option<&ScaleDef>,
    ) -> Result<(), EngineError> {
        match (kind.is_rating(), scale) {
            (true, None) => return Err(EngineError::ScaleRequired),
            (false, Some(_)) => return Err(EngineError::ScaleForbidden),
            (true, Some(s)) if !s.is_well_formed() => {
                return Err(EngineError::InvalidScale(s.name.clone()))
            }
            _ => {}
        }
        let expected = self.waves_of(kind) + 1;
        if wave_number != expected {
            return Err(EngineError::WaveOutOfSequence {
                kind,
                expected,
                got: wave_number,
            });
        }
        Ok(())
    }

    /// Single state-transition path shared by live commands and replay.
    fn apply(&mut self, event: &Event, at: DateTime<Utc>) -> Result<(), EngineError> {
        match event {
            Event::StudyCreated { study } => {
                if !self.log.is_empty() {
                    return Err(EngineError::ArchiveCorrupt("study created twice".into()));
                }
                let report = validate_study(study);
                if !report.is_valid() {
                    return Err(EngineError::StudyInvalid(report.findings));
                }
                self.study = study.clone();
            }
            Event::RespondentRegistered { respondent } => {
                if self.roster.contains_key(&respondent.id) {
                    return Err(EngineError::DuplicateRespondent(respondent.id.clone()));
                }
                let mut candidate: Vec<Respondent> = self.roster.values().cloned().collect();
                candidate.push(respondent.clone());
                let report = validate_roster(&candidate);
                if !report.is_valid() {
                    return Err(EngineError::RosterInvalid(
                        report.errors().cloned().collect(),
                    ));
                }
                self.roster
                    .insert(respondent.id.clone(), respondent.clone());
            }
            Event::RoundCreated {
                round_id: id,
                kind,
                wave_number,
                scale,
            } => {
                self.check_round_shape(*kind, *wave_number, scale.as_ref())?;
                if *id != round_id(*kind, *wave_number) {
                    return Err(EngineError::ArchiveCorrupt(format!(
                        "unexpected round id {id}"
                    )));
                }
                self.rounds.push(RoundRecord {
                    round: Round {
                        id: id.clone(),
                        study_id: self.study.id.clone(),
                        wave_number: *wave_number,
                        kind: *kind,
                        scale: scale.clone(),
                        state: RoundState::Draft,
                        created_at: at,
                        opened_at: None,
                        closed_at: None,
                        briefed_at: None,
                    },
                    submissions: BTreeMap::new(),
                    history: Vec::new(),
                    packet: None,
                    packet_digest: None,
                });
            }
            Event::RoundOpened { round_id } => {
                let round = self.record(round_id)?.round.clone();
                if round.state != RoundState::Draft {
                    return Err(EngineError::RoundNotDraft(round_id.clone()));
                }
                self.check_predecessor(round.kind, round.wave_number)?;
                let rec = self.record_mut(round_id)?;
                rec.round.state = RoundState::Open;
                rec.round.opened_at = Some(at);
            }
            Event::SubmissionRecorded { submission } => {
                let rec = self.record(&submission.round_id)?;
                if rec.round.state != RoundState::Open {
                    return Err(EngineError::RoundNotOpen(submission.round_id.clone()));
                }
                if !self.roster.contains_key(&submission.respondent_id) {
                    return Err(EngineError::UnknownRespondent(
                        submission.respondent_id.clone(),
                    ));
                }
                let validated = self.validate_canonical(&rec.round, &submission.payload)?;
                if validated != submission.payload {
                    return Err(EngineError::ArchiveCorrupt(
                        "stored payload is not in canonical order".into(),
                    ));
                }
                let seq = self.log.len() as u64 + 1;
                let rec = self.record_mut(&submission.round_id)?;
                rec.history.push(AuditEntry {
                    seq,
                    respondent_id: submission.respondent_id.clone(),
                    submission: Some(submission.clone()),
                });
                rec.submissions
                    .insert(submission.respondent_id.clone(), submission.clone());
            }
            Event::SubmissionRetracted {
                round_id,
                respondent_id,
            } => {
                let seq = self.log.len() as u64 + 1;
                let rec = self.record_mut(round_id)?;
                if rec.round.state != RoundState::Open {
                    return Err(EngineError::RoundNotOpen(round_id.clone()));
                }
                if rec.submissions.remove(respondent_id).is_none() {
                    return Err(EngineError::NoSubmission {
                        round: round_id.clone(),
                        respondent: respondent_id.clone(),
                    });
                }
                rec.history.push(AuditEntry {
                    seq,
                    respondent_id: respondent_id.clone(),
                    submission: None,
                });
            }
            Event::RoundClosed {
                round_id,
                packet_digest,
            } => {
                let rec = self.record(round_id)?;
                if rec.round.state != RoundState::Open {
                    return Err(EngineError::RoundNotOpen(round_id.clone()));
                }
                let packet =
                    packet::build_packet(&self.study, &self.roster, &rec.round, &rec.submissions)?;
                let digest = canonical::digest(&packet).map_err(json_corrupt)?;
                if &digest != packet_digest {
                    return Err(EngineError::ArchiveCorrupt(format!(
                        "feedback packet for {round_id} does not reproduce"
                    )));
                }
                let rec = self.record_mut(round_id)?;
                rec.round.state = RoundState::Closed;
                rec.round.closed_at = Some(at);
                rec.packet = Some(packet);
                rec.packet_digest = Some(digest);
            }
            Event::RoundBriefed { round_id } => {
                let rec = self.record_mut(round_id)?;
                if rec.round.state != RoundState::Closed {
                    return Err(EngineError::NotClosed(round_id.clone()));
                }
                rec.round.state = RoundState::Briefed;
                rec.round.briefed_at = Some(at);
                let digest = rec.packet_digest.clone().unwrap_or_default();
                self.last_briefed = Some(PacketRef {
                    round_id: round_id.clone(),
                    digest,
                });
            }
            Event::ReportRecorded { report_digest } => {
                let report = build_report(self)?;
                let digest = canonical::digest(&report).map_err(json_corrupt)?;
                if &digest != report_digest {
                    return Err(EngineError::ArchiveCorrupt(
                        "recorded report does not reproduce".into(),
                    ));
                }
                self.reports.push(StoredReport {
                    after_seq: self.log.len() as u64,
                    report,
                });
            }
        }
        Ok(())
    }

    /// Check a stored payload against the round and return it in canonical order.
    fn validate_canonical(&self, round: &Round, payload: &Payload) -> Result<Payload, EngineError> {
        match payload {
            Payload::Ratings { ratings } => {
                let scale = round.scale.as_ref().ok_or(EngineError::ScaleRequired)?;
                let raw = RawPayload::Ratings {
                    ratings: ratings
                        .iter()
                        .map(|r| RawRating {
                            criterion: r.criterion.clone(),
                            scenario: r.scenario.clone(),
                            value: scale.min + i64::from(r.value),
                        })
                        .collect(),
                };
                self.validate_payload(round, &raw)
            }
            Payload::Weights { weights } => self.validate_payload(
                round,
                &RawPayload::Weights {
                    weights: weights.clone(),
                },
            ),
        }
    }

    fn validate_payload(
        &self,
        round: &Round,
        payload: &RawPayload,
    ) -> Result<Payload, EngineError> {
        match (round.kind.is_rating(), payload) {
            (true, RawPayload::Ratings { ratings }) => {
                if ratings.is_empty() {
                    return Err(EngineError::EmptyPayload);
                }
                let scale = round.scale.as_ref().ok_or(EngineError::ScaleRequired)?;
                let items = round_items(&self.study, round.kind);
                let mut values: BTreeMap<ItemKey, u32> = BTreeMap::new();
                for r in ratings {
                    let key = ItemKey::new(r.criterion.clone(), r.scenario.clone());
                    if !items.contains(&key) {
                        return Err(EngineError::UnknownItem {
                            criterion: r.criterion.clone(),
                            scenario: r.scenario.clone(),
                        });
                    }
                    let canonical = remap_rating(r.value, scale).map_err(|_| {
                        EngineError::ValueOutOfRange(format!(
                            "rating {} for {}@{} outside scale {} [{}, {}]",
                            r.value, r.criterion, r.scenario, scale.name, scale.min, scale.max
                        ))
                    })?;
                    if values.insert(key, canonical).is_some() {
                        return Err(EngineError::DuplicateCell {
                            criterion: r.criterion.clone(),
                            scenario: r.scenario.clone(),
                        });
                    }
                }
                let ratings = items
                    .into_iter()
                    .filter_map(|k| {
                        values.get(&k).map(|&value| CanonicalRating {
                            criterion: k.criterion,
                            scenario: k.scenario,
                            value,
                        })
                    })
                    .collect();
                Ok(Payload::Ratings { ratings })
            }
            (false, RawPayload::Weights { weights }) => {
                if weights.is_empty() {
                    return Err(EngineError::EmptyPayload);
                }
                for (id, &w) in weights {
                    if self.study.criterion(id).is_none() {
                        return Err(EngineError::UnknownItem {
                            criterion: id.clone(),
                            scenario: String::new(),
                        });
                    }
                    if !w.is_finite() || w < 0.0 {
                        return Err(EngineError::ValueOutOfRange(format!(
                            "weight {w} for {id} must be a nonnegative number"
                        )));
                    }
                }
                check_raw_weights(weights)?;
                // Stored at the precision the event log preserves.
                Ok(Payload::Weights {
                    weights: weights
                        .iter()
                        .map(|(k, &w)| (k.clone(), canonical::round_sig15(w)))
                        .collect(),
                })
            }
            _ => Err(EngineError::PayloadKindMismatch(round.kind)),
        }
    }

    fn payload_complete(&self, round: &Round, payload: &Payload) -> bool {
        match payload {
            Payload::Ratings { ratings } => {
                ratings.len() == round_items(&self.study, round.kind).len()
            }
            Payload::Weights { weights } => self
                .study
                .criteria
                .iter()
                .all(|c| weights.contains_key(&c.id)),
        }
    }

    // ---- commands -------------------------------------------------------

    /// Add a panel member. Returns non-blocking warnings (e.g. panel size).
    pub fn register_respondent(
        &mut self,
        respondent: Respondent,
    ) -> Result<Vec<Finding>, EngineError> {
        self.commit(Event::RespondentRegistered { respondent })?;
        let roster: Vec<Respondent> = self.roster.values().cloned().collect();
        Ok(validate_roster(&roster).findings)
    }

    /// Create a round in Draft.
    pub fn create_round(
        &mut self,
        kind: RoundKind,
        wave_number: u32,
        scale: Option<ScaleDef>,
    ) -> Result<Round, EngineError> {
        let id = round_id(kind, wave_number);
        self.commit(Event::RoundCreated {
            round_id: id.clone(),
            kind,
            wave_number,
            scale,
        })?;
        Ok(self.record(&id)?.round.clone())
    }

    pub fn open(&mut self, round_id: &str) -> Result<Round, EngineError> {
        self.commit(Event::RoundOpened {
            round_id: round_id.to_string(),
        })?;
        Ok(self.record(round_id)?.round.clone())
    }

    /// Create and open a wave in one step. Nothing is recorded on failure.
    pub fn open_round(
        &mut self,
        kind: RoundKind,
        wave_number: u32,
        scale: Option<ScaleDef>,
    ) -> Result<Round, EngineError> {
        self.check_round_shape(kind, wave_number, scale.as_ref())?;
        self.check_predecessor(kind, wave_number)?;
        let round = self.create_round(kind, wave_number, scale)?;
        self.open(&round.id)
    }

    pub fn submit(
        &mut self,
        round_id: &str,
        respondent_id: &str,
        payload: RawPayload,
    ) -> Result<Acknowledgment, EngineError> {
        let rec = self.record(round_id)?;
        if rec.round.state != RoundState::Open {
            return Err(EngineError::RoundNotOpen(round_id.to_string()));
        }
        if !self.roster.contains_key(respondent_id) {
            return Err(EngineError::UnknownRespondent(respondent_id.to_string()));
        }
        let payload = self.validate_payload(&rec.round, &payload)?;
        let complete = self.payload_complete(&rec.round, &payload);
        let replaced = rec.submissions.contains_key(respondent_id);
        let context = BriefingContext {
            wave_number: rec.round.wave_number,
            last_briefed: self.last_briefed.clone(),
        };
        let submitted_at = self.clock.now();
        let submission = Submission {
            round_id: round_id.to_string(),
            respondent_id: respondent_id.to_string(),
            payload,
            submitted_at,
            context,
        };
        self.apply(
            &Event::SubmissionRecorded {
                submission: submission.clone(),
            },
            submitted_at,
        )?;
        let seq = self.log.len() as u64 + 1;
        self.log.push(EventRecord {
            seq,
            at: submitted_at,
            event: Event::SubmissionRecorded { submission },
        });
        Ok(Acknowledgment {
            round_id: round_id.to_string(),
            respondent_id: respondent_id.to_string(),
            seq,
            submitted_at,
            replaced,
            complete,
        })
    }

    /// Tombstone a respondent's submission while the round is open.
    pub fn retract(&mut self, round_id: &str, respondent_id: &str) -> Result<(), EngineError> {
        self.commit(Event::SubmissionRetracted {
            round_id: round_id.to_string(),
            respondent_id: respondent_id.to_string(),
        })?;
        Ok(())
    }

    pub fn close(&mut self, round_id: &str) -> Result<FeedbackPacket, EngineError> {
        let rec = self.record(round_id)?;
        if rec.round.state != RoundState::Open {
            return Err(EngineError::RoundNotOpen(round_id.to_string()));
        }
        let packet = packet::build_packet(&self.study, &self.roster, &rec.round, &rec.submissions)?;
        let packet_digest = canonical::digest(&packet).map_err(json_corrupt)?;
        self.commit(Event::RoundClosed {
            round_id: round_id.to_string(),
            packet_digest,
        })?;
        Ok(packet)
    }

    /// Facilitator retrieval of a closed round's feedback. Enables briefing.
    pub fn feedback(&mut self, round_id: &str) -> Result<&FeedbackPacket, EngineError> {
        self.record(round_id)?;
        self.retrieved.insert(round_id.to_string());
        self.peek_feedback(round_id)
    }

    /// Feedback without marking it as retrieved.
    pub fn peek_feedback(&self, round_id: &str) -> Result<&FeedbackPacket, EngineError> {
        self.record(round_id)?
            .packet
            .as_ref()
            .ok_or_else(|| EngineError::FeedbackUnavailable(round_id.to_string()))
    }

    pub fn mark_briefed(&mut self, round_id: &str) -> Result<Round, EngineError> {
        let rec = self.record(round_id)?;
        if rec.round.state != RoundState::Closed {
            return Err(EngineError::NotClosed(round_id.to_string()));
        }
        if !self.retrieved.contains(round_id) {
            return Err(EngineError::FeedbackNeverRetrieved(round_id.to_string()));
        }
        self.commit(Event::RoundBriefed {
            round_id: round_id.to_string(),
        })?;
        Ok(self.record(round_id)?.round.clone())
    }

    /// Compute the current analysis report and record it in the archive.
    pub fn record_report(&mut self) -> Result<AnalysisReport, EngineError> {
        let report = build_report(self)?;
        let report_digest = canonical::digest(&report).map_err(json_corrupt)?;
        self.commit(Event::ReportRecorded { report_digest })?;
        Ok(report)
    }

    /// Current analysis report, not recorded.
    pub fn analysis_report(&self) -> Result<AnalysisReport, EngineError> {
        build_report(self)
    }

    // ---- queries --------------------------------------------------------

    pub fn study(&self) -> &StudyDefinition {
        &self.study
    }

    pub fn roster(&self) -> &BTreeMap<String, Respondent> {
        &self.roster
    }

    pub fn respondent(&self, id: &str) -> Option<&Respondent> {
        self.roster.get(id)
    }

    pub fn rounds(&self) -> impl Iterator<Item = &Round> {
        self.rounds.iter().map(|r| &r.round)
    }

    pub fn round(&self, round_id: &str) -> Result<&Round, EngineError> {
        Ok(&self.record(round_id)?.round)
    }

    pub fn submissions(
        &self,
        round_id: &str,
    ) -> Result<&BTreeMap<String, Submission>, EngineError> {
        Ok(&self.record(round_id)?.submissions)
    }

    pub fn submission(
        &self,
        round_id: &str,
        respondent_id: &str,
    ) -> Result<&Submission, EngineError> {
        self.submissions(round_id)?
            .get(respondent_id)
            .ok_or_else(|| EngineError::NoSubmission {
                round: round_id.to_string(),
                respondent: respondent_id.to_string(),
            })
    }

    pub fn history(&self, round_id: &str) -> Result<&[AuditEntry], EngineError> {
        Ok(&self.record(round_id)?.history)
    }

    pub fn events(&self) -> &[EventRecord] {
        &self.log
    }

    pub fn stored_reports(&self) -> &[StoredReport] {
        &self.reports
    }

    pub fn feedback_retrieved(&self, round_id: &str) -> bool {
        self.retrieved.contains(round_id)
    }

    /// Complete, replayable record of the study.
    pub fn archive(&self) -> StudyArchive {
        StudyArchive {
            schema_version: crate::io::SCHEMA_VERSION,
            study_id: self.study.id.clone(),
            study: self.study.clone(),
            roster: self.roster.values().cloned().collect(),
            rounds: self
                .rounds
                .iter()
                .map(|r| RoundSnapshot {
                    round: r.round.clone(),
                    submissions: r.submissions.values().cloned().collect(),
                    history: r.history.clone(),
                    feedback: r.packet.clone(),
                    feedback_digest: r.packet_digest.clone(),
                })
                .collect(),
            reports: self.reports.clone(),
            events: self.log.clone(),
        }
    }
}

fn json_corrupt(e: serde_json::Error) -> EngineError {
    EngineError::ArchiveCorrupt(e.to_string())
}

#[cfg(test)]
mod tests;

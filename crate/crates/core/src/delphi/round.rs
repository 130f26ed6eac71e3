use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::model::{Polarity, ScaleDef, StudyDefinition};
use crate::reliability::ItemKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundKind {
    HarmAssessment,
    BenefitAssessment,
    WeightElicitation,
}

impl RoundKind {
    pub const ALL: [RoundKind; 3] = [
        Self::HarmAssessment,
        Self::BenefitAssessment,
        Self::WeightElicitation,
    ];

    /// Short token used in round ids and on the command line.
    pub fn slug(self) -> &'static str {
        match self {
            Self::HarmAssessment => "harm",
            Self::BenefitAssessment => "benefit",
            Self::WeightElicitation => "weights",
        }
    }

    pub fn is_rating(self) -> bool {
        !matches!(self, Self::WeightElicitation)
    }

    pub fn polarity(self) -> Option<Polarity> {
        match self {
            Self::HarmAssessment => Some(Polarity::Harm),
            Self::BenefitAssessment => Some(Polarity::Benefit),
            Self::WeightElicitation => None,
        }
    }
}

impl fmt::Display for RoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.slug())
    }
}

impl FromStr for RoundKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "harm" | "harm_assessment" => Ok(Self::HarmAssessment),
            "benefit" | "benefit_assessment" => Ok(Self::BenefitAssessment),
            "weights" | "weight" | "weight_elicitation" => Ok(Self::WeightElicitation),
            other => Err(format!(
                "unknown round kind {other:?} (expected harm, benefit or weights)"
            )),
        }
    }
}

pub fn round_id(kind: RoundKind, wave_number: u32) -> String {
    format!("{}-{}", kind.slug(), wave_number)
}

/// Items rated in a round of the given kind. Benefits are never rated for
/// the baseline scenario. Weight rounds have no (criterion, scenario) items.
pub fn round_items(study: &StudyDefinition, kind: RoundKind) -> Vec<ItemKey> {
    let Some(polarity) = kind.polarity() else {
        return Vec::new();
    };
    let mut items = Vec::new();
    for scenario in &study.scenarios {
        if polarity == Polarity::Benefit && scenario.is_baseline {
            continue;
        }
        for c in study.criteria_with(polarity) {
            items.push(ItemKey::new(c.id.clone(), scenario.id.clone()));
        }
    }
    items
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoundState {
    Draft,
    Open,
    Closed,
    Briefed,
}

impl RoundState {
    pub const ALL: [RoundState; 4] = [Self::Draft, Self::Open, Self::Closed, Self::Briefed];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Draft => "draft",
            Self::Open => "open",
            Self::Closed => "closed",
            Self::Briefed => "briefed",
        }
    }

    /// Closed or Briefed: results exist.
    pub fn has_results(self) -> bool {
        matches!(self, Self::Closed | Self::Briefed)
    }
}

impl fmt::Display for RoundState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Round {
    pub id: String,
    pub study_id: String,
    pub wave_number: u32,
    pub kind: RoundKind,
    pub scale: Option<ScaleDef>,
    pub state: RoundState,
    pub created_at: DateTime<Utc>,
    pub opened_at: Option<DateTime<Utc>>,
    pub closed_at: Option<DateTime<Utc>>,
    pub briefed_at: Option<DateTime<Utc>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawRating {
    pub criterion: String,
    pub scenario: String,
    pub value: i64,
}

/// A payload as a respondent submits it: ratings on the round's own scale,
/// or importance weights on any free nonnegative scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum RawPayload {
    Ratings { ratings: Vec<RawRating> },
    Weights { weights: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CanonicalRating {
    pub criterion: String,
    pub scenario: String,
    /// Remapped so the scale floor is 0.
    pub value: u32,
}

/// A validated payload. Ratings are stored remapped in round item order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Payload {
    Ratings { ratings: Vec<CanonicalRating> },
    Weights { weights: BTreeMap<String, f64> },
}

impl Payload {
    pub fn rating_map(&self) -> BTreeMap<ItemKey, u32> {
        match self {
            Self::Ratings { ratings } => ratings
                .iter()
                .map(|r| {
                    (
                        ItemKey::new(r.criterion.clone(), r.scenario.clone()),
                        r.value,
                    )
                })
                .collect(),
            Self::Weights { .. } => BTreeMap::new(),
        }
    }

    pub fn weights(&self) -> Option<&BTreeMap<String, f64>> {
        match self {
            Self::Weights { weights } => Some(weights),
            Self::Ratings { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PacketRef {
    pub round_id: String,
    pub digest: String,
}

/// What the respondent had been shown when submitting.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BriefingContext {
    pub wave_number: u32,
    /// Most recently briefed feedback packet in the study, if any.
    pub last_briefed: Option<PacketRef>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Submission {
    pub round_id: String,
    pub respondent_id: String,
    pub payload: Payload,
    pub submitted_at: DateTime<Utc>,
    pub context: BriefingContext,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Acknowledgment {
    pub round_id: String,
    pub respondent_id: String,
    pub seq: u64,
    pub submitted_at: DateTime<Utc>,
    /// A prior submission from the same respondent was superseded.
    pub replaced: bool,
    /// The payload covers every item of the round.
    pub complete: bool,
}

/// One entry in a round's submission audit trail. `submission: None` is a
/// retraction tombstone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditEntry {
    pub seq: u64,
    pub respondent_id: String,
    pub submission: Option<Submission>,
}

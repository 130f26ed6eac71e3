//! Response CSV files.
//!
//! Rating rounds use `respondent,criterion,scenario,value`; weight rounds use
//! `respondent,criterion,weight`. The header is mandatory and must match
//! exactly. Line numbers in errors are 1-based with the header on line 1.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use csv::{ReaderBuilder, StringRecord};

use super::IoError;
use crate::delphi::{round_items, RawPayload, RawRating, RoundKind};
use crate::model::{ScaleDef, StudyDefinition};
use crate::reliability::ItemKey;

pub const RATING_HEADER: [&str; 4] = ["respondent", "criterion", "scenario", "value"];
pub const WEIGHT_HEADER: [&str; 3] = ["respondent", "criterion", "weight"];

/// Parsed responses of one round, keyed by respondent id. Rating rows keep
/// their file order within a respondent.
#[derive(Debug, Clone, PartialEq)]
pub enum ResponseSet {
    Ratings(BTreeMap<String, Vec<RawRating>>),
    Weights(BTreeMap<String, BTreeMap<String, f64>>),
}

impl ResponseSet {
    pub fn respondents(&self) -> Vec<&str> {
        match self {
            Self::Ratings(m) => m.keys().map(String::as_str).collect(),
            Self::Weights(m) => m.keys().map(String::as_str).collect(),
        }
    }

    pub fn is_rating(&self) -> bool {
        matches!(self, Self::Ratings(_))
    }

    /// One engine payload per respondent.
    pub fn payloads(&self) -> Vec<(String, RawPayload)> {
        match self {
            Self::Ratings(m) => m
                .iter()
                .map(|(r, ratings)| {
                    (
                        r.clone(),
                        RawPayload::Ratings {
                            ratings: ratings.clone(),
                        },
                    )
                })
                .collect(),
            Self::Weights(m) => m
                .iter()
                .map(|(r, weights)| {
                    (
                        r.clone(),
                        RawPayload::Weights {
                            weights: weights.clone(),
                        },
                    )
                })
                .collect(),
        }
    }
}

/// What a file is checked against.
#[derive(Debug, Clone, Copy)]
pub struct ParseContext<'a> {
    pub study: &'a StudyDefinition,
    pub kind: RoundKind,
    /// When given, ratings outside it are rejected.
    pub scale: Option<&'a ScaleDef>,
    /// When given, respondent ids must be on it.
    pub roster: Option<&'a BTreeSet<String>>,
}

impl<'a> ParseContext<'a> {
    pub fn new(study: &'a StudyDefinition, kind: RoundKind) -> Self {
        Self {
            study,
            kind,
            scale: None,
            roster: None,
        }
    }

    pub fn with_scale(mut self, scale: &'a ScaleDef) -> Self {
        self.scale = Some(scale);
        self
    }

    pub fn with_roster(mut self, roster: &'a BTreeSet<String>) -> Self {
        self.roster = Some(roster);
        self
    }
}

fn malformed(line: u64, message: impl Into<String>) -> IoError {
    IoError::MalformedRow {
        line,
        message: message.into(),
    }
}

fn unknown(line: u64, message: impl Into<String>) -> IoError {
    IoError::UnknownId {
        line,
        message: message.into(),
    }
}

pub fn parse_responses(input: &str, ctx: &ParseContext<'_>) -> Result<ResponseSet, IoError> {
    let expected: &[&str] = if ctx.kind.is_rating() {
        &RATING_HEADER
    } else {
        &WEIGHT_HEADER
    };
    let mut reader = ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(input.as_bytes());
    let mut records = reader.records();

    let header = match records.next() {
        None => return Err(malformed(1, "missing header row")),
        Some(r) => r.map_err(|e| malformed(csv_line(&e).unwrap_or(1), e.to_string()))?,
    };
    let got: Vec<&str> = header.iter().collect();
    if got != expected {
        return Err(malformed(
            line_of(&header, 1),
            format!(
                "header must be {:?}, found {:?}",
                expected.join(","),
                got.join(",")
            ),
        ));
    }

    let items: BTreeSet<ItemKey> = round_items(ctx.study, ctx.kind).into_iter().collect();
    let mut ratings: BTreeMap<String, Vec<RawRating>> = BTreeMap::new();
    let mut weights: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    let mut seen: BTreeSet<(String, String, String)> = BTreeSet::new();

    for record in records {
        let record = record.map_err(|e| malformed(csv_line(&e).unwrap_or(0), e.to_string()))?;
        let line = line_of(&record, 0);
        if record.len() != expected.len() {
            return Err(malformed(
                line,
                format!("expected {} fields, found {}", expected.len(), record.len()),
            ));
        }
        let respondent = &record[0];
        let criterion = &record[1];
        if respondent.is_empty() {
            return Err(malformed(line, "empty respondent id"));
        }
        if let Some(roster) = ctx.roster {
            if !roster.contains(respondent) {
                return Err(unknown(
                    line,
                    format!("respondent {respondent:?} is not on the roster"),
                ));
            }
        }
        if ctx.study.criterion(criterion).is_none() {
            return Err(unknown(line, format!("criterion {criterion:?}")));
        }

        if ctx.kind.is_rating() {
            let scenario = &record[2];
            if ctx.study.scenario(scenario).is_none() {
                return Err(unknown(line, format!("scenario {scenario:?}")));
            }
            if !items.contains(&ItemKey::new(criterion, scenario)) {
                return Err(unknown(
                    line,
                    format!(
                        "{criterion}@{scenario} is not rated in a {} round",
                        ctx.kind
                    ),
                ));
            }
            let value: i64 = record[3].parse().map_err(|_| {
                malformed(line, format!("rating {:?} is not an integer", &record[3]))
            })?;
            if let Some(scale) = ctx.scale {
                if !scale.contains(value) {
                    return Err(IoError::ValueOutOfRange {
                        line,
                        message: format!(
                            "rating {value} outside scale {} [{}, {}]",
                            scale.name, scale.min, scale.max
                        ),
                    });
                }
            }
            if !seen.insert((respondent.into(), criterion.into(), scenario.into())) {
                return Err(IoError::DuplicateCell {
                    line,
                    message: format!("{respondent},{criterion},{scenario}"),
                });
            }
            ratings
                .entry(respondent.to_string())
                .or_default()
                .push(RawRating {
                    criterion: criterion.to_string(),
                    scenario: scenario.to_string(),
                    value,
                });
        } else {
            let weight: f64 = record[2]
                .parse()
                .map_err(|_| malformed(line, format!("weight {:?} is not a number", &record[2])))?;
            if !weight.is_finite() || weight < 0.0 {
                return Err(IoError::ValueOutOfRange {
                    line,
                    message: format!("weight {weight} must be finite and nonnegative"),
                });
            }
            let entry = weights.entry(respondent.to_string()).or_default();
            if entry.insert(criterion.to_string(), weight).is_some() {
                return Err(IoError::DuplicateCell {
                    line,
                    message: format!("{respondent},{criterion}"),
                });
            }
        }
    }

    Ok(if ctx.kind.is_rating() {
        ResponseSet::Ratings(ratings)
    } else {
        ResponseSet::Weights(weights)
    })
}

fn line_of(record: &StringRecord, fallback: u64) -> u64 {
    record.position().map_or(fallback, |p| p.line())
}

fn csv_line(e: &csv::Error) -> Option<u64> {
    e.position().map(|p| p.line())
}

/// Write responses in the same format `parse_responses` reads.
pub fn write_responses(set: &ResponseSet) -> String {
    let mut out = String::new();
    match set {
        ResponseSet::Ratings(m) => {
            out.push_str(&RATING_HEADER.join(","));
            out.push('\n');
            for (respondent, ratings) in m {
                for r in ratings {
                    let _ = writeln!(
                        out,
                        "{respondent},{},{},{}",
                        r.criterion, r.scenario, r.value
                    );
                }
            }
        }
        ResponseSet::Weights(m) => {
            out.push_str(&WEIGHT_HEADER.join(","));
            out.push('\n');
            for (respondent, weights) in m {
                for (criterion, w) in weights {
                    let _ = writeln!(out, "{respondent},{criterion},{w:?}");
                }
            }
        }
    }
    out
}

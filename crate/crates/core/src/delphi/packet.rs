//! Between-wave feedback: anonymized aggregate results of a closed round.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::round::{round_items, Round, RoundKind, Submission};
use super::EngineError;
use crate::model::{Polarity, Respondent, ScaleDef, StudyDefinition};
use crate::reliability::{
    item_stats, respondent_sums, ItemStats, RespondentSumStats, ResponseMatrix,
};
use crate::scales::{weight_profile, WeightProfile, WeightVector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSums {
    pub scenario: String,
    pub stats: RespondentSumStats,
}

/// Anonymized results briefed to the panel. Respondents appear only by alias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeedbackPacket {
    pub round_id: String,
    pub kind: RoundKind,
    pub wave_number: u32,
    pub scale: Option<ScaleDef>,
    pub roster_size: usize,
    /// Respondents with an effective submission.
    pub submitted: usize,
    /// Submissions covering every item; only these enter the statistics.
    pub complete: usize,
    pub exclusion_count: usize,
    pub item_stats: Option<ItemStats>,
    pub respondent_sum_stats: Vec<ScenarioSums>,
    pub weight_profiles: Vec<WeightProfile>,
}

pub(crate) fn alias_of<'a>(roster: &'a BTreeMap<String, Respondent>, id: &'a str) -> &'a str {
    roster.get(id).map_or(id, |r| r.display_alias.as_str())
}

/// Complete rating rows of a round, labelled by alias and sorted by alias.
pub(crate) fn rating_matrix(
    study: &StudyDefinition,
    roster: &BTreeMap<String, Respondent>,
    round: &Round,
    submissions: &BTreeMap<String, Submission>,
) -> Result<ResponseMatrix, EngineError> {
    let scale = round.scale.as_ref().ok_or(EngineError::ScaleRequired)?;
    let mut rows: Vec<(String, _)> = submissions
        .values()
        .map(|s| {
            (
                alias_of(roster, &s.respondent_id).to_string(),
                s.payload.rating_map(),
            )
        })
        .collect();
    rows.sort_by(|a, b| a.0.cmp(&b.0));
    Ok(ResponseMatrix::from_partial_rows(
        round_items(study, round.kind),
        scale.canonical_max(),
        rows,
    )?)
}

/// Normalized weight vectors for complete weight submissions, keyed by
/// respondent id. Incomplete submissions are counted, not used.
pub(crate) fn complete_weight_vectors(
    study: &StudyDefinition,
    submissions: &BTreeMap<String, Submission>,
) -> Result<(Vec<WeightVector>, usize), EngineError> {
    let mut vectors = Vec::new();
    let mut excluded = 0;
    for s in submissions.values() {
        let Some(weights) = s.payload.weights() else {
            excluded += 1;
            continue;
        };
        if !study.criteria.iter().all(|c| weights.contains_key(&c.id)) {
            excluded += 1;
            continue;
        }
        vectors.push(WeightVector::from_raw(
            s.respondent_id.clone(),
            weights.clone(),
        )?);
    }
    Ok((vectors, excluded))
}

pub(crate) fn build_packet(
    study: &StudyDefinition,
    roster: &BTreeMap<String, Respondent>,
    round: &Round,
    submissions: &BTreeMap<String, Submission>,
) -> Result<FeedbackPacket, EngineError> {
    let mut packet = FeedbackPacket {
        round_id: round.id.clone(),
        kind: round.kind,
        wave_number: round.wave_number,
        scale: round.scale.clone(),
        roster_size: roster.len(),
        submitted: submissions.len(),
        complete: 0,
        exclusion_count: 0,
        item_stats: None,
        respondent_sum_stats: Vec::new(),
        weight_profiles: Vec::new(),
    };

    match round.kind {
        RoundKind::HarmAssessment | RoundKind::BenefitAssessment => {
            let m = rating_matrix(study, roster, round, submissions)?;
            packet.complete = m.n_rows();
            packet.exclusion_count = m.excluded_rows();
            if m.n_rows() == 0 {
                return Err(EngineError::NoSubmissions(round.id.clone()));
            }
            packet.item_stats = Some(item_stats(&m)?);
            if round.kind == RoundKind::HarmAssessment {
                let harms = study.ids_with(Polarity::Harm);
                for scenario in &study.scenarios {
                    let sub = m.for_scenario(&scenario.id);
                    packet.respondent_sum_stats.push(ScenarioSums {
                        scenario: scenario.id.clone(),
                        stats: respondent_sums(&sub, &harms)?,
                    });
                }
            }
        }
        RoundKind::WeightElicitation => {
            let (vectors, excluded) = complete_weight_vectors(study, submissions)?;
            packet.complete = vectors.len();
            packet.exclusion_count = excluded;
            if vectors.is_empty() {
                return Err(EngineError::NoSubmissions(round.id.clone()));
            }
            let order = study.criterion_ids();
            let mut profiles = vectors
                .iter()
                .map(|v| {
                    weight_profile(
                        alias_of(roster, &v.respondent_id),
                        &v.normalized_100,
                        &order,
                    )
                })
                .collect::<Result<Vec<_>, _>>()?;
            profiles.sort_by(|a, b| a.respondent.cmp(&b.respondent));
            packet.weight_profiles = profiles;
        }
    }
    Ok(packet)
}

//! Full analysis of a study's closed rounds.
//!
//! The report is computed from the engine state alone and contains no
//! timestamps, so equal inputs give byte-identical documents however they
//! were collected. Respondents appear only under their display aliases.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    rank_scenarios, tradeoff_points, weighted_totals, RankingRule, ScenarioRanking, TradeoffPoint,
    WeightedTotals,
};
use crate::delphi::{
    alias_of, complete_weight_vectors, rating_matrix, round_items, DelphiEngine, EngineError,
    Payload, Round, RoundKind, ScenarioSums,
};
use crate::io::canonical::{self, round_sig15};
use crate::io::{parse_versioned, to_document, IoError, SCHEMA_VERSION};
use crate::model::StudyDefinition;
use crate::reliability::{
    cronbach_alpha, ItemStats, ReliabilityReport, ResponseMatrix, VarianceConvention,
};
use crate::scales::{WeightProfile, NORMALIZATION_TOLERANCE};

/// Alpha for one slice of a round, or the reason it is undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaOutcome {
    /// `"all"` for the whole round, otherwise a scenario id.
    pub scope: String,
    pub reliability: Option<ReliabilityReport>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RoundAnalysis {
    pub round_id: String,
    pub kind: RoundKind,
    pub wave_number: u32,
    pub scale_name: String,
    pub scale_max: u32,
    pub roster_size: usize,
    pub submitted: usize,
    pub complete: usize,
    pub exclusion_count: usize,
    pub reliability: Vec<AlphaOutcome>,
    pub item_stats: ItemStats,
    pub respondent_sums: Vec<ScenarioSums>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AliasWeights {
    pub respondent: String,
    pub normalized_100: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightAnalysis {
    pub round_id: String,
    pub wave_number: u32,
    pub roster_size: usize,
    pub submitted: usize,
    pub complete: usize,
    pub exclusion_count: usize,
    pub vectors: Vec<AliasWeights>,
    pub profiles: Vec<WeightProfile>,
}

/// Per-respondent inputs of a tradeoff: unit-sum weights and canonical ratings
/// by scenario then criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RespondentInputs {
    pub respondent: String,
    pub weights: BTreeMap<String, f64>,
    pub ratings: BTreeMap<String, BTreeMap<String, u32>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffAnalysis {
    pub label: String,
    pub scale_max: u32,
    pub harm_round: String,
    pub benefit_round: String,
    pub weight_round: String,
    pub inputs: Vec<RespondentInputs>,
    pub totals: Vec<WeightedTotals>,
    pub points: Vec<TradeoffPoint>,
    /// One ranking per rule, in `RankingRule::ALL` order.
    pub rankings: Vec<ScenarioRanking>,
}

impl TradeoffAnalysis {
    pub fn ranking(&self, rule: RankingRule) -> Option<&ScenarioRanking> {
        self.rankings.iter().find(|r| r.rule == rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputDigest {
    pub round_id: String,
    pub submissions_digest: String,
    pub feedback_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub engine: String,
    pub engine_version: String,
    pub study_digest: String,
    pub inputs: Vec<InputDigest>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisReport {
    pub schema_version: u32,
    pub study_id: String,
    pub variance_convention: VarianceConvention,
    pub rounds: Vec<RoundAnalysis>,
    pub weights: Vec<WeightAnalysis>,
    pub tradeoffs: Vec<TradeoffAnalysis>,
    pub provenance: Provenance,
}

impl AnalysisReport {
    pub fn to_document(&self) -> String {
        to_document(self)
    }

    pub fn parse(text: &str) -> Result<Self, IoError> {
        parse_versioned(text)
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty() && self.weights.is_empty()
    }

    /// Recompute every derived number from the embedded inputs.
    pub fn check_consistency(&self, study: &StudyDefinition) -> Result<(), String> {
        const TOL: f64 = 1e-9;
        for r in &self.rounds {
            for a in &r.reliability {
                if let Some(rel) = &a.reliability {
                    let again = rel.recompute_alpha();
                    if (again - rel.alpha).abs() > TOL {
                        return Err(format!(
                            "{} alpha ({}) does not recompute",
                            r.round_id, a.scope
                        ));
                    }
                }
            }
        }
        for w in &self.weights {
            for p in &w.profiles {
                if (p.final_percent() - 100.0).abs() > 100.0 * NORMALIZATION_TOLERANCE {
                    return Err(format!(
                        "{} profile {} ends at {}",
                        w.round_id,
                        p.respondent,
                        p.final_percent()
                    ));
                }
            }
        }
        for t in &self.tradeoffs {
            let mut totals = Vec::new();
            for input in &t.inputs {
                for scenario in &study.scenarios {
                    let ratings = input.ratings.get(&scenario.id).cloned().unwrap_or_default();
                    totals.push(
                        weighted_totals(
                            &input.respondent,
                            &ratings,
                            &input.weights,
                            study,
                            &scenario.id,
                        )
                        .map_err(|e| e.to_string())?,
                    );
                }
            }
            if totals.len() != t.totals.len() {
                return Err(format!("{} totals do not match inputs", t.label));
            }
            for (a, b) in totals.iter().zip(&t.totals) {
                if a.respondent_id != b.respondent_id
                    || a.scenario_id != b.scenario_id
                    || (a.harm_total - b.harm_total).abs() > TOL
                    || (a.benefit_total - b.benefit_total).abs() > TOL
                {
                    return Err(format!(
                        "{} totals for {}@{} do not recompute",
                        t.label, b.respondent_id, b.scenario_id
                    ));
                }
            }
            let points = tradeoff_points(&t.totals).map_err(|e| e.to_string())?;
            if points.len() != t.points.len() {
                return Err(format!("{} point count differs", t.label));
            }
            for (a, b) in points.iter().zip(&t.points) {
                if a.scenario_id != b.scenario_id
                    || (a.mean_harm - b.mean_harm).abs() > TOL
                    || (a.mean_benefit - b.mean_benefit).abs() > TOL
                {
                    return Err(format!(
                        "{} point {} does not recompute",
                        t.label, b.scenario_id
                    ));
                }
            }
            for ranking in &t.rankings {
                let again = rank_scenarios(&t.points, ranking.rule).map_err(|e| e.to_string())?;
                if &again != ranking {
                    return Err(format!(
                        "{} ranking {} does not recompute",
                        t.label, ranking.rule
                    ));
                }
            }
        }
        Ok(())
    }
}

fn alpha_outcome(scope: &str, m: &ResponseMatrix) -> AlphaOutcome {
    match cronbach_alpha(m) {
        Ok(r) => AlphaOutcome {
            scope: scope.to_string(),
            reliability: Some(r),
            error: None,
        },
        Err(e) => AlphaOutcome {
            scope: scope.to_string(),
            reliability: None,
            error: Some(e.code().to_string()),
        },
    }
}

fn latest<'a>(rounds: &[&'a Round], kind: RoundKind, span: Option<u32>) -> Option<&'a Round> {
    rounds
        .iter()
        .filter(|r| r.kind == kind)
        .filter(|r| span.is_none_or(|s| r.scale.as_ref().map(|x| x.canonical_max()) == Some(s)))
        .max_by_key(|r| r.wave_number)
        .copied()
}

pub fn build_report(engine: &DelphiEngine) -> Result<AnalysisReport, EngineError> {
    let study = engine.study();
    let roster = engine.roster();
    let rounds: Vec<&Round> = engine.rounds().filter(|r| r.state.has_results()).collect();

    let mut report = AnalysisReport {
        schema_version: SCHEMA_VERSION,
        study_id: study.id.clone(),
        variance_convention: VarianceConvention::Sample,
        rounds: Vec::new(),
        weights: Vec::new(),
        tradeoffs: Vec::new(),
        provenance: Provenance {
            engine: env!("CARGO_PKG_NAME").to_string(),
            engine_version: env!("CARGO_PKG_VERSION").to_string(),
            study_digest: canonical::digest(study).expect("study serializes"),
            inputs: Vec::new(),
        },
    };

    for round in &rounds {
        let submissions = engine.submissions(&round.id)?;
        let packet = engine.peek_feedback(&round.id)?;
        let by_alias: BTreeMap<&str, &Payload> = submissions
            .values()
            .map(|s| (alias_of(roster, &s.respondent_id), &s.payload))
            .collect();
        report.provenance.inputs.push(InputDigest {
            round_id: round.id.clone(),
            submissions_digest: canonical::digest(&by_alias).expect("payloads serialize"),
            feedback_digest: canonical::digest(packet).expect("packet serializes"),
        });

        if round.kind.is_rating() {
            let scale = round.scale.as_ref().ok_or(EngineError::ScaleRequired)?;
            let m = rating_matrix(study, roster, round, submissions)?;
            let mut reliability = vec![alpha_outcome("all", &m)];
            for scenario in &study.scenarios {
                let sub = m.for_scenario(&scenario.id);
                if sub.n_cols() > 0 {
                    reliability.push(alpha_outcome(&scenario.id, &sub));
                }
            }
            report.rounds.push(RoundAnalysis {
                round_id: round.id.clone(),
                kind: round.kind,
                wave_number: round.wave_number,
                scale_name: scale.name.clone(),
                scale_max: scale.canonical_max(),
                roster_size: packet.roster_size,
                submitted: packet.submitted,
                complete: packet.complete,
                exclusion_count: packet.exclusion_count,
                reliability,
                item_stats: packet
                    .item_stats
                    .clone()
                    .ok_or(EngineError::ScaleRequired)?,
                respondent_sums: packet.respondent_sum_stats.clone(),
            });
        } else {
            let (vectors, _) = complete_weight_vectors(study, submissions)?;
            let mut vectors: Vec<AliasWeights> = vectors
                .into_iter()
                .map(|v| AliasWeights {
                    respondent: alias_of(roster, &v.respondent_id).to_string(),
                    normalized_100: v.normalized_100,
                })
                .collect();
            vectors.sort_by(|a, b| a.respondent.cmp(&b.respondent));
            report.weights.push(WeightAnalysis {
                round_id: round.id.clone(),
                wave_number: round.wave_number,
                roster_size: packet.roster_size,
                submitted: packet.submitted,
                complete: packet.complete,
                exclusion_count: packet.exclusion_count,
                vectors,
                profiles: packet.weight_profiles.clone(),
            });
        }
    }

    let mut spans: Vec<u32> = Vec::new();
    for r in rounds
        .iter()
        .filter(|r| r.kind == RoundKind::HarmAssessment)
    {
        let span = r.scale.as_ref().map_or(0, |s| s.canonical_max());
        if !spans.contains(&span) {
            spans.push(span);
        }
    }
    for span in spans {
        let (Some(harm), Some(benefit), Some(weights)) = (
            latest(&rounds, RoundKind::HarmAssessment, Some(span)),
            latest(&rounds, RoundKind::BenefitAssessment, Some(span)),
            latest(&rounds, RoundKind::WeightElicitation, None),
        ) else {
            continue;
        };
        report
            .tradeoffs
            .push(tradeoff(engine, harm, benefit, weights)?);
    }

    canonical::canonicalize(&report).map_err(|e| EngineError::ArchiveCorrupt(e.to_string()))
}

fn tradeoff(
    engine: &DelphiEngine,
    harm: &Round,
    benefit: &Round,
    weight_round: &Round,
) -> Result<TradeoffAnalysis, EngineError> {
    let study = engine.study();
    let roster = engine.roster();
    let harm_subs = engine.submissions(&harm.id)?;
    let benefit_subs = engine.submissions(&benefit.id)?;
    let (vectors, _) = complete_weight_vectors(study, engine.submissions(&weight_round.id)?)?;
    let n_harm = round_items(study, RoundKind::HarmAssessment).len();
    let n_benefit = round_items(study, RoundKind::BenefitAssessment).len();

    let mut inputs = Vec::new();
    for v in &vectors {
        let (Some(h), Some(b)) = (
            harm_subs.get(&v.respondent_id),
            benefit_subs.get(&v.respondent_id),
        ) else {
            continue;
        };
        let (h, b) = (h.payload.rating_map(), b.payload.rating_map());
        if h.len() != n_harm || b.len() != n_benefit {
            continue;
        }
        let mut ratings: BTreeMap<String, BTreeMap<String, u32>> = BTreeMap::new();
        for (key, value) in h.into_iter().chain(b) {
            ratings
                .entry(key.scenario)
                .or_default()
                .insert(key.criterion, value);
        }
        inputs.push(RespondentInputs {
            respondent: alias_of(roster, &v.respondent_id).to_string(),
            weights: v.normalized_1.clone(),
            ratings,
        });
    }
    inputs.sort_by(|a, b| a.respondent.cmp(&b.respondent));

    let mut totals = Vec::new();
    for input in &inputs {
        for scenario in &study.scenarios {
            let ratings = input.ratings.get(&scenario.id).cloned().unwrap_or_default();
            let mut t = weighted_totals(
                &input.respondent,
                &ratings,
                &input.weights,
                study,
                &scenario.id,
            )?;
            t.harm_total = round_sig15(t.harm_total);
            t.benefit_total = round_sig15(t.benefit_total);
            totals.push(t);
        }
    }

    let mut points = if totals.is_empty() {
        Vec::new()
    } else {
        tradeoff_points(&totals)?
    };
    for p in &mut points {
        p.mean_harm = round_sig15(p.mean_harm);
        p.mean_benefit = round_sig15(p.mean_benefit);
        p.harm_over_benefit = p.harm_over_benefit.map(round_sig15);
    }
    let rankings = if points.len() >= 2 {
        RankingRule::ALL
            .iter()
            .map(|&rule| rank_scenarios(&points, rule))
            .collect::<Result<Vec<_>, _>>()?
    } else {
        Vec::new()
    };

    Ok(TradeoffAnalysis {
        label: harm
            .scale
            .as_ref()
            .map_or_else(String::new, |s| s.name.clone()),
        scale_max: harm.scale.as_ref().map_or(0, |s| s.canonical_max()),
        harm_round: harm.id.clone(),
        benefit_round: benefit.id.clone(),
        weight_round: weight_round.id.clone(),
        inputs,
        totals,
        points,
        rankings,
    })
}

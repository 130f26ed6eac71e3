//! Weighted harm/benefit totals, cohort tradeoff points and scenario ranking.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Polarity, StudyDefinition};

/// Allowed deviation of a normalized weight vector's sum from 1.
pub const UNIT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AggregationError {
    #[error("no rating for criterion {criterion} in scenario {scenario}")]
    MissingRating { criterion: String, scenario: String },
    #[error("no weight for criterion {0}")]
    MissingWeight(String),
    #[error("weights sum to {0}, expected 1")]
    UnnormalizedWeights(f64),
    #[error("unknown scenario {0}")]
    UnknownScenario(String),
    #[error("no totals to aggregate")]
    EmptyInput,
    #[error("{0} scenarios; ranking needs at least 2")]
    TooFewScenarios(usize),
    #[error("non-finite value for scenario {0}")]
    NonFinite(String),
}

impl AggregationError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::MissingRating { .. } => "MISSING_RATING",
            Self::MissingWeight(_) => "MISSING_WEIGHT",
            Self::UnnormalizedWeights(_) => "UNNORMALIZED_WEIGHTS",
            Self::UnknownScenario(_) => "UNKNOWN_SCENARIO",
            Self::EmptyInput => "EMPTY_INPUT",
            Self::TooFewScenarios(_) => "TOO_FEW_SCENARIOS",
            Self::NonFinite(_) => "NON_FINITE",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightedTotals {
    pub respondent_id: String,
    pub scenario_id: String,
    pub harm_total: f64,
    pub benefit_total: f64,
}

/// Dot products of one respondent's unit-sum weights with their canonical
/// ratings for one scenario. Benefits of the baseline scenario are not rated
/// and contribute zero.
pub fn weighted_totals(
    respondent_id: &str,
    ratings: &BTreeMap<String, u32>,
    weights: &BTreeMap<String, f64>,
    study: &StudyDefinition,
    scenario_id: &str,
) -> Result<WeightedTotals, AggregationError> {
    let scenario = study
        .scenario(scenario_id)
        .ok_or_else(|| AggregationError::UnknownScenario(scenario_id.to_string()))?;
    let weight_sum: f64 = weights.values().sum();
    if (weight_sum - 1.0).abs() > UNIT_SUM_TOLERANCE {
        return Err(AggregationError::UnnormalizedWeights(weight_sum));
    }

    let mut harm_total = 0.0;
    let mut benefit_total = 0.0;
    for c in &study.criteria {
        if c.polarity == Polarity::Benefit && scenario.is_baseline {
            continue;
        }
        let weight = *weights
            .get(&c.id)
            .ok_or_else(|| AggregationError::MissingWeight(c.id.clone()))?;
        let rating = *ratings
            .get(&c.id)
            .ok_or_else(|| AggregationError::MissingRating {
                criterion: c.id.clone(),
                scenario: scenario_id.to_string(),
            })?;
        let contribution = weight * f64::from(rating);
        match c.polarity {
            Polarity::Harm => harm_total += contribution,
            Polarity::Benefit => benefit_total += contribution,
        }
    }

    Ok(WeightedTotals {
        respondent_id: respondent_id.to_string(),
        scenario_id: scenario_id.to_string(),
        harm_total,
        benefit_total,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TradeoffPoint {
    pub scenario_id: String,
    pub mean_harm: f64,
    pub mean_benefit: f64,
    /// Undefined (None) when the mean benefit is not positive.
    pub harm_over_benefit: Option<f64>,
    pub n_respondents: usize,
}

impl TradeoffPoint {
    pub fn new(
        scenario_id: impl Into<String>,
        mean_harm: f64,
        mean_benefit: f64,
        n: usize,
    ) -> Self {
        Self {
            scenario_id: scenario_id.into(),
            mean_harm,
            mean_benefit,
            harm_over_benefit: (mean_benefit > 0.0).then(|| mean_harm / mean_benefit),
            n_respondents: n,
        }
    }

    pub fn net_score(&self) -> f64 {
        self.mean_benefit - self.mean_harm
    }

    /// At least as good on both axes and strictly better on one.
    pub fn dominates(&self, other: &TradeoffPoint) -> bool {
        self.mean_benefit >= other.mean_benefit
            && self.mean_harm <= other.mean_harm
            && (self.mean_benefit > other.mean_benefit || self.mean_harm < other.mean_harm)
    }
}

/// Cohort means per scenario, in order of first appearance.
pub fn tradeoff_points(totals: &[WeightedTotals]) -> Result<Vec<TradeoffPoint>, AggregationError> {
    if totals.is_empty() {
        return Err(AggregationError::EmptyInput);
    }
    let mut order: Vec<&str> = Vec::new();
    let mut acc: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
    for t in totals {
        let entry = acc.entry(t.scenario_id.as_str()).or_insert_with(|| {
            order.push(t.scenario_id.as_str());
            (0.0, 0.0, 0)
        });
        entry.0 += t.harm_total;
        entry.1 += t.benefit_total;
        entry.2 += 1;
    }
    Ok(order
        .into_iter()
        .map(|id| {
            let (h, b, n) = acc[id];
            TradeoffPoint::new(id, h / n as f64, b / n as f64, n)
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankingRule {
    /// Mean benefit minus mean harm, descending.
    #[default]
    NetScore,
    /// Harm-over-benefit, ascending; undefined ratios last.
    Ratio,
    /// Non-dominated sorting: front first, then successive fronts.
    ParetoOnly,
}

impl RankingRule {
    pub const ALL: [RankingRule; 3] = [Self::NetScore, Self::Ratio, Self::ParetoOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::NetScore => "net",
            Self::Ratio => "ratio",
            Self::ParetoOnly => "pareto",
        }
    }
}

impl fmt::Display for RankingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RankingRule {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "net" | "net_score" => Ok(Self::NetScore),
            "ratio" => Ok(Self::Ratio),
            "pareto" | "pareto_only" => Ok(Self::ParetoOnly),
            other => Err(format!(
                "unknown ranking rule {other:?} (expected net, ratio or pareto)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioRanking {
    pub rule: RankingRule,
    pub ordering: Vec<String>,
    /// Undominated scenarios, in ranking order.
    pub pareto_front: Vec<String>,
    /// Runs of scenarios whose primary key is equal, in ranking order.
    pub tie_groups: Vec<Vec<String>>,
}

/// Indices of the undominated points.
pub fn pareto_front(points: &[TradeoffPoint]) -> Vec<usize> {
    (0..points.len())
        .filter(|&i| !points.iter().any(|p| p.dominates(&points[i])))
        .collect()
}

/// Front index (0 = undominated) of each point under repeated peeling.
fn pareto_layers(points: &[TradeoffPoint]) -> Vec<usize> {
    let mut layer = vec![usize::MAX; points.len()];
    let mut current = 0;
    let mut remaining: Vec<usize> = (0..points.len()).collect();
    while !remaining.is_empty() {
        let front: Vec<usize> = remaining
            .iter()
            .copied()
            .filter(|&i| !remaining.iter().any(|&j| points[j].dominates(&points[i])))
            .collect();
        for &i in &front {
            layer[i] = current;
        }
        remaining.retain(|i| !front.contains(i));
        current += 1;
    }
    layer
}

/// Primary sort key: smaller is better. Zero is normalized so -0.0 ties +0.0.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Key(u8, f64);

impl Key {
    fn new(class: u8, v: f64) -> Self {
        Self(class, if v == 0.0 { 0.0 } else { v })
    }

    fn cmp(&self, other: &Self) -> Ordering {
        self.0.cmp(&other.0).then(self.1.total_cmp(&other.1))
    }
}

pub fn rank_scenarios(
    points: &[TradeoffPoint],
    rule: RankingRule,
) -> Result<ScenarioRanking, AggregationError> {
    if points.len() < 2 {
        return Err(AggregationError::TooFewScenarios(points.len()));
    }
    if let Some(p) = points
        .iter()
        .find(|p| !(p.mean_harm.is_finite() && p.mean_benefit.is_finite()))
    {
        return Err(AggregationError::NonFinite(p.scenario_id.clone()));
    }

    let keys: Vec<Key> = match rule {
        RankingRule::NetScore => points
            .iter()
            .map(|p| Key::new(0, p.mean_harm - p.mean_benefit))
            .collect(),
        RankingRule::Ratio => points
            .iter()
            .map(|p| match p.harm_over_benefit {
                Some(r) => Key::new(0, r),
                None => Key::new(1, 0.0),
            })
            .collect(),
        RankingRule::ParetoOnly => pareto_layers(points)
            .into_iter()
            .map(|l| Key::new(0, l as f64))
            .collect(),
    };

    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| {
        keys[a]
            .cmp(&keys[b])
            .then(points[a].mean_harm.total_cmp(&points[b].mean_harm))
            .then_with(|| points[a].scenario_id.cmp(&points[b].scenario_id))
    });

    let mut tie_groups = Vec::new();
    let mut start = 0;
    for end in 1..=idx.len() {
        if end == idx.len() || keys[idx[end]] != keys[idx[start]] {
            if end - start > 1 {
                tie_groups.push(
                    idx[start..end]
                        .iter()
                        .map(|&i| points[i].scenario_id.clone())
                        .collect(),
                );
            }
            start = end;
        }
    }

    let front = pareto_front(points);
    let ordering: Vec<String> = idx.iter().map(|&i| points[i].scenario_id.clone()).collect();
    let pareto_front = idx
        .iter()
        .filter(|i| front.contains(i))
        .map(|&i| points[i].scenario_id.clone())
        .collect();

    Ok(ScenarioRanking {
        rule,
        ordering,
        pareto_front,
        tie_groups,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_default_study, Criterion, Scenario};
    use proptest::prelude::*;

    fn small_study() -> StudyDefinition {
        let crit = |id: &str, polarity| Criterion {
            id: id.into(),
            label: id.into(),
            polarity,
            example: String::new(),
        };
        let scen = |id: &str, is_baseline| Scenario {
            id: id.into(),
            label: id.into(),
            description: String::new(),
            is_baseline,
        };
        StudyDefinition {
            id: "small".into(),
            title: "small".into(),
            criteria: vec![
                crit("h1", Polarity::Harm),
                crit("h2", Polarity::Harm),
                crit("b1", Polarity::Benefit),
                crit("b2", Polarity::Benefit),
            ],
            scenarios: vec![scen("base", true), scen("alt", false)],
            notes: String::new(),
        }
    }

    fn ratings(pairs: &[(&str, u32)]) -> BTreeMap<String, u32> {
        pairs.iter().map(|&(k, v)| (k.to_string(), v)).collect()
    }

    fn quarter_weights() -> BTreeMap<String, f64> {
        ["h1", "h2", "b1", "b2"]
            .iter()
            .map(|k| (k.to_string(), 0.25))
            .collect()
    }

    #[test]
    fn dot_product_example() {
        let r = ratings(&[("h1", 2), ("h2", 1), ("b1", 3), ("b2", 0)]);
        let t = weighted_totals("r1", &r, &quarter_weights(), &small_study(), "alt").unwrap();
        assert_eq!(t.harm_total, 0.75);
        assert_eq!(t.benefit_total, 0.75);
    }

    #[test]
    fn baseline_has_no_benefit() {
        let r = ratings(&[("h1", 3), ("h2", 2)]);
        let t = weighted_totals("r1", &r, &quarter_weights(), &small_study(), "base").unwrap();
        assert_eq!(t.benefit_total, 0.0);
        assert_eq!(t.harm_total, 1.25);
        let with_benefits = ratings(&[("h1", 3), ("h2", 2), ("b1", 3), ("b2", 3)]);
        let t = weighted_totals(
            "r1",
            &with_benefits,
            &quarter_weights(),
            &small_study(),
            "base",
        )
        .unwrap();
        assert_eq!(t.benefit_total, 0.0);
    }

    #[test]
    fn zero_ratings_zero_totals() {
        let r = ratings(&[("h1", 0), ("h2", 0), ("b1", 0), ("b2", 0)]);
        let t = weighted_totals("r1", &r, &quarter_weights(), &small_study(), "alt").unwrap();
        assert_eq!((t.harm_total, t.benefit_total), (0.0, 0.0));
    }

    #[test]
    fn weighted_totals_errors() {
        let study = small_study();
        let r = ratings(&[("h1", 2), ("h2", 1), ("b1", 3)]);
        let err = weighted_totals("r1", &r, &quarter_weights(), &study, "alt").unwrap_err();
        assert_eq!(err.code(), "MISSING_RATING");
        let mut w = quarter_weights();
        w.insert("h1".into(), 0.5);
        let err = weighted_totals("r1", &r, &w, &study, "alt").unwrap_err();
        assert_eq!(err.code(), "UNNORMALIZED_WEIGHTS");
        let err = weighted_totals("r1", &r, &quarter_weights(), &study, "zzz").unwrap_err();
        assert_eq!(err.code(), "UNKNOWN_SCENARIO");
    }

    fn totals(resp: &str, scen: &str, h: f64, b: f64) -> WeightedTotals {
        WeightedTotals {
            respondent_id: resp.into(),
            scenario_id: scen.into(),
            harm_total: h,
            benefit_total: b,
        }
    }

    #[test]
    fn tradeoff_examples() {
        let p = tradeoff_points(&[totals("r1", "alt", 0.75, 0.75)]).unwrap();
        assert_eq!((p[0].mean_harm, p[0].mean_benefit), (0.75, 0.75));
        assert_eq!(p[0].harm_over_benefit, Some(1.0));

        let p = tradeoff_points(&[
            totals("r1", "base", 1.0, 0.0),
            totals("r2", "base", 3.0, 0.0),
        ])
        .unwrap();
        assert_eq!(p[0].mean_harm, 2.0);
        assert_eq!(p[0].harm_over_benefit, None);
        assert_eq!(p[0].n_respondents, 2);

        assert_eq!(tradeoff_points(&[]).unwrap_err().code(), "EMPTY_INPUT");
    }

    #[test]
    fn net_score_and_dominance_two_points() {
        let a = TradeoffPoint::new("A", 1.0, 3.0, 1);
        let b = TradeoffPoint::new("B", 2.0, 1.0, 1);
        assert!(a.dominates(&b));
        assert!(!b.dominates(&a));
        let r = rank_scenarios(&[b.clone(), a.clone()], RankingRule::NetScore).unwrap();
        assert_eq!(r.ordering, ["A", "B"]);
        assert_eq!(r.pareto_front, ["A"]);
    }

    #[test]
    fn identical_points_form_a_tie_group() {
        let pts = [
            TradeoffPoint::new("Z", 1.0, 2.0, 1),
            TradeoffPoint::new("Y", 1.0, 2.0, 1),
            TradeoffPoint::new("X", 3.0, 0.5, 1),
        ];
        for rule in RankingRule::ALL {
            let r = rank_scenarios(&pts, rule).unwrap();
            assert_eq!(r.ordering[..2], ["Y", "Z"], "{rule}");
            assert_eq!(
                r.tie_groups,
                vec![vec!["Y".to_string(), "Z".to_string()]],
                "{rule}"
            );
        }
    }

    #[test]
    fn equal_net_broken_by_lower_harm() {
        let pts = [
            TradeoffPoint::new("A", 2.0, 4.0, 1),
            TradeoffPoint::new("B", 1.0, 3.0, 1),
        ];
        let r = rank_scenarios(&pts, RankingRule::NetScore).unwrap();
        assert_eq!(r.ordering, ["B", "A"]);
        assert_eq!(r.tie_groups.len(), 1);
    }

    #[test]
    fn undefined_ratio_sorts_last() {
        let pts = [
            TradeoffPoint::new("S-Q", 0.5, 0.0, 1),
            TradeoffPoint::new("U-F", 2.0, 1.0, 1),
            TradeoffPoint::new("R-F", 1.0, 2.0, 1),
        ];
        let r = rank_scenarios(&pts, RankingRule::Ratio).unwrap();
        assert_eq!(r.ordering, ["R-F", "U-F", "S-Q"]);
    }

    #[test]
    fn dominant_scenario_first_under_every_rule() {
        let pts = [
            TradeoffPoint::new("S-Q", 2.0, 0.0, 3),
            TradeoffPoint::new("U-F", 1.5, 1.0, 3),
            TradeoffPoint::new("R-P", 1.0, 1.5, 3),
            TradeoffPoint::new("R-F", 0.5, 2.0, 3),
        ];
        for rule in RankingRule::ALL {
            let r = rank_scenarios(&pts, rule).unwrap();
            assert_eq!(r.ordering[0], "R-F");
            assert_eq!(r.pareto_front, ["R-F"]);
        }
    }

    #[test]
    fn too_few_scenarios() {
        let err = rank_scenarios(
            &[TradeoffPoint::new("A", 1.0, 1.0, 1)],
            RankingRule::NetScore,
        )
        .unwrap_err();
        assert_eq!(err.code(), "TOO_FEW_SCENARIOS");
    }

    #[test]
    fn default_study_baseline_totals() {
        let study = build_default_study();
        let weights: BTreeMap<String, f64> = study
            .criteria
            .iter()
            .map(|c| (c.id.clone(), 1.0 / 21.0))
            .collect();
        let harms: BTreeMap<String, u32> = study
            .ids_with(Polarity::Harm)
            .into_iter()
            .map(|id| (id, 2))
            .collect();
        let t = weighted_totals("r", &harms, &weights, &study, "S-Q").unwrap();
        assert_eq!(t.benefit_total, 0.0);
        let p = tradeoff_points(&[t]).unwrap();
        assert_eq!(p[0].harm_over_benefit, None);
    }

    fn point_strategy() -> impl Strategy<Value = Vec<TradeoffPoint>> {
        // Coarse grid values force plenty of exact ties and dominance relations.
        prop::collection::vec((0u8..5, 0u8..5), 2..=6).prop_map(|v| {
            v.into_iter()
                .enumerate()
                .map(|(i, (h, b))| {
                    TradeoffPoint::new(format!("s{i}"), f64::from(h), f64::from(b), 1)
                })
                .collect()
        })
    }

    proptest! {
        #[test]
        fn pareto_front_is_exactly_the_undominated_set(points in point_strategy()) {
            for rule in RankingRule::ALL {
                let r = rank_scenarios(&points, rule).unwrap();
                prop_assert!(!r.pareto_front.is_empty());
                let mut sorted = r.ordering.clone();
                sorted.sort();
                let mut ids: Vec<String> = points.iter().map(|p| p.scenario_id.clone()).collect();
                ids.sort();
                prop_assert_eq!(sorted, ids);
                for p in &points {
                    let undominated = !points.iter().any(|q| q.dominates(p));
                    prop_assert_eq!(undominated, r.pareto_front.contains(&p.scenario_id));
                }
            }
        }

        #[test]
        fn pareto_ordering_never_puts_dominated_before_dominator(points in point_strategy()) {
            let r = rank_scenarios(&points, RankingRule::ParetoOnly).unwrap();
            let pos = |id: &str| r.ordering.iter().position(|o| o == id).unwrap();
            for a in &points {
                for b in &points {
                    if a.dominates(b) {
                        prop_assert!(pos(&a.scenario_id) < pos(&b.scenario_id));
                    }
                }
            }
        }
    }
}

//! Study definitions: criteria, scenarios, rating scales and the panel roster.
//!
//! The shipped template is the autonomous-vehicle impact study: 21 criteria
//! (13 harms, 8 benefits) assessed across four deployment scenarios, with the
//! status quo as the baseline against which benefits are not rated.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Soft upper bound on panel size for expert elicitation.
pub const RECOMMENDED_MAX_PANEL: usize = 19;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Harm,
    Benefit,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Criterion {
    pub id: String,
    pub label: String,
    pub polarity: Polarity,
    pub example: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub label: String,
    pub description: String,
    pub is_baseline: bool,
}

/// An integer rating scale. Ratings are stored remapped so the floor is 0.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaleDef {
    pub name: String,
    pub min: i64,
    pub max: i64,
    pub min_label: String,
    pub max_label: String,
}

impl ScaleDef {
    pub fn new(
        name: impl Into<String>,
        min: i64,
        max: i64,
        min_label: impl Into<String>,
        max_label: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            min,
            max,
            min_label: min_label.into(),
            max_label: max_label.into(),
        }
    }

    pub fn harm_four_point() -> Self {
        Self::new("4-point", 0, 3, "no harm", "extreme harm")
    }

    pub fn harm_ten_point() -> Self {
        Self::new("10-point", 1, 10, "no harm", "extreme harm")
    }

    pub fn benefit_four_point() -> Self {
        Self::new("4-point", 0, 3, "no benefit", "drastic benefits")
    }

    pub fn benefit_ten_point() -> Self {
        Self::new("10-point", 1, 10, "no benefit", "drastic benefits")
    }

    /// Largest canonical (0-floored) value on this scale.
    pub fn canonical_max(&self) -> u32 {
        (self.max - self.min) as u32
    }

    pub fn is_well_formed(&self) -> bool {
        self.min < self.max && !self.name.trim().is_empty()
    }

    pub fn contains(&self, value: i64) -> bool {
        (self.min..=self.max).contains(&value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyDefinition {
    pub id: String,
    pub title: String,
    pub criteria: Vec<Criterion>,
    pub scenarios: Vec<Scenario>,
    pub notes: String,
}

impl StudyDefinition {
    pub fn criterion(&self, id: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.id == id)
    }

    pub fn scenario(&self, id: &str) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.id == id)
    }

    pub fn baseline(&self) -> Option<&Scenario> {
        self.scenarios.iter().find(|s| s.is_baseline)
    }

    pub fn criteria_with(&self, polarity: Polarity) -> impl Iterator<Item = &Criterion> {
        self.criteria.iter().filter(move |c| c.polarity == polarity)
    }

    pub fn criterion_ids(&self) -> Vec<String> {
        self.criteria.iter().map(|c| c.id.clone()).collect()
    }

    /// Criterion ids of the given polarity, in study order.
    pub fn ids_with(&self, polarity: Polarity) -> Vec<String> {
        self.criteria_with(polarity).map(|c| c.id.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Respondent {
    pub id: String,
    pub display_alias: String,
}

impl Respondent {
    pub fn new(id: impl Into<String>, display_alias: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            display_alias: display_alias.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum FindingCode {
    EmptyId,
    EmptyLabel,
    DuplicateCriterionId,
    DuplicateScenarioId,
    MultipleBaselines,
    TooFewCriteria,
    TooFewScenarios,
    NoHarmCriterion,
    DuplicateRespondentId,
    DuplicateAlias,
    AliasExposesId,
    PanelAboveGuidance,
}

impl FindingCode {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::EmptyId => "EMPTY_ID",
            Self::EmptyLabel => "EMPTY_LABEL",
            Self::DuplicateCriterionId => "DUPLICATE_CRITERION_ID",
            Self::DuplicateScenarioId => "DUPLICATE_SCENARIO_ID",
            Self::MultipleBaselines => "MULTIPLE_BASELINES",
            Self::TooFewCriteria => "TOO_FEW_CRITERIA",
            Self::TooFewScenarios => "TOO_FEW_SCENARIOS",
            Self::NoHarmCriterion => "NO_HARM_CRITERION",
            Self::DuplicateRespondentId => "DUPLICATE_RESPONDENT_ID",
            Self::DuplicateAlias => "DUPLICATE_ALIAS",
            Self::AliasExposesId => "ALIAS_EXPOSES_ID",
            Self::PanelAboveGuidance => "PANEL_ABOVE_GUIDANCE",
        }
    }
}

impl fmt::Display for FindingCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Finding {
    pub code: FindingCode,
    pub severity: Severity,
    /// Offending id, or the study id for study-wide findings.
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({}): {}", self.code, self.subject, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidationReport {
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn push(&mut self, code: FindingCode, severity: Severity, subject: &str, message: String) {
        self.findings.push(Finding {
            code,
            severity,
            subject: subject.to_string(),
            message,
        });
    }

    /// True when no error-severity findings are present. Warnings do not block.
    pub fn is_valid(&self) -> bool {
        self.errors().next().is_none()
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings
            .iter()
            .filter(|f| f.severity == Severity::Error)
    }

    pub fn has(&self, code: FindingCode) -> bool {
        self.findings.iter().any(|f| f.code == code)
    }
}

/// Check every structural invariant of a study definition.
pub fn validate_study(def: &StudyDefinition) -> ValidationReport {
    let mut report = ValidationReport::default();
    let err = Severity::Error;

    if def.id.trim().is_empty() {
        report.push(FindingCode::EmptyId, err, "", "study id is empty".into());
    }
    if def.criteria.len() < 2 {
        report.push(
            FindingCode::TooFewCriteria,
            err,
            &def.id,
            format!(
                "{} criteria defined, at least 2 required",
                def.criteria.len()
            ),
        );
    }
    if def.scenarios.len() < 2 {
        report.push(
            FindingCode::TooFewScenarios,
            err,
            &def.id,
            format!(
                "{} scenarios defined, at least 2 required",
                def.scenarios.len()
            ),
        );
    }
    if def.criteria_with(Polarity::Harm).next().is_none() {
        report.push(
            FindingCode::NoHarmCriterion,
            err,
            &def.id,
            "no criterion has harm polarity".into(),
        );
    }

    let mut seen = BTreeSet::new();
    for c in &def.criteria {
        if c.id.trim().is_empty() {
            report.push(
                FindingCode::EmptyId,
                err,
                &c.id,
                "criterion id is empty".into(),
            );
        }
        if c.label.trim().is_empty() {
            report.push(
                FindingCode::EmptyLabel,
                err,
                &c.id,
                "criterion label is empty".into(),
            );
        }
        if !seen.insert(c.id.as_str()) {
            report.push(
                FindingCode::DuplicateCriterionId,
                err,
                &c.id,
                format!("criterion id {} appears more than once", c.id),
            );
        }
    }

    let mut seen = BTreeSet::new();
    for s in &def.scenarios {
        if s.id.trim().is_empty() {
            report.push(
                FindingCode::EmptyId,
                err,
                &s.id,
                "scenario id is empty".into(),
            );
        }
        if s.label.trim().is_empty() {
            report.push(
                FindingCode::EmptyLabel,
                err,
                &s.id,
                "scenario label is empty".into(),
            );
        }
        if !seen.insert(s.id.as_str()) {
            report.push(
                FindingCode::DuplicateScenarioId,
                err,
                &s.id,
                format!("scenario id {} appears more than once", s.id),
            );
        }
    }

    let baselines: Vec<&Scenario> = def.scenarios.iter().filter(|s| s.is_baseline).collect();
    if baselines.len() > 1 {
        for s in &baselines[1..] {
            report.push(
                FindingCode::MultipleBaselines,
                err,
                &s.id,
                format!(
                    "{} baseline scenarios; at most one allowed",
                    baselines.len()
                ),
            );
        }
    }

    report
}

/// Roster checks. Exceeding the recommended panel size is a warning only.
pub fn validate_roster(roster: &[Respondent]) -> ValidationReport {
    let mut report = ValidationReport::default();
    let err = Severity::Error;
    let ids: BTreeSet<&str> = roster.iter().map(|r| r.id.as_str()).collect();

    let mut seen_ids = BTreeSet::new();
    let mut seen_aliases = BTreeSet::new();
    for r in roster {
        if r.id.trim().is_empty() {
            report.push(
                FindingCode::EmptyId,
                err,
                &r.id,
                "respondent id is empty".into(),
            );
        }
        if r.display_alias.trim().is_empty() {
            report.push(
                FindingCode::EmptyLabel,
                err,
                &r.id,
                "respondent alias is empty".into(),
            );
        }
        if !seen_ids.insert(r.id.as_str()) {
            report.push(
                FindingCode::DuplicateRespondentId,
                err,
                &r.id,
                format!("respondent id {} appears more than once", r.id),
            );
        }
        if !seen_aliases.insert(r.display_alias.as_str()) {
            report.push(
                FindingCode::DuplicateAlias,
                err,
                &r.id,
                format!("alias {} is shared by several respondents", r.display_alias),
            );
        }
        if ids.contains(r.display_alias.as_str()) {
            report.push(
                FindingCode::AliasExposesId,
                err,
                &r.id,
                "alias coincides with a respondent id".into(),
            );
        }
    }

    if roster.len() > RECOMMENDED_MAX_PANEL {
        report.push(
            FindingCode::PanelAboveGuidance,
            Severity::Warning,
            "",
            format!(
                "panel of {} exceeds the recommended maximum of {}",
                roster.len(),
                RECOMMENDED_MAX_PANEL
            ),
        );
    }
    report
}

const DEFAULT_CRITERIA: [(&str, Polarity, &str, &str); 21] = [
    (
        "Q1",
        Polarity::Harm,
        "Harms of vehicle related mortality",
        "driver or passenger deaths on the road",
    ),
    (
        "Q2",
        Polarity::Harm,
        "Harms of vehicle specific damage",
        "costs of damage to property",
    ),
    (
        "Q3",
        Polarity::Harm,
        "Harms of vehicle related damage",
        "damage to natural environment",
    ),
    (
        "Q4",
        Polarity::Harm,
        "Harms of vehicle system encroachment on human living",
        "reduction of urban walkability",
    ),
    (
        "Q5",
        Polarity::Harm,
        "Harms of vehicle related occupational injuries",
        "sedentary lifestyle of drivers",
    ),
    (
        "Q6",
        Polarity::Harm,
        "Harms of vehicle related lack of status",
        "elderly losing driver’s licenses due to visual impairments",
    ),
    (
        "Q7",
        Polarity::Harm,
        "Harms of vehicle related loss of time or productivity",
        "time spent in traffic jams",
    ),
    (
        "Q8",
        Polarity::Harm,
        "Harms of vehicle related loss of social engagement",
        "time spent isolated from others",
    ),
    (
        "Q9",
        Polarity::Harm,
        "Harms of vehicle related injury to others",
        "hit and run incidents",
    ),
    (
        "Q10",
        Polarity::Harm,
        "Harms of vehicle related economic costs",
        "maintenance costs",
    ),
    (
        "Q11",
        Polarity::Harm,
        "Harms of vehicle related changes to community",
        "marginalization of specific communities",
    ),
    (
        "Q12",
        Polarity::Harm,
        "Harms of vehicle related crime opportunities",
        "sexual assault by ride-hailing service drivers or passengers",
    ),
    (
        "Q13",
        Polarity::Harm,
        "Harms of vehicle related economic changes",
        "loss of jobs by drivers",
    ),
    (
        "Q14",
        Polarity::Benefit,
        "Benefits of promoting societal value",
        "increase in economic activity",
    ),
    (
        "Q15",
        Polarity::Benefit,
        "Benefits of minimizing negative societal impacts",
        "decrease in pedestrian injury and death",
    ),
    (
        "Q16",
        Polarity::Benefit,
        "Protecting the interests of users",
        "drivers",
    ),
    (
        "Q17",
        Polarity::Benefit,
        "Advancing the preservation of the environment",
        "reducing traffic jams",
    ),
    (
        "Q18",
        Polarity::Benefit,
        "Maximizing the progress of science and technology",
        "increasing data quality",
    ),
    (
        "Q19",
        Polarity::Benefit,
        "Engaging relevant communities",
        "pedestrians, business communities",
    ),
    (
        "Q20",
        Polarity::Benefit,
        "Ensuring oversight and accountability",
        "preventing or limiting irresponsible uses",
    ),
    (
        "Q21",
        Polarity::Benefit,
        "Recognizing appropriate governmental and policy roles",
        "bringing public attention to transportation issues",
    ),
];

const DEFAULT_SCENARIOS: [(&str, &str, &str, bool); 4] = [
    ("S-Q", "Status Quo", "The transportation system as it is currently, with non-AVs.", true),
    (
        "U-F",
        "Unfettered AVs",
        "A transportation system in which there is no regulation and so implementation is unfettered and left to commercial entities (i.e., the tech industry).",
        false,
    ),
    (
        "R-P",
        "Regulated privately owned AVs",
        "A transportation system which is regulated so that AVs are owned much like traditional passenger vehicles. They must be inspected and there are only certain “areas” where they can be operated.",
        false,
    ),
    (
        "R-F",
        "Regulated fleet owned AVs",
        "A transportation system which is regulated so that AVs are owned only by commercial fleets, with stringent inspections, and there are designated areas where they can be operated.",
        false,
    ),
];

/// The autonomous-vehicle impact study template.
pub fn build_default_study() -> StudyDefinition {
    let criteria = DEFAULT_CRITERIA
        .iter()
        .map(|&(id, polarity, label, example)| Criterion {
            id: id.to_string(),
            label: label.to_string(),
            polarity,
            example: example.to_string(),
        })
        .collect();
    let scenarios = DEFAULT_SCENARIOS
        .iter()
        .map(|&(id, label, description, is_baseline)| Scenario {
            id: id.to_string(),
            label: label.to_string(),
            description: description.to_string(),
            is_baseline,
        })
        .collect();
    StudyDefinition {
        id: "maia-av".to_string(),
        title: "Multi-Attribute Impact Assessment of autonomous vehicle deployment".to_string(),
        criteria,
        scenarios,
        notes: "In scenarios U-F, R-P and R-F, traditional non-autonomous vehicles continue to \
                operate alongside AVs. Benefits are not assessed for the status quo baseline."
            .to_string(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_study_counts() {
        let study = build_default_study();
        assert_eq!(study.criteria.len(), 21);
        assert_eq!(study.criteria_with(Polarity::Harm).count(), 13);
        assert_eq!(study.criteria_with(Polarity::Benefit).count(), 8);
        assert_eq!(study.scenarios.len(), 4);
        let baselines: Vec<_> = study.scenarios.iter().filter(|s| s.is_baseline).collect();
        assert_eq!(baselines.len(), 1);
        assert_eq!(baselines[0].id, "S-Q");
    }

    #[test]
    fn default_study_ids_follow_numbering() {
        let study = build_default_study();
        for (i, c) in study.criteria.iter().enumerate() {
            assert_eq!(c.id, format!("Q{}", i + 1));
            let expected = if i < 13 {
                Polarity::Harm
            } else {
                Polarity::Benefit
            };
            assert_eq!(c.polarity, expected);
        }
        let ids: Vec<_> = study.scenarios.iter().map(|s| s.id.as_str()).collect();
        assert_eq!(ids, ["S-Q", "U-F", "R-P", "R-F"]);
    }

    #[test]
    fn q6_is_lack_of_status() {
        let study = build_default_study();
        assert!(study
            .criterion("Q6")
            .unwrap()
            .label
            .contains("lack of status"));
    }

    #[test]
    fn default_study_is_deterministic_and_valid() {
        assert_eq!(build_default_study(), build_default_study());
        assert!(validate_study(&build_default_study()).findings.is_empty());
    }

    #[test]
    fn duplicate_criterion_is_reported() {
        let mut study = build_default_study();
        study.criteria[1].id = "Q1".into();
        let report = validate_study(&study);
        assert!(!report.is_valid());
        let f = report
            .findings
            .iter()
            .find(|f| f.code == FindingCode::DuplicateCriterionId)
            .unwrap();
        assert_eq!(f.subject, "Q1");
    }

    #[test]
    fn two_baselines_are_reported() {
        let mut study = build_default_study();
        study.scenarios[3].is_baseline = true;
        let report = validate_study(&study);
        assert!(report.has(FindingCode::MultipleBaselines));
        assert_eq!(report.findings[0].subject, "R-F");
    }

    #[test]
    fn zero_baselines_is_fine() {
        let mut study = build_default_study();
        study.scenarios[0].is_baseline = false;
        assert!(validate_study(&study).findings.is_empty());
    }

    #[test]
    fn benefit_only_study_rejected() {
        let mut study = build_default_study();
        study.criteria.retain(|c| c.polarity == Polarity::Benefit);
        assert!(validate_study(&study).has(FindingCode::NoHarmCriterion));
    }

    #[test]
    fn tiny_study_rejected() {
        let mut study = build_default_study();
        study.criteria.truncate(1);
        study.scenarios.truncate(1);
        let report = validate_study(&study);
        assert!(report.has(FindingCode::TooFewCriteria));
        assert!(report.has(FindingCode::TooFewScenarios));
    }

    #[test]
    fn large_panel_is_only_a_warning() {
        let roster: Vec<_> = (1..=20)
            .map(|i| Respondent::new(format!("r{i:02}"), format!("P{i:02}")))
            .collect();
        let report = validate_roster(&roster);
        assert!(report.is_valid());
        assert!(report.has(FindingCode::PanelAboveGuidance));
        assert!(validate_roster(&roster[..19]).findings.is_empty());
    }

    #[test]
    fn alias_equal_to_id_rejected() {
        let roster = vec![Respondent::new("a", "b"), Respondent::new("b", "c")];
        let report = validate_roster(&roster);
        assert!(report.has(FindingCode::AliasExposesId));
        assert!(!report.is_valid());
    }

    #[test]
    fn scale_canonical_range() {
        assert_eq!(ScaleDef::harm_ten_point().canonical_max(), 9);
        assert_eq!(ScaleDef::harm_four_point().canonical_max(), 3);
        assert!(!ScaleDef::new("bad", 3, 3, "", "").is_well_formed());
    }
}

//! Seeded synthetic panel data in which one scenario strictly dominates.
//!
//! Every respondent rates the dominant scenario strictly lower on every harm
//! and strictly higher on every benefit than any other scenario, and gives
//! every criterion a positive weight. Weighted totals then dominate per
//! respondent, so the cohort point dominates under any weights.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::delphi::RawRating;
use crate::io::responses::ResponseSet;
use crate::model::{build_default_study, Polarity, ScaleDef, StudyDefinition};

pub const FIXTURE_PANEL: usize = 19;
pub const DOMINANT_SCENARIO: &str = "R-F";

#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub study: StudyDefinition,
    pub harm_scale: ScaleDef,
    pub benefit_scale: ScaleDef,
    pub harm: ResponseSet,
    pub benefit: ResponseSet,
    pub weights: ResponseSet,
    pub dominant: String,
}

pub fn respondent_ids(n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("r{i:02}")).collect()
}

pub fn dominant_fixture(seed: u64) -> Fixture {
    let study = build_default_study();
    let harm_scale = ScaleDef::harm_four_point();
    let benefit_scale = ScaleDef::benefit_four_point();
    let top = harm_scale.max;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    let mut harm = BTreeMap::new();
    let mut benefit = BTreeMap::new();
    let mut weights = BTreeMap::new();
    for id in respondent_ids(FIXTURE_PANEL) {
        let mut h = Vec::new();
        let mut b = Vec::new();
        for c in &study.criteria {
            let (low, high) = match c.polarity {
                Polarity::Harm => {
                    let d = rng.random_range(harm_scale.min..top);
                    (d, d)
                }
                Polarity::Benefit => {
                    let d = rng.random_range(benefit_scale.min + 1..=benefit_scale.max);
                    (d, d)
                }
            };
            for s in &study.scenarios {
                let value = match c.polarity {
                    Polarity::Harm if s.id == DOMINANT_SCENARIO => low,
                    Polarity::Harm => rng.random_range(low + 1..=top),
                    Polarity::Benefit if s.is_baseline => continue,
                    Polarity::Benefit if s.id == DOMINANT_SCENARIO => high,
                    Polarity::Benefit => rng.random_range(benefit_scale.min..high),
                };
                let cell = RawRating {
                    criterion: c.id.clone(),
                    scenario: s.id.clone(),
                    value,
                };
                match c.polarity {
                    Polarity::Harm => h.push(cell),
                    Polarity::Benefit => b.push(cell),
                }
            }
        }
        // Respondents answer on their own free scale.
        let factor = [1.0, 10.0, 100.0][rng.random_range(0..3)];
        let w: BTreeMap<String, f64> = study
            .criteria
            .iter()
            .map(|c| {
                (
                    c.id.clone(),
                    factor * f64::from(rng.random_range(1u32..=10)),
                )
            })
            .collect();
        harm.insert(id.clone(), h);
        benefit.insert(id.clone(), b);
        weights.insert(id, w);
    }

    Fixture {
        study,
        harm_scale,
        benefit_scale,
        harm: ResponseSet::Ratings(harm),
        benefit: ResponseSet::Ratings(benefit),
        weights: ResponseSet::Weights(weights),
        dominant: DOMINANT_SCENARIO.to_string(),
    }
}

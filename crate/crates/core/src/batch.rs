//! Drive a complete study through the engine from response files.
//!
//! Each round is opened, filled from its response set, closed, reviewed and
//! briefed in the order given, on a fixed step clock so runs are repeatable.
//! Respondents are registered in id order with aliases `P01`, `P02`, ...

use std::collections::BTreeSet;
use std::sync::Arc;

use crate::clock::StepClock;
use crate::delphi::{DelphiEngine, EngineError, RoundKind};
use crate::io::responses::ResponseSet;
use crate::model::{Respondent, ScaleDef, StudyDefinition};

#[derive(Debug, Clone, PartialEq)]
pub struct BatchRound {
    pub kind: RoundKind,
    pub scale: Option<ScaleDef>,
    pub responses: ResponseSet,
}

pub fn alias_for(index: usize, panel: usize) -> String {
    let width = panel.max(1).to_string().len().max(2);
    format!("P{:0width$}", index + 1)
}

/// The roster a batch run registers.
pub fn batch_roster(rounds: &[BatchRound]) -> Vec<Respondent> {
    let ids: BTreeSet<&str> = rounds
        .iter()
        .flat_map(|r| r.responses.respondents())
        .collect();
    ids.iter()
        .enumerate()
        .map(|(i, id)| Respondent::new(*id, alias_for(i, ids.len())))
        .collect()
}

pub fn run_batch(
    study: StudyDefinition,
    rounds: &[BatchRound],
) -> Result<DelphiEngine, EngineError> {
    let mut engine = DelphiEngine::create(study, Arc::new(StepClock::fixed()))?;
    for r in batch_roster(rounds) {
        engine.register_respondent(r)?;
    }
    for r in rounds {
        let wave = engine.rounds().filter(|x| x.kind == r.kind).count() as u32 + 1;
        let round = engine.open_round(r.kind, wave, r.scale.clone())?;
        for (respondent, payload) in r.responses.payloads() {
            engine.submit(&round.id, &respondent, payload)?;
        }
        engine.close(&round.id)?;
        engine.feedback(&round.id)?;
        engine.mark_briefed(&round.id)?;
    }
    Ok(engine)
}

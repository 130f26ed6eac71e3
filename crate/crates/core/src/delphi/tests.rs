use super::*;
use crate::clock::StepClock;
use crate::model::build_default_study;

const IDS: [&str; 3] = ["resp-alice-7f3", "resp-bashir-c21", "resp-chen-9a0"];

fn engine() -> DelphiEngine {
    let mut e = DelphiEngine::create(build_default_study(), Arc::new(StepClock::fixed())).unwrap();
    for (i, id) in IDS.iter().enumerate() {
        e.register_respondent(Respondent::new(*id, format!("P{:02}", i + 1)))
            .unwrap();
    }
    e
}

fn harm_payload(study: &StudyDefinition, seed: i64) -> RawPayload {
    RawPayload::Ratings {
        ratings: round_items(study, RoundKind::HarmAssessment)
            .into_iter()
            .enumerate()
            .map(|(i, k)| RawRating {
                criterion: k.criterion,
                scenario: k.scenario,
                value: (i as i64 * 7 + seed) % 4,
            })
            .collect(),
    }
}

fn weights_payload(study: &StudyDefinition, scale: f64) -> RawPayload {
    RawPayload::Weights {
        weights: study
            .criteria
            .iter()
            .enumerate()
            .map(|(i, c)| (c.id.clone(), scale * (1 + i % 5) as f64))
            .collect(),
    }
}

fn digest_of(e: &DelphiEngine) -> String {
    canonical::digest(&e.archive()).unwrap()
}

/// An engine whose single harm round has reached `state`.
fn in_state(state: RoundState) -> DelphiEngine {
    let mut e = engine();
    e.create_round(
        RoundKind::HarmAssessment,
        1,
        Some(ScaleDef::harm_four_point()),
    )
    .unwrap();
    if state == RoundState::Draft {
        return e;
    }
    e.open("harm-1").unwrap();
    let study = e.study().clone();
    for (i, id) in IDS.iter().enumerate() {
        e.submit("harm-1", id, harm_payload(&study, i as i64))
            .unwrap();
    }
    if state == RoundState::Open {
        return e;
    }
    e.close("harm-1").unwrap();
    e.feedback("harm-1").unwrap();
    if state == RoundState::Closed {
        return e;
    }
    e.mark_briefed("harm-1").unwrap();
    e
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Open,
    Submit,
    Close,
    Brief,
}

fn run(e: &mut DelphiEngine, op: Op) -> Result<(), EngineError> {
    let study = e.study().clone();
    match op {
        Op::Open => e.open("harm-1").map(drop),
        Op::Submit => e
            .submit("harm-1", IDS[0], harm_payload(&study, 3))
            .map(drop),
        Op::Close => e.close("harm-1").map(drop),
        Op::Brief => {
            let _ = e.feedback("harm-1");
            e.mark_briefed("harm-1").map(drop)
        }
    }
}

#[test]
fn exhaustive_state_operation_table() {
    use RoundState::*;
    let legal = [
        (Draft, Op::Open, Open),
        (Open, Op::Submit, Open),
        (Open, Op::Close, Closed),
        (Closed, Op::Brief, Briefed),
    ];
    let mut mutating = 0;
    for state in RoundState::ALL {
        for op in [Op::Open, Op::Submit, Op::Close, Op::Brief] {
            let mut e = in_state(state);
            let before = digest_of(&e);
            let result = run(&mut e, op);
            let after = digest_of(&e);
            match legal.iter().find(|(s, o, _)| *s == state && *o == op) {
                Some((_, _, next)) => {
                    assert!(result.is_ok(), "{state:?} x {op:?}: {result:?}");
                    assert_eq!(e.round("harm-1").unwrap().state, *next);
                    assert_ne!(before, after);
                    mutating += 1;
                }
                None => {
                    let err = result.expect_err(&format!("{state:?} x {op:?} must fail"));
                    let expected = match op {
                        Op::Open => "ROUND_NOT_DRAFT",
                        Op::Submit | Op::Close => "ROUND_NOT_OPEN",
                        Op::Brief => "NOT_CLOSED",
                    };
                    assert_eq!(err.code(), expected, "{state:?} x {op:?}");
                    assert_eq!(err.class(), ErrorClass::Conflict);
                    assert_eq!(before, after, "{state:?} x {op:?} mutated the archive");
                    assert_eq!(e.round("harm-1").unwrap().state, state);
                }
            }
        }
    }
    assert_eq!(mutating, 4);
}

#[test]
fn brief_requires_feedback_retrieval() {
    let mut e = in_state(RoundState::Open);
    e.close("harm-1").unwrap();
    assert_eq!(
        e.mark_briefed("harm-1").unwrap_err().code(),
        "FEEDBACK_NEVER_RETRIEVED"
    );
    e.peek_feedback("harm-1").unwrap();
    assert!(!e.feedback_retrieved("harm-1"));
    e.feedback("harm-1").unwrap();
    assert_eq!(e.mark_briefed("harm-1").unwrap().state, RoundState::Briefed);
}

#[test]
fn feedback_unavailable_before_close() {
    let mut e = in_state(RoundState::Open);
    assert_eq!(
        e.feedback("harm-1").unwrap_err().code(),
        "FEEDBACK_UNAVAILABLE"
    );
    assert_eq!(e.feedback("harm-9").unwrap_err().code(), "UNKNOWN_ROUND");
}

#[test]
fn next_wave_waits_for_briefing() {
    let mut e = in_state(RoundState::Open);
    let ten = ScaleDef::harm_ten_point();
    let err = e
        .open_round(RoundKind::HarmAssessment, 2, Some(ten.clone()))
        .unwrap_err();
    assert_eq!(err.code(), "PREDECESSOR_NOT_BRIEFED");
    assert!(
        e.round("harm-2").is_err(),
        "failed open_round must not create"
    );

    e.create_round(RoundKind::HarmAssessment, 2, Some(ten.clone()))
        .unwrap();
    assert_eq!(
        e.open("harm-2").unwrap_err().code(),
        "PREDECESSOR_NOT_BRIEFED"
    );
    e.close("harm-1").unwrap();
    assert_eq!(
        e.open("harm-2").unwrap_err().code(),
        "PREDECESSOR_NOT_BRIEFED"
    );
    e.feedback("harm-1").unwrap();
    e.mark_briefed("harm-1").unwrap();
    assert_eq!(e.open("harm-2").unwrap().state, RoundState::Open);

    let err = e
        .create_round(RoundKind::HarmAssessment, 4, Some(ten))
        .unwrap_err();
    assert_eq!(err.code(), "WAVE_OUT_OF_SEQUENCE");
    // Waves of other kinds are independent.
    e.open_round(RoundKind::WeightElicitation, 1, None).unwrap();
}

#[test]
fn round_scale_rules() {
    let mut e = engine();
    let code = |r: Result<Round, EngineError>| r.unwrap_err().code();
    assert_eq!(
        code(e.create_round(RoundKind::HarmAssessment, 1, None)),
        "SCALE_REQUIRED"
    );
    assert_eq!(
        code(e.create_round(
            RoundKind::WeightElicitation,
            1,
            Some(ScaleDef::harm_four_point())
        )),
        "SCALE_FORBIDDEN"
    );
    let bad = ScaleDef::new("flat", 3, 3, "a", "b");
    assert_eq!(
        code(e.create_round(RoundKind::BenefitAssessment, 1, Some(bad))),
        "INVALID_SCALE"
    );
    assert!(e.rounds().next().is_none());
}

#[test]
fn submission_validation() {
    let mut e = engine();
    e.open_round(
        RoundKind::HarmAssessment,
        1,
        Some(ScaleDef::harm_ten_point()),
    )
    .unwrap();
    e.open_round(RoundKind::WeightElicitation, 1, None).unwrap();
    let study = e.study().clone();
    let before = digest_of(&e);
    let rating = |c: &str, s: &str, v: i64| RawRating {
        criterion: c.into(),
        scenario: s.into(),
        value: v,
    };
    let ratings = |r: Vec<RawRating>| RawPayload::Ratings { ratings: r };
    let cases: Vec<(&str, &str, RawPayload, &str)> = vec![
        (
            "harm-1",
            "nobody",
            ratings(vec![rating("Q1", "S-Q", 1)]),
            "UNKNOWN_RESPONDENT",
        ),
        (
            "harm-7",
            IDS[0],
            ratings(vec![rating("Q1", "S-Q", 1)]),
            "UNKNOWN_ROUND",
        ),
        (
            "harm-1",
            IDS[0],
            weights_payload(&study, 1.0),
            "PAYLOAD_KIND_MISMATCH",
        ),
        (
            "weights-1",
            IDS[0],
            ratings(vec![rating("Q1", "S-Q", 1)]),
            "PAYLOAD_KIND_MISMATCH",
        ),
        ("harm-1", IDS[0], ratings(vec![]), "EMPTY_PAYLOAD"),
        (
            "harm-1",
            IDS[0],
            ratings(vec![rating("Q14", "R-F", 1)]),
            "UNKNOWN_ITEM",
        ),
        (
            "harm-1",
            IDS[0],
            ratings(vec![rating("Q1", "Z", 1)]),
            "UNKNOWN_ITEM",
        ),
        (
            "harm-1",
            IDS[0],
            ratings(vec![rating("Q1", "S-Q", 1), rating("Q1", "S-Q", 2)]),
            "DUPLICATE_CELL",
        ),
        (
            "harm-1",
            IDS[0],
            ratings(vec![rating("Q1", "S-Q", 0)]),
            "VALUE_OUT_OF_RANGE",
        ),
        (
            "harm-1",
            IDS[0],
            ratings(vec![rating("Q1", "S-Q", 11)]),
            "VALUE_OUT_OF_RANGE",
        ),
        (
            "weights-1",
            IDS[0],
            RawPayload::Weights {
                weights: [("Q1".to_string(), 0.0), ("Q2".to_string(), 0.0)].into(),
            },
            "ALL_ZERO_WEIGHTS",
        ),
        (
            "weights-1",
            IDS[0],
            RawPayload::Weights {
                weights: [("Q1".to_string(), -1.0)].into(),
            },
            "VALUE_OUT_OF_RANGE",
        ),
        (
            "weights-1",
            IDS[0],
            RawPayload::Weights {
                weights: [("Q99".to_string(), 1.0)].into(),
            },
            "UNKNOWN_ITEM",
        ),
        (
            "weights-1",
            IDS[0],
            RawPayload::Weights {
                weights: BTreeMap::new(),
            },
            "EMPTY_PAYLOAD",
        ),
    ];
    for (round, who, payload, code) in cases {
        let err = e.submit(round, who, payload).unwrap_err();
        assert_eq!(err.code(), code);
    }
    assert_eq!(before, digest_of(&e), "rejected submissions leave no trace");

    // On the 1-10 scale the floor remaps to 0.
    let ack = e
        .submit("harm-1", IDS[0], ratings(vec![rating("Q1", "S-Q", 1)]))
        .unwrap();
    assert!(!ack.complete && !ack.replaced);
    let stored = e.submission("harm-1", IDS[0]).unwrap();
    assert_eq!(
        stored
            .payload
            .rating_map()
            .values()
            .copied()
            .collect::<Vec<_>>(),
        vec![0]
    );
}

#[test]
fn last_write_wins_with_audit_history() {
    let mut e = in_state(RoundState::Open);
    let study = e.study().clone();
    let ack = e.submit("harm-1", IDS[1], harm_payload(&study, 2)).unwrap();
    assert!(ack.replaced && ack.complete);
    assert_eq!(e.submissions("harm-1").unwrap().len(), 3);
    let history: Vec<_> = e
        .history("harm-1")
        .unwrap()
        .iter()
        .filter(|h| h.respondent_id == IDS[1])
        .collect();
    assert_eq!(history.len(), 2);
    assert_eq!(
        e.submission("harm-1", IDS[1]).unwrap().payload,
        history[1].submission.as_ref().unwrap().payload
    );

    e.retract("harm-1", IDS[2]).unwrap();
    assert_eq!(e.submissions("harm-1").unwrap().len(), 2);
    assert!(e
        .history("harm-1")
        .unwrap()
        .last()
        .unwrap()
        .submission
        .is_none());
    assert_eq!(
        e.retract("harm-1", IDS[2]).unwrap_err().code(),
        "NO_SUBMISSION"
    );
    // History is only appended to.
    assert_eq!(e.history("harm-1").unwrap().len(), 5);
}

#[test]
fn close_needs_a_complete_submission() {
    let mut e = engine();
    e.open_round(
        RoundKind::HarmAssessment,
        1,
        Some(ScaleDef::harm_four_point()),
    )
    .unwrap();
    assert_eq!(e.close("harm-1").unwrap_err().code(), "NO_SUBMISSIONS");
    e.submit(
        "harm-1",
        IDS[0],
        RawPayload::Ratings {
            ratings: vec![RawRating {
                criterion: "Q1".into(),
                scenario: "S-Q".into(),
                value: 1,
            }],
        },
    )
    .unwrap();
    assert_eq!(e.close("harm-1").unwrap_err().code(), "NO_SUBMISSIONS");
    let study = e.study().clone();
    e.submit("harm-1", IDS[1], harm_payload(&study, 0)).unwrap();
    let packet = e.close("harm-1").unwrap();
    assert_eq!(
        (packet.submitted, packet.complete, packet.exclusion_count),
        (2, 1, 1)
    );
    assert_eq!(packet.roster_size, 3);
}

fn full_study() -> DelphiEngine {
    let mut e = in_state(RoundState::Briefed);
    let study = e.study().clone();
    e.open_round(RoundKind::WeightElicitation, 1, None).unwrap();
    for (i, id) in IDS.iter().enumerate() {
        e.submit(
            "weights-1",
            id,
            weights_payload(&study, [1.0, 10.0, 0.37][i]),
        )
        .unwrap();
    }
    e.close("weights-1").unwrap();
    e.record_report().unwrap();
    e
}

#[test]
fn replay_is_byte_identical() {
    let e = full_study();
    let doc = e.archive().to_document();
    assert_eq!(doc, full_study().archive().to_document());

    let replayed = DelphiEngine::replay(e.events(), Arc::new(StepClock::fixed())).unwrap();
    assert_eq!(replayed.archive().to_document(), doc);

    let lines = crate::io::store::to_lines(e.events());
    let parsed = crate::io::store::parse_lines(&lines).unwrap();
    let from_lines = DelphiEngine::replay(&parsed, Arc::new(StepClock::fixed())).unwrap();
    assert_eq!(from_lines.archive().to_document(), doc);

    let archive = StudyArchive::parse(&doc).unwrap();
    let verified = archive.verify().unwrap();
    assert_eq!(verified.archive().to_document(), doc);
    assert_eq!(
        verified.peek_feedback("harm-1").unwrap(),
        e.peek_feedback("harm-1").unwrap()
    );
}

#[test]
fn tampered_archives_are_rejected() {
    let e = full_study();
    let mut events = e.events().to_vec();
    let closing = events
        .iter()
        .position(|r| matches!(r.event, Event::RoundClosed { .. }))
        .unwrap();
    let Event::SubmissionRecorded { submission } = &mut events[closing - 1].event else {
        panic!("expected a submission before the close");
    };
    let Payload::Ratings { ratings } = &mut submission.payload else {
        panic!()
    };
    ratings[0].value = (ratings[0].value + 1) % 4;
    let err = DelphiEngine::replay(&events, Arc::new(StepClock::fixed())).unwrap_err();
    assert_eq!(err.code(), "ARCHIVE_CORRUPT");

    let mut archive = e.archive();
    archive.rounds[0].submissions.pop();
    assert_eq!(archive.verify().unwrap_err().code(), "ARCHIVE_CORRUPT");

    let mut events = e.events().to_vec();
    events.swap(5, 6);
    assert!(DelphiEngine::replay(&events, Arc::new(StepClock::fixed())).is_err());
}

#[test]
fn packets_and_reports_carry_aliases_only() {
    let mut e = full_study();
    let packets = [
        canonical::to_canonical_string(e.feedback("harm-1").unwrap()).unwrap(),
        canonical::to_canonical_string(e.feedback("weights-1").unwrap()).unwrap(),
        e.analysis_report().unwrap().to_document(),
    ];
    for text in &packets {
        for id in IDS {
            assert!(!text.contains(id), "{id} leaked");
        }
    }
    assert!(packets[1].contains("P03"));
}

#[test]
fn submission_records_briefing_context() {
    let e = full_study();
    let s = e.submission("weights-1", IDS[0]).unwrap();
    assert_eq!(s.context.wave_number, 1);
    let last = s.context.last_briefed.as_ref().unwrap();
    assert_eq!(last.round_id, "harm-1");
    assert_eq!(
        last.digest,
        canonical::digest(e.peek_feedback("harm-1").unwrap()).unwrap()
    );
    let first = e.submission("harm-1", IDS[0]).unwrap();
    assert!(first.context.last_briefed.is_none());
}

#[test]
fn roster_rules() {
    let mut e = engine();
    assert_eq!(
        e.register_respondent(Respondent::new(IDS[0], "P09"))
            .unwrap_err()
            .code(),
        "DUPLICATE_RESPONDENT"
    );
    assert_eq!(
        e.register_respondent(Respondent::new("new", "P01"))
            .unwrap_err()
            .code(),
        "ROSTER_INVALID"
    );
    assert_eq!(
        e.register_respondent(Respondent::new("new", IDS[1]))
            .unwrap_err()
            .code(),
        "ROSTER_INVALID"
    );
    for i in 4..=19 {
        assert!(e
            .register_respondent(Respondent::new(format!("x{i}"), format!("P{i:02}")))
            .unwrap()
            .is_empty());
    }
    let warnings = e
        .register_respondent(Respondent::new("x20", "P20"))
        .unwrap();
    assert_eq!(warnings.len(), 1);
    assert_eq!(warnings[0].code.as_str(), "PANEL_ABOVE_GUIDANCE");
}

#[test]
fn invalid_study_is_rejected() {
    let mut study = build_default_study();
    study.scenarios[1].is_baseline = true;
    let err = DelphiEngine::create(study, Arc::new(StepClock::fixed())).unwrap_err();
    assert_eq!(err.code(), "STUDY_INVALID");
}

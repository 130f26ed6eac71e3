use std::collections::BTreeMap;

use maia_core::aggregation::RankingRule;
use maia_core::batch::{run_batch, BatchRound};
use maia_core::delphi::{DelphiEngine, RoundKind};
use maia_core::fixture::{dominant_fixture, Fixture};
use maia_core::io::archive::StudyArchive;
use maia_core::io::responses::{parse_responses, write_responses, ParseContext, ResponseSet};
use maia_core::plot::{emit_plot_data, render_all};
use maia_core::report::AnalysisReport;

fn rounds(f: &Fixture) -> Vec<BatchRound> {
    vec![
        BatchRound {
            kind: RoundKind::HarmAssessment,
            scale: Some(f.harm_scale.clone()),
            responses: f.harm.clone(),
        },
        BatchRound {
            kind: RoundKind::BenefitAssessment,
            scale: Some(f.benefit_scale.clone()),
            responses: f.benefit.clone(),
        },
        BatchRound {
            kind: RoundKind::WeightElicitation,
            scale: None,
            responses: f.weights.clone(),
        },
    ]
}

fn fixture_engine(seed: u64) -> (Fixture, DelphiEngine) {
    let f = dominant_fixture(seed);
    let e = run_batch(f.study.clone(), &rounds(&f)).unwrap();
    (f, e)
}

#[test]
fn dominant_scenario_ranks_first_everywhere() {
    for seed in [1, 2, 3, 2024] {
        let (f, e) = fixture_engine(seed);
        let report = e.analysis_report().unwrap();
        assert_eq!(report.tradeoffs.len(), 1);
        let t = &report.tradeoffs[0];
        assert_eq!(t.inputs.len(), 19);
        assert_eq!(t.points.len(), 4);
        for rule in RankingRule::ALL {
            let r = t.ranking(rule).unwrap();
            assert_eq!(r.ordering[0], f.dominant, "{rule} seed {seed}");
            assert_eq!(r.pareto_front, vec![f.dominant.clone()]);
        }
        report.check_consistency(&f.study).unwrap();
    }
}

#[test]
fn baseline_has_no_benefit_and_no_ratio() {
    let (_, e) = fixture_engine(5);
    let t = &e.analysis_report().unwrap().tradeoffs[0];
    for total in t.totals.iter().filter(|x| x.scenario_id == "S-Q") {
        assert_eq!(total.benefit_total, 0.0);
    }
    let sq = t.points.iter().find(|p| p.scenario_id == "S-Q").unwrap();
    assert_eq!(sq.mean_benefit, 0.0);
    assert_eq!(sq.harm_over_benefit, None);
    let ratio = t.ranking(RankingRule::Ratio).unwrap();
    assert_eq!(ratio.ordering.last().unwrap(), "S-Q");
}

#[test]
fn report_round_trips_losslessly() {
    let (f, e) = fixture_engine(9);
    let report = e.analysis_report().unwrap();
    let text = report.to_document();
    let back = AnalysisReport::parse(&text).unwrap();
    assert_eq!(back, report);
    assert_eq!(back.to_document(), text);
    back.check_consistency(&f.study).unwrap();
    assert!(text.contains("\"variance_convention\": \"sample\""));
}

#[test]
fn respondent_sums_use_the_harm_criteria() {
    let (_, e) = fixture_engine(11);
    let report = e.analysis_report().unwrap();
    let harm = report
        .rounds
        .iter()
        .find(|r| r.kind == RoundKind::HarmAssessment)
        .unwrap();
    assert_eq!(harm.respondent_sums.len(), 4);
    for s in &harm.respondent_sums {
        assert_eq!(s.stats.n_items, 13);
        assert_eq!(s.stats.theoretical_max, 39);
        assert!(s.stats.sums.iter().all(|x| x.sum <= 39));
    }
    assert_eq!(harm.reliability[0].scope, "all");
    assert!(harm.reliability[0].reliability.as_ref().unwrap().alpha <= 1.0);
}

#[test]
fn archive_replay_reproduces_stored_reports() {
    let (_, mut e) = fixture_engine(13);
    let report = e.record_report().unwrap();
    let doc = e.archive().to_document();
    let verified = StudyArchive::parse(&doc).unwrap().verify().unwrap();
    assert_eq!(
        verified.stored_reports()[0].report.to_document(),
        report.to_document()
    );
    assert_eq!(verified.archive().to_document(), doc);
}

#[test]
fn plot_bundle_shapes() {
    let (_, e) = fixture_engine(17);
    let bundle = emit_plot_data(&e.analysis_report().unwrap()).unwrap();
    assert_eq!(bundle.scatter.len(), 1);
    assert_eq!(bundle.scatter[0].points.len(), 4);
    assert_eq!(bundle.profiles[0].series.len(), 19);
    for line in &bundle.profiles[0].series {
        assert_eq!(line.points[0], [0.0, 0.0]);
        assert!((line.points.last().unwrap()[1] - 100.0).abs() <= 1e-9);
    }
    assert_eq!(bundle.bars.len(), 4 + 3);
    let files = render_all(&bundle);
    assert_eq!(files.len(), 1 + 1 + 7);
    assert!(files
        .iter()
        .all(|(name, svg)| name.ends_with(".svg") && svg.starts_with("<svg")));
}

#[test]
fn equal_weights_draw_a_straight_line() {
    let mut f = dominant_fixture(3);
    let ResponseSet::Weights(w) = &mut f.weights else {
        panic!()
    };
    for v in w.get_mut("r01").unwrap().values_mut() {
        *v = 4.0;
    }
    let e = run_batch(f.study.clone(), &rounds(&f)).unwrap();
    let bundle = emit_plot_data(&e.analysis_report().unwrap()).unwrap();
    let line = &bundle.profiles[0].series[0];
    assert_eq!(line.respondent, "P01");
    for [x, y] in &line.points {
        assert!((y - 100.0 * x / 21.0).abs() <= 1e-9);
    }
}

#[test]
fn empty_report_has_no_plots() {
    let f = dominant_fixture(1);
    let e = run_batch(f.study, &[]).unwrap();
    let err = emit_plot_data(&e.analysis_report().unwrap()).unwrap_err();
    assert_eq!(err.code(), "EMPTY_REPORT");
}

#[test]
fn csv_files_reproduce_the_response_sets() {
    let f = dominant_fixture(21);
    for (set, kind) in [
        (&f.harm, RoundKind::HarmAssessment),
        (&f.benefit, RoundKind::BenefitAssessment),
        (&f.weights, RoundKind::WeightElicitation),
    ] {
        let text = write_responses(set);
        let back = parse_responses(&text, &ParseContext::new(&f.study, kind)).unwrap();
        assert_eq!(&back, set);
    }
}

#[test]
fn malformed_corpus_is_rejected_with_code_and_line() {
    let study = maia_core::model::build_default_study();
    let scale = maia_core::model::ScaleDef::harm_four_point();
    let ctx = ParseContext::new(&study, RoundKind::HarmAssessment).with_scale(&scale);
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/corpus/malformed");
    let mut checked = BTreeMap::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        let name = path.file_name().unwrap().to_string_lossy().to_string();
        let mut parts = name.split('.');
        let code = parts.next().unwrap();
        let line: u64 = parts.next().unwrap().parse().unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let err = parse_responses(&text, &ctx).unwrap_err();
        assert_eq!((err.code(), err.line()), (code, Some(line)), "{name}");
        *checked.entry(code.to_string()).or_insert(0) += 1;
    }
    assert_eq!(checked.len(), 4);
}

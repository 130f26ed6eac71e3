//! `maia`: batch analysis and study administration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use maia_core::aggregation::{RankingRule, ScenarioRanking, TradeoffPoint, WeightedTotals};
use maia_core::batch::{run_batch, BatchRound};
use maia_core::delphi::{DelphiEngine, RoundKind};
use maia_core::fixture::dominant_fixture;
use maia_core::io::archive::StudyArchive;
use maia_core::io::responses::{parse_responses, write_responses, ParseContext};
use maia_core::io::{parse_study, read_file, to_document, write_file, write_study};
use maia_core::model::{build_default_study, validate_study, ScaleDef, Severity, StudyDefinition};
use maia_core::plot::{emit_plot_data, render_all};
use maia_core::report::AnalysisReport;
use maia_core::Error;
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "maia",
    version,
    about = "Multi-attribute impact assessment studies"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Kind {
    Harm,
    Benefit,
    Weights,
}

impl From<Kind> for RoundKind {
    fn from(k: Kind) -> Self {
        match k {
            Kind::Harm => RoundKind::HarmAssessment,
            Kind::Benefit => RoundKind::BenefitAssessment,
            Kind::Weights => RoundKind::WeightElicitation,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Rule {
    Net,
    Ratio,
    Pareto,
}

impl From<Rule> for RankingRule {
    fn from(r: Rule) -> Self {
        match r {
            Rule::Net => RankingRule::NetScore,
            Rule::Ratio => RankingRule::Ratio,
            Rule::Pareto => RankingRule::ParetoOnly,
        }
    }
}

#[derive(Debug, clap::Args)]
struct RoundInput {
    /// Study definition document.
    #[arg(long)]
    study: PathBuf,
    /// Responses CSV for one round.
    #[arg(long)]
    responses: PathBuf,
    #[arg(long, value_enum, default_value = "harm")]
    round_kind: Kind,
    /// Rating scale: `4`, `10`, `4-point`, `10-point` or `MIN..MAX`.
    #[arg(long, default_value = "4-point")]
    scale: String,
}

#[derive(Debug, clap::Args)]
struct StudyInputs {
    #[arg(long)]
    study: Option<PathBuf>,
    /// Harm ratings CSV.
    #[arg(long)]
    harm: Option<PathBuf>,
    /// Benefit ratings CSV.
    #[arg(long)]
    benefit: Option<PathBuf>,
    /// Weight elicitation CSV.
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Rating scale of the harm and benefit files.
    #[arg(long, default_value = "4-point")]
    scale: String,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the default study definition.
    Init {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a study definition, and optionally a responses file against it.
    Validate {
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        responses: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "harm")]
        round_kind: Kind,
        #[arg(long)]
        scale: Option<String>,
    },
    /// Cronbach's alpha for one rating round.
    Alpha(RoundInput),
    /// Item means/SDs and respondent sums for one rating round.
    Stats(RoundInput),
    /// Normalized weights and cumulative profiles.
    Weights {
        #[arg(long)]
        study: PathBuf,
        #[arg(long)]
        responses: PathBuf,
    },
    /// Weighted totals, tradeoff points and a scenario ranking.
    Aggregate {
        #[command(flatten)]
        inputs: StudyInputs,
        #[arg(long, value_enum, default_value = "net")]
        rule: Rule,
    },
    /// Full analysis report plus plot bundle and SVG images.
    Report {
        #[command(flatten)]
        inputs: StudyInputs,
        /// Analyze a study archive instead of response files.
        #[arg(long, conflicts_with_all = ["study", "harm", "benefit", "weights"])]
        archive: Option<PathBuf>,
        /// Output directory; the report goes to stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the HTTP service.
    Serve {
        /// TOML configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        addr: Option<String>,
        #[arg(long)]
        archive: Option<PathBuf>,
    },
    /// Generate a seeded synthetic dataset with one dominant scenario.
    SimulateFixture {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn invalid(code: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Invalid {
        code: code.into(),
        message: message.into(),
    }
}

fn parse_scale(arg: &str, kind: RoundKind) -> Result<ScaleDef, Error> {
    let benefit = kind == RoundKind::BenefitAssessment;
    match arg {
        "4" | "4-point" => Ok(if benefit {
            ScaleDef::benefit_four_point()
        } else {
            ScaleDef::harm_four_point()
        }),
        "10" | "10-point" => Ok(if benefit {
            ScaleDef::benefit_ten_point()
        } else {
            ScaleDef::harm_ten_point()
        }),
        other => {
            let (lo, hi) = other
                .split_once("..")
                .and_then(|(a, b)| Some((a.parse::<i64>().ok()?, b.parse::<i64>().ok()?)))
                .ok_or_else(|| invalid("INVALID_SCALE", format!("unrecognized scale {other:?}")))?;
            let scale = ScaleDef::new(other, lo, hi, lo.to_string(), hi.to_string());
            if !scale.is_well_formed() {
                return Err(invalid(
                    "INVALID_SCALE",
                    format!("scale {other:?} needs min < max"),
                ));
            }
            Ok(scale)
        }
    }
}

fn load_study(path: &Path) -> Result<StudyDefinition, Error> {
    let study = parse_study(&read_file(path)?)?;
    let report = validate_study(&study);
    if !report.is_valid() {
        let first = report
            .errors()
            .next()
            .map(|f| f.to_string())
            .unwrap_or_default();
        return Err(invalid("STUDY_INVALID", first));
    }
    Ok(study)
}

fn load_round(
    study: &StudyDefinition,
    path: &Path,
    kind: RoundKind,
    scale: Option<&ScaleDef>,
) -> Result<BatchRound, Error> {
    let mut ctx = ParseContext::new(study, kind);
    if let Some(s) = scale {
        ctx = ctx.with_scale(s);
    }
    let responses = parse_responses(&read_file(path)?, &ctx)?;
    Ok(BatchRound {
        kind,
        scale: scale.cloned(),
        responses,
    })
}

fn single_round(input: &RoundInput) -> Result<(StudyDefinition, DelphiEngine), Error> {
    let kind = RoundKind::from(input.round_kind);
    if !kind.is_rating() {
        return Err(invalid(
            "PAYLOAD_KIND_MISMATCH",
            "alpha and stats take a rating round",
        ));
    }
    let study = load_study(&input.study)?;
    let scale = parse_scale(&input.scale, kind)?;
    let round = load_round(&study, &input.responses, kind, Some(&scale))?;
    let engine = run_batch(study.clone(), &[round])?;
    Ok((study, engine))
}

/// Rounds described by the file flags, in harm, benefit, weights order.
fn study_rounds(inputs: &StudyInputs) -> Result<(StudyDefinition, Vec<BatchRound>), Error> {
    let study_path = inputs
        .study
        .as_ref()
        .ok_or_else(|| invalid("MISSING_INPUT", "--study is required"))?;
    let study = load_study(study_path)?;
    let mut rounds = Vec::new();
    for (path, kind) in [
        (&inputs.harm, RoundKind::HarmAssessment),
        (&inputs.benefit, RoundKind::BenefitAssessment),
        (&inputs.weights, RoundKind::WeightElicitation),
    ] {
        if let Some(path) = path {
            let scale = if kind.is_rating() {
                Some(parse_scale(&inputs.scale, kind)?)
            } else {
                None
            };
            rounds.push(load_round(&study, path, kind, scale.as_ref())?);
        }
    }
    if rounds.is_empty() {
        return Err(invalid(
            "MISSING_INPUT",
            "give at least one of --harm, --benefit, --weights",
        ));
    }
    Ok((study, rounds))
}

fn report_for(inputs: &StudyInputs) -> Result<AnalysisReport, Error> {
    let (study, rounds) = study_rounds(inputs)?;
    Ok(run_batch(study, &rounds)?.analysis_report()?)
}

fn emit(out: Option<&Path>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => Ok(write_file(path, text)?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

#[derive(Serialize)]
struct AggregateOutput<'a> {
    study_id: &'a str,
    label: &'a str,
    totals: &'a [WeightedTotals],
    points: &'a [TradeoffPoint],
    ranking: &'a ScenarioRanking,
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Init { out } => emit(out.as_deref(), &write_study(&build_default_study())),
        Command::Validate {
            study,
            responses,
            round_kind,
            scale,
        } => {
            let def = parse_study(&read_file(&study)?)?;
            let report = validate_study(&def);
            for f in &report.findings {
                let level = if f.severity == Severity::Error {
                    "error"
                } else {
                    "warning"
                };
                eprintln!("{level}: {f}");
            }
            if !report.is_valid() {
                return Err(invalid(
                    "STUDY_INVALID",
                    format!(
                        "{} error(s) in {}",
                        report.errors().count(),
                        study.display()
                    ),
                ));
            }
            if let Some(path) = responses {
                let kind = RoundKind::from(round_kind);
                let scale = match (&scale, kind.is_rating()) {
                    (Some(s), true) => Some(parse_scale(s, kind)?),
                    _ => None,
                };
                let round = load_round(&def, &path, kind, scale.as_ref())?;
                println!(
                    "{}: {} respondents, ok",
                    path.display(),
                    round.responses.respondents().len()
                );
            }
            println!("{}: ok", study.display());
            Ok(())
        }
        Command::Alpha(input) => {
            let (_, engine) = single_round(&input)?;
            let report = engine.analysis_report()?;
            let round = &report.rounds[0];
            if let Some(code) = round
                .reliability
                .iter()
                .find(|a| a.scope == "all")
                .and_then(|a| a.error.clone())
            {
                return Err(invalid(code, "alpha is undefined for this response matrix"));
            }
            emit(None, &to_document(&round.reliability))
        }
        Command::Stats(input) => {
            let (_, engine) = single_round(&input)?;
            let report = engine.analysis_report()?;
            emit(None, &to_document(&report.rounds[0]))
        }
        Command::Weights { study, responses } => {
            let def = load_study(&study)?;
            let round = load_round(&def, &responses, RoundKind::WeightElicitation, None)?;
            let report = run_batch(def, &[round])?.analysis_report()?;
            emit(None, &to_document(&report.weights[0]))
        }
        Command::Aggregate { inputs, rule } => {
            let report = report_for(&inputs)?;
            let t = report.tradeoffs.first().ok_or_else(|| {
                invalid(
                    "MISSING_INPUT",
                    "aggregation needs harm, benefit and weight files on matching scales",
                )
            })?;
            let ranking = t
                .ranking(rule.into())
                .ok_or_else(|| invalid("TOO_FEW_SCENARIOS", "nothing to rank"))?;
            emit(
                None,
                &to_document(&AggregateOutput {
                    study_id: &report.study_id,
                    label: &t.label,
                    totals: &t.totals,
                    points: &t.points,
                    ranking,
                }),
            )
        }
        Command::Report {
            inputs,
            archive,
            out,
        } => {
            let engine = match archive {
                Some(path) => StudyArchive::parse(&read_file(&path)?)?.verify()?,
                None => {
                    let (study, rounds) = study_rounds(&inputs)?;
                    run_batch(study, &rounds)?
                }
            };
            let report = engine.analysis_report()?;
            report
                .check_consistency(engine.study())
                .map_err(|m| invalid("REPORT_INCONSISTENT", m))?;
            match out {
                None => emit(None, &report.to_document()),
                Some(dir) => {
                    write_file(&dir.join("report.maia.json"), &report.to_document())?;
                    let bundle = emit_plot_data(&report)?;
                    write_file(&dir.join("plots.maia.json"), &to_document(&bundle))?;
                    for (name, svg) in render_all(&bundle) {
                        write_file(&dir.join("plots").join(name), &svg)?;
                    }
                    eprintln!("wrote {}", dir.display());
                    Ok(())
                }
            }
        }
        Command::Serve {
            config,
            addr,
            archive,
        } => {
            let mut cfg = maia_service::ServiceConfig::load(config.as_deref())
                .map_err(|e| invalid("CONFIG_INVALID", e.to_string()))?;
            if let Some(a) = addr {
                cfg.addr = a;
            }
            if let Some(a) = archive {
                cfg.archive = a;
            }
            let rt =
                tokio::runtime::Runtime::new().map_err(|e| invalid("IO_ERROR", e.to_string()))?;
            rt.block_on(maia_service::run(cfg))
                .map_err(|e| invalid("SERVE_FAILED", e.to_string()))
        }
        Command::SimulateFixture { seed, out } => {
            let f = dominant_fixture(seed);
            write_file(&out.join("study.maia.json"), &write_study(&f.study))?;
            for (name, set) in [
                ("harm.csv", &f.harm),
                ("benefit.csv", &f.benefit),
                ("weights.csv", &f.weights),
            ] {
                write_file(&out.join(name), &write_responses(set))?;
            }
            eprintln!(
                "wrote {} (seed {seed}, dominant scenario {})",
                out.display(),
                f.dominant
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {e}", e.code());
            ExitCode::FAILURE
        }
    }
}

//! Declarative plot data derived from a report, and SVG renderings of it.
//!
//! Clients draw from the bundle; nothing numeric is recomputed downstream.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::report::AnalysisReport;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlotError {
    #[error("report has no closed rounds to plot")]
    EmptyReport,
}

impl PlotError {
    pub fn code(&self) -> &'static str {
        match self {
            Self::EmptyReport => "EMPTY_REPORT",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterPoint {
    pub scenario: String,
    pub x: f64,
    pub y: f64,
}

/// Weighted harm (x) against weighted benefit (y), one point per scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScatterPlot {
    pub id: String,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub points: Vec<ScatterPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Polyline {
    pub respondent: String,
    /// `(criterion index, cumulative percent)`, starting at `(0, 0)`.
    pub points: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfilePlot {
    pub id: String,
    pub title: String,
    pub criteria: Vec<String>,
    pub series: Vec<Polyline>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bar {
    pub criterion: String,
    pub mean: f64,
    pub sd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarPlot {
    pub id: String,
    pub title: String,
    pub round_id: String,
    pub scenario: String,
    pub y_max: f64,
    pub bars: Vec<Bar>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotBundle {
    pub schema_version: u32,
    pub study_id: String,
    pub scatter: Vec<ScatterPlot>,
    pub profiles: Vec<ProfilePlot>,
    pub bars: Vec<BarPlot>,
}

pub fn emit_plot_data(report: &AnalysisReport) -> Result<PlotBundle, PlotError> {
    if report.is_empty() {
        return Err(PlotError::EmptyReport);
    }
    let scatter = report
        .tradeoffs
        .iter()
        .map(|t| ScatterPlot {
            id: format!("tradeoff-{}", t.harm_round),
            title: format!("Harm/benefit tradeoff ({})", t.label),
            x_label: "Weighted harm".into(),
            y_label: "Weighted benefit".into(),
            points: t
                .points
                .iter()
                .map(|p| ScatterPoint {
                    scenario: p.scenario_id.clone(),
                    x: p.mean_harm,
                    y: p.mean_benefit,
                })
                .collect(),
        })
        .collect();

    let profiles = report
        .weights
        .iter()
        .map(|w| ProfilePlot {
            id: format!("profiles-{}", w.round_id),
            title: "Cumulative weight profiles".into(),
            criteria: w
                .profiles
                .first()
                .map(|p| p.points.iter().map(|q| q.criterion.clone()).collect())
                .unwrap_or_default(),
            series: w
                .profiles
                .iter()
                .map(|p| Polyline {
                    respondent: p.respondent.clone(),
                    points: std::iter::once([0.0, 0.0])
                        .chain(
                            p.points
                                .iter()
                                .map(|q| [q.index as f64, q.cumulative_percent]),
                        )
                        .collect(),
                })
                .collect(),
        })
        .collect();

    let mut bars = Vec::new();
    for r in &report.rounds {
        let mut scenarios: Vec<&str> = Vec::new();
        for item in &r.item_stats.items {
            if !scenarios.contains(&item.scenario.as_str()) {
                scenarios.push(&item.scenario);
            }
        }
        for scenario in scenarios {
            bars.push(BarPlot {
                id: format!("items-{}-{}", r.round_id, scenario),
                title: format!("{} {} item means", r.round_id, scenario),
                round_id: r.round_id.clone(),
                scenario: scenario.to_string(),
                y_max: f64::from(r.scale_max),
                bars: r
                    .item_stats
                    .items
                    .iter()
                    .filter(|i| i.scenario == scenario)
                    .map(|i| Bar {
                        criterion: i.criterion.clone(),
                        mean: i.mean,
                        sd: i.sd,
                    })
                    .collect(),
            });
        }
    }

    Ok(PlotBundle {
        schema_version: crate::io::SCHEMA_VERSION,
        study_id: report.study_id.clone(),
        scatter,
        profiles,
        bars,
    })
}

const W: f64 = 640.0;
const H: f64 = 480.0;
const MARGIN: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn esc(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

struct Frame {
    x_max: f64,
    y_max: f64,
}

impl Frame {
    fn new(x_max: f64, y_max: f64) -> Self {
        let nice = |v: f64| if v > 0.0 { v } else { 1.0 };
        Self {
            x_max: nice(x_max),
            y_max: nice(y_max),
        }
    }

    fn px(&self, x: f64) -> f64 {
        MARGIN + x / self.x_max * (W - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        H - MARGIN - y / self.y_max * (H - 2.0 * MARGIN)
    }
}

fn open(out: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{}" y="24" text-anchor="middle" font-size="16">{}</text>"#,
        W / 2.0,
        esc(title)
    );
    let (x0, y0) = (frame.px(0.0), frame.py(0.0));
    let _ = writeln!(
        out,
        r#"<line x1="{x0}" y1="{y0}" x2="{:.2}" y2="{y0}" stroke="black"/><line x1="{x0}" y1="{y0}" x2="{x0}" y2="{:.2}" stroke="black"/>"#,
        frame.px(frame.x_max),
        frame.py(frame.y_max)
    );
    for i in 0..=4 {
        let fx = frame.x_max * f64::from(i) / 4.0;
        let fy = frame.y_max * f64::from(i) / 4.0;
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            frame.px(fx),
            y0 + 16.0,
            tick(fx),
            x0 - 6.0,
            frame.py(fy) + 4.0,
            tick(fy)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        W / 2.0,
        H - 16.0,
        esc(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>"#,
        H / 2.0,
        H / 2.0,
        esc(y_label)
    );
}

fn tick(v: f64) -> String {
    let s = format!("{v:.2}");
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

pub fn render_scatter(plot: &ScatterPlot) -> String {
    let x_max = plot.points.iter().map(|p| p.x).fold(0.0, f64::max) * 1.15;
    let y_max = plot.points.iter().map(|p| p.y).fold(0.0, f64::max) * 1.15;
    let frame = Frame::new(x_max, y_max);
    let mut out = String::new();
    open(&mut out, &plot.title, &frame, &plot.x_label, &plot.y_label);
    for (i, p) in plot.points.iter().enumerate() {
        let (cx, cy) = (frame.px(p.x), frame.py(p.y));
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<circle cx="{cx:.2}" cy="{cy:.2}" r="6" fill="{color}"/>"#
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            cx + 9.0,
            cy - 9.0,
            esc(&p.scenario)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_profiles(plot: &ProfilePlot) -> String {
    let frame = Frame::new(plot.criteria.len() as f64, 100.0);
    let mut out = String::new();
    open(
        &mut out,
        &plot.title,
        &frame,
        "Criterion",
        "Cumulative weight (%)",
    );
    for (i, series) in plot.series.iter().enumerate() {
        let pts: Vec<String> = series
            .points
            .iter()
            .map(|[x, y]| format!("{:.2},{:.2}", frame.px(*x), frame.py(*y)))
            .collect();
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"><title>{}</title></polyline>"#,
            pts.join(" "),
            esc(&series.respondent)
        );
    }
    out.push_str("</svg>\n");
    out
}

pub fn render_bars(plot: &BarPlot) -> String {
    let frame = Frame::new(plot.bars.len() as f64, plot.y_max);
    let mut out = String::new();
    open(&mut out, &plot.title, &frame, "Criterion", "Mean rating");
    let slot = (W - 2.0 * MARGIN) / plot.bars.len().max(1) as f64;
    for (i, bar) in plot.bars.iter().enumerate() {
        let x = MARGIN + slot * i as f64 + slot * 0.15;
        let top = frame.py(bar.mean);
        let _ = writeln!(
            out,
            r##"<rect x="{x:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="#1f77b4"/>"##,
            slot * 0.7,
            frame.py(0.0) - top
        );
        let cx = x + slot * 0.35;
        let _ = writeln!(
            out,
            r#"<line x1="{cx:.2}" y1="{:.2}" x2="{cx:.2}" y2="{:.2}" stroke="black"/>"#,
            frame.py((bar.mean - bar.sd).max(0.0)),
            frame.py(bar.mean + bar.sd)
        );
        let _ = writeln!(
            out,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"#,
            frame.py(0.0) + 28.0,
            esc(&bar.criterion)
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Every plot in the bundle as `(file name, SVG document)`.
pub fn render_all(bundle: &PlotBundle) -> Vec<(String, String)> {
    let mut files = Vec::new();
    for p in &bundle.scatter {
        files.push((format!("{}.svg", p.id), render_scatter(p)));
    }
    for p in &bundle.profiles {
        files.push((format!("{}.svg", p.id), render_profiles(p)));
    }
    for p in &bundle.bars {
        files.push((format!("{}.svg", p.id), render_bars(p)));
    }
    files
}

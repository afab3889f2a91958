//! Schema-versioned analysis report and deterministic SVG plots.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cluster::ClusterConfig;
use crate::embed::EmbeddingConfig;
use crate::gait::{GaitConfig, GaitSummary};
use crate::graze::{GrazeConfig, GrazeSummary};
use crate::maskops::STANDARD_MASK_SIZE;
use crate::rest::{RestSummary, DISPERSION_FORMULA};
use crate::speed::{SpeedSummary, DEFAULT_NORM_EXPONENT};

pub const SCHEMA_VERSION: &str = "1.0";
/// JSON schema for `report.json`, also published in the repository.
pub const REPORT_SCHEMA: &str = include_str!("../../../schema/report.schema.json");

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("i/o on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("report {path} is malformed: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("unsupported schema_version {0:?}")]
    SchemaVersion(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedConfig {
    pub norm_exponent: f64,
    /// Replaces every manifest's `frame_stride` when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_stride: Option<u32>,
    pub tercile_rule: String,
    pub gap_rule: String,
    pub area_at: String,
}

impl Default for SpeedConfig {
    fn default() -> Self {
        Self {
            norm_exponent: DEFAULT_NORM_EXPONENT,
            frame_stride: None,
            tercile_rule: "three contiguous windows of floor(n/3) steps, remainder in the last".into(),
            gap_rule: "maskless frames bridged by widening the frame gap".into(),
            area_at: "step start".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestConfig {
    pub embed: EmbeddingConfig,
    pub cluster: ClusterConfig,
    pub mask_size: usize,
    pub dispersion_formula: String,
}

impl Default for RestConfig {
    fn default() -> Self {
        Self {
            embed: EmbeddingConfig::resting(),
            cluster: ClusterConfig::default(),
            mask_size: STANDARD_MASK_SIZE,
            dispersion_formula: DISPERSION_FORMULA.into(),
        }
    }
}

/// Every effective parameter of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub gait: GaitConfig,
    pub speed: SpeedConfig,
    pub graze: GrazeConfig,
    pub rest: RestConfig,
}

impl ConfigEcho {
    /// Defaults with `seed` pushed into every seeded stage.
    pub fn with_seed(seed: u64) -> Self {
        let mut c = Self {
            seed,
            gait: GaitConfig::default(),
            speed: SpeedConfig::default(),
            graze: GrazeConfig::default(),
            rest: RestConfig::default(),
        };
        c.gait.embed.seed = seed;
        c.gait.cluster.seed = seed;
        c.graze.seed = seed;
        c.rest.embed.seed = seed;
        c.rest.cluster.seed = seed;
        c
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub schema_version: String,
    pub config: ConfigEcho,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gait: Option<GaitSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speed: Option<SpeedSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graze: Option<GrazeSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rest: Option<RestSummary>,
    pub warnings: Vec<String>,
}

impl AnalysisReport {
    pub fn new(config: ConfigEcho) -> Self {
        Self {
            schema_version: SCHEMA_VERSION.into(),
            config,
            gait: None,
            speed: None,
            graze: None,
            rest: None,
            warnings: Vec::new(),
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

/// Writes to a sibling temporary file, then renames over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), ReportError> {
    let io = |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    };
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(io)?;
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(bytes).map_err(io)?;
    f.sync_all().map_err(io)?;
    drop(f);
    fs::rename(&tmp, path).map_err(io)
}

pub fn write_report(report: &AnalysisReport, path: &Path) -> Result<(), ReportError> {
    write_atomic(path, report.to_json().as_bytes())
}

pub fn read_report(path: &Path) -> Result<AnalysisReport, ReportError> {
    let text = fs::read_to_string(path).map_err(|source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let report: AnalysisReport = serde_json::from_str(&text).map_err(|source| ReportError::Parse {
        path: path.to_path_buf(),
        source,
    })?;
    if report.schema_version != SCHEMA_VERSION {
        return Err(ReportError::SchemaVersion(report.schema_version));
    }
    Ok(report)
}

// ------------------------------------------------------------------ svg

pub const CANVAS_W: f64 = 800.0;
pub const CANVAS_H: f64 = 600.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 170.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;
pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Maps data bounds (padded by 5% per side) to the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Axes {
    pub x: (f64, f64),
    pub y: (f64, f64),
}

impl Axes {
    pub fn fit(points: impl Iterator<Item = (f64, f64)>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for (x, y) in points {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        let pad = |lo: f64, hi: f64| {
            if !lo.is_finite() {
                return (0.0, 1.0);
            }
            if hi == lo {
                return (lo - 0.5, hi + 0.5);
            }
            let m = 0.05 * (hi - lo);
            (lo - m, hi + m)
        };
        Self {
            x: pad(x0, x1),
            y: pad(y0, y1),
        }
    }

    pub fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (CANVAS_W - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        CANVAS_H - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (CANVAS_H - TOP - BOTTOM)
    }
}

fn frame(out: &mut String, title: &str, axes: &Axes, x_label: &str, y_label: &str) {
    let (l, r, t, b) = (LEFT, CANVAS_W - RIGHT, TOP, CANVAS_H - BOTTOM);
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{CANVAS_W}" height="{CANVAS_H}" viewBox="0 0 {CANVAS_W} {CANVAS_H}">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{CANVAS_W}" height="{CANVAS_H}" fill="white"/>"#);
    let _ = writeln!(out, r#"<text x="{}" y="24" font-family="sans-serif" font-size="16" text-anchor="middle">{}</text>"#, (l + r) / 2.0, escape(title));
    let _ = writeln!(out, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(out, r#"<line x1="{l}" y1="{b}" x2="{r}" y2="{b}"/>"#);
    let _ = writeln!(out, r#"<line x1="{l}" y1="{t}" x2="{l}" y2="{b}"/>"#);
    let _ = writeln!(out, "</g>");
    let ticks = [(axes.x.0, l, b + 16.0, "start"), (axes.x.1, r, b + 16.0, "end")];
    for (v, x, y, anchor) in ticks {
        let _ = writeln!(out, r#"<text x="{x}" y="{y}" font-family="sans-serif" font-size="11" text-anchor="{anchor}">{v:.2}</text>"#);
    }
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.2}</text>"#, l - 4.0, b, axes.y.0);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="11" text-anchor="end">{:.2}</text>"#, l - 4.0, t + 10.0, axes.y.1);
    let _ = writeln!(out, r#"<text x="{}" y="{}" font-family="sans-serif" font-size="12" text-anchor="middle">{}</text>"#, (l + r) / 2.0, CANVAS_H - 12.0, escape(x_label));
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0}" font-family="sans-serif" font-size="12" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    let x = CANVAS_W - RIGHT + 16.0;
    let _ = writeln!(out, r#"<g class="legend" font-family="sans-serif" font-size="12">"#);
    for (i, (name, color)) in entries.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(out, r#"<rect x="{x}" y="{}" width="10" height="10" fill="{color}"/>"#, y - 9.0);
        let _ = writeln!(out, r#"<text x="{}" y="{y}">{}</text>"#, x + 16.0, escape(name));
    }
    let _ = writeln!(out, "</g>");
}

/// One circle per point, coloured by `labels[i] % 10`. `names[l]`, when
/// present, labels category `l` in the legend.
pub fn render_scatter(points: &[(f64, f64)], labels: &[usize], names: &[String], title: &str) -> String {
    assert_eq!(points.len(), labels.len(), "one label per point");
    let axes = Axes::fit(points.iter().copied());
    let mut out = String::new();
    frame(&mut out, title, &axes, "dim 1", "dim 2");
    let _ = writeln!(out, r#"<g class="points" stroke="none">"#);
    for (&(x, y), &l) in points.iter().zip(labels) {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}" fill-opacity="0.8" data-label="{l}"/>"#,
            axes.px(x),
            axes.py(y),
            PALETTE[l % PALETTE.len()]
        );
    }
    let _ = writeln!(out, "</g>");
    let present: BTreeSet<usize> = labels.iter().copied().collect();
    let entries: Vec<(String, &str)> = present
        .into_iter()
        .map(|l| (names.get(l).cloned().unwrap_or_else(|| format!("cluster {l}")), PALETTE[l % PALETTE.len()]))
        .collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

/// One polyline per series; `markers` are vertical boundary lines at the
/// given x values.
pub fn render_series(series: &[Series], markers: &[f64], title: &str, x_label: &str, y_label: &str) -> String {
    let axes = Axes::fit(series.iter().flat_map(|s| s.points.iter().copied()));
    let mut out = String::new();
    frame(&mut out, title, &axes, x_label, y_label);
    let _ = writeln!(out, r#"<g class="markers" stroke="gray" stroke-dasharray="4 3">"#);
    for &m in markers {
        let x = axes.px(m);
        let _ = writeln!(out, r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{}"/>"#, CANVAS_H - BOTTOM);
    }
    let _ = writeln!(out, "</g>");
    for (i, s) in series.iter().enumerate() {
        let pts: Vec<String> = s.points.iter().map(|&(x, y)| format!("{:.2},{:.2}", axes.px(x), axes.py(y))).collect();
        let _ = writeln!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            pts.join(" ")
        );
    }
    let entries: Vec<(String, &str)> = series.iter().enumerate().map(|(i, s)| (s.name.clone(), PALETTE[i % PALETTE.len()])).collect();
    legend(&mut out, &entries);
    out.push_str("</svg>\n");
    out
}

pub fn write_svg(path: &Path, svg: &str) -> Result<(), ReportError> {
    write_atomic(path, svg.as_bytes())
}

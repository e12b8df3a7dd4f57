//! Report types and their JSON / CSV emission.

use std::io::{self, Write};
use std::path::Path;

use nobind_core::bounds::ModelSpec;
use nobind_core::feynman_kac::{KernelQuery, McProbe};
use nobind_core::optimizer::{CurvePoint, OptimumReport};
use serde::Serialize;
use serde_json::ser::{Formatter, PrettyFormatter};
use sha2::{Digest, Sha256};

use crate::config::{Command, Format, RunConfig};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// 17 significant digits, enough to round-trip any f64.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub residual: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeSummary {
    #[serde(flatten)]
    pub report: OptimumReport,
    /// `C` (or the absolute Nelson threshold); absent when the tail failed.
    pub constant: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McSummary {
    pub model: ModelSpec,
    pub alpha: f64,
    #[serde(flatten)]
    pub probe: McProbe,
    pub mean_per_time: f64,
    pub log_mean_exp_per_time: f64,
    /// `lim (1/T) E[action]` for one free particle.
    pub jensen_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelRow {
    #[serde(flatten)]
    pub query: KernelQuery,
    pub kernel: f64,
    pub brace: f64,
    pub oracle: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Body {
    Optimize(OptimizeSummary),
    Curve(Vec<CurvePoint>),
    Verify(Vec<Check>),
    Mc(McSummary),
    Kernels(Vec<KernelRow>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub command: Command,
    pub body: Body,
    pub checks: Vec<Check>,
}

impl Report {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub config_hash: String,
    pub seed: Option<u64>,
    pub version: &'static str,
}

impl Provenance {
    pub fn of(config: &RunConfig) -> Self {
        let digest = Sha256::digest(config.to_json().as_bytes());
        Self { config_hash: hex::encode(digest), seed: config.seed(), version: VERSION }
    }
}

/// serde_json pretty printing with floats at 17 significant digits.
struct Sig17<'a>(PrettyFormatter<'a>);

impl Formatter for Sig17<'_> {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        writer.write_all(format_float(value).as_bytes())
    }
    fn write_f32<W: ?Sized + Write>(&mut self, writer: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(writer, value as f64)
    }
    fn begin_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_array(w)
    }
    fn end_array<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array(w)
    }
    fn begin_array_value<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_array_value(w, first)
    }
    fn end_array_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_array_value(w)
    }
    fn begin_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object(w)
    }
    fn end_object<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object(w)
    }
    fn begin_object_key<W: ?Sized + Write>(&mut self, w: &mut W, first: bool) -> io::Result<()> {
        self.0.begin_object_key(w, first)
    }
    fn begin_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.begin_object_value(w)
    }
    fn end_object_value<W: ?Sized + Write>(&mut self, w: &mut W) -> io::Result<()> {
        self.0.end_object_value(w)
    }
}

#[derive(Serialize)]
struct Document<'a> {
    command: &'static str,
    passed: bool,
    provenance: &'a Provenance,
    config: &'a RunConfig,
    checks: &'a [Check],
    result: &'a Body,
}

pub fn to_json(report: &Report, config: &RunConfig) -> Vec<u8> {
    let provenance = Provenance::of(config);
    let doc = Document {
        command: report.command.name(),
        passed: report.passed(),
        provenance: &provenance,
        config,
        checks: &report.checks,
        result: &report.body,
    };
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, Sig17(PrettyFormatter::new()));
    doc.serialize(&mut ser).expect("report serializes");
    out.push(b'\n');
    out
}

enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_float(*x),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

fn model_cells(model: &ModelSpec) -> [Cell; 2] {
    let cutoff = match model {
        ModelSpec::Piezo { cutoff } => Cell::Num(*cutoff),
        _ => Cell::Empty,
    };
    [Cell::Text(model.name().into()), cutoff]
}

fn table(body: &Body) -> (Vec<&'static str>, Vec<Vec<Cell>>) {
    match body {
        Body::Optimize(s) => {
            let r = &s.report;
            let [name, cutoff] = model_cells(&r.model);
            let header = vec![
                "model", "lambda", "b0", "b1", "b2", "x", "value", "achieving_index", "converted_value", "constant",
                "evaluations",
            ];
            let row = vec![
                name,
                cutoff,
                Cell::Num(r.point.b0),
                Cell::Num(r.point.b1),
                Cell::Num(r.point.b2),
                Cell::Num(r.point.x),
                Cell::Num(r.value),
                Cell::Int(r.achieving_index as u64),
                Cell::Num(r.converted_value),
                s.constant.map_or(Cell::Empty, Cell::Num),
                Cell::Int(r.evaluations as u64),
            ];
            (header, vec![row])
        }
        Body::Curve(points) => (
            vec!["lambda", "constant", "b0", "b1", "b2", "x"],
            points
                .iter()
                .map(|p| {
                    vec![
                        Cell::Num(p.cutoff),
                        Cell::Num(p.constant),
                        Cell::Num(p.point.b0),
                        Cell::Num(p.point.b1),
                        Cell::Num(p.point.b2),
                        Cell::Num(p.point.x),
                    ]
                })
                .collect(),
        ),
        Body::Verify(checks) => (
            vec!["check", "pass", "residual", "tolerance", "detail"],
            checks
                .iter()
                .map(|c| {
                    vec![
                        Cell::Text(c.name.clone()),
                        Cell::Flag(c.pass),
                        Cell::Num(c.residual),
                        Cell::Num(c.tolerance),
                        Cell::Text(c.detail.clone()),
                    ]
                })
                .collect(),
        ),
        Body::Mc(m) => {
            let [name, cutoff] = model_cells(&m.model);
            let header = vec![
                "model", "lambda", "alpha", "horizon", "dt", "count", "action_mean", "action_stderr", "log_mean_exp",
                "mean_per_time", "log_mean_exp_per_time", "jensen_rate",
            ];
            let row = vec![
                name,
                cutoff,
                Cell::Num(m.alpha),
                Cell::Num(m.probe.horizon),
                Cell::Num(m.probe.dt),
                Cell::Int(m.probe.count as u64),
                Cell::Num(m.probe.action_mean),
                Cell::Num(m.probe.action_stderr),
                Cell::Num(m.probe.log_mean_exp),
                Cell::Num(m.mean_per_time),
                Cell::Num(m.log_mean_exp_per_time),
                Cell::Num(m.jensen_rate),
            ];
            (header, vec![row])
        }
        Body::Kernels(rows) => (
            vec!["distance", "lag", "lambda", "kernel", "brace", "oracle"],
            rows.iter()
                .map(|r| {
                    vec![
                        Cell::Num(r.query.distance),
                        Cell::Num(r.query.lag),
                        Cell::Num(r.query.cutoff),
                        Cell::Num(r.kernel),
                        Cell::Num(r.brace),
                        r.oracle.map_or(Cell::Empty, Cell::Num),
                    ]
                })
                .collect(),
        ),
    }
}

/// One header row and one row per record; every row carries the provenance.
pub fn to_csv(report: &Report, config: &RunConfig) -> Vec<u8> {
    let provenance = Provenance::of(config);
    let (mut header, rows) = table(&report.body);
    header.extend(["config_hash", "seed", "version"]);
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&header).expect("in-memory write");
    let seed = provenance.seed.map_or(String::new(), |s| s.to_string());
    for row in rows {
        let mut cells: Vec<String> = row.iter().map(Cell::render).collect();
        cells.extend([provenance.config_hash.clone(), seed.clone(), VERSION.to_string()]);
        writer.write_record(&cells).expect("in-memory write");
    }
    writer.into_inner().expect("in-memory flush")
}

pub fn render(report: &Report, config: &RunConfig, format: Format) -> Vec<u8> {
    match format {
        Format::Json => to_json(report, config),
        Format::Csv => to_csv(report, config),
    }
}

/// Writes the rendered report to `path`, or to stdout when `path` is `None`.
pub fn emit(report: &Report, config: &RunConfig, format: Format, path: Option<&Path>) -> io::Result<()> {
    let bytes = render(report, config, format);
    match path {
        Some(p) => std::fs::write(p, bytes),
        None => {
            let mut out = io::stdout().lock();
            out.write_all(&bytes)?;
            out.flush()
        }
    }
}


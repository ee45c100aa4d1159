//! Report artifacts. JSON is the canonical form; CSV is a flat projection.
//!
//! A JSON document has two parts: `metadata`, which holds the timestamp and
//! worker count, and `body`, which depends only on the command, the resolved
//! configuration and the seed.

use std::fmt::Write as _;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use stickpost::posterior::PosteriorRecord;
use stickpost::stickbreak::MeasureRecord;
use stickpost::verify::TestReport;

use crate::error::{CliError, Result};

pub const TOOL: &str = "stickpost";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub tool: String,
    pub version: String,
    /// Seconds since the Unix epoch.
    pub timestamp: u64,
    pub workers: usize,
}

impl Metadata {
    pub fn now(workers: usize) -> Self {
        Metadata {
            tool: TOOL.to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            timestamp: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            workers,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document<B> {
    pub metadata: Metadata,
    pub body: B,
}

/// Body of a verification run. `config` echoes the resolved settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyBody {
    pub command: String,
    pub config: serde_json::Value,
    pub all_pass: bool,
    pub reports: Vec<TestReport>,
}

/// One sampled measure. `posterior` carries the leading positions of the
/// underlying posterior draw for `sample-posterior`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDraw {
    pub draw: usize,
    pub records: Vec<MeasureRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub posterior: Option<PosteriorRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleBody {
    pub command: String,
    pub config: serde_json::Value,
    pub draws: Vec<SampleDraw>,
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Encode(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

/// Parses a JSON verification report and checks that every verdict agrees
/// with its statistic and that `all_pass` is their conjunction.
pub fn decode_verify_report(text: &str) -> Result<Document<VerifyBody>> {
    let doc: Document<VerifyBody> =
        serde_json::from_str(text).map_err(|e| CliError::config(format!("report: {e}")))?;
    if let Some(r) = doc.body.reports.iter().find(|r| !r.is_consistent()) {
        return Err(CliError::config(format!("report: verdict of {:?} contradicts its statistic", r.name)));
    }
    if doc.body.all_pass != doc.body.reports.iter().all(TestReport::passed) {
        return Err(CliError::config("report: all_pass disagrees with the verdicts"));
    }
    Ok(doc)
}

fn csv_writer() -> csv::Writer<Vec<u8>> {
    csv::WriterBuilder::new().from_writer(Vec::new())
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| CliError::Encode(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Encode(e.to_string()))
}

fn enc<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Encode(e.to_string())
}

fn label<T: Serialize>(v: &T) -> String {
    serde_json::to_value(v)
        .ok()
        .and_then(|v| v.as_str().map(str::to_owned))
        .unwrap_or_default()
}

/// One row per report, with a header.
pub fn reports_csv(reports: &[TestReport]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record([
        "name",
        "statistic",
        "reference",
        "standard_error",
        "threshold",
        "comparison",
        "verdict",
        "seed",
        "samples_used",
        "note",
    ])
    .map_err(enc)?;
    for r in reports {
        w.write_record([
            r.name.clone(),
            r.statistic.to_string(),
            r.reference.to_string(),
            r.standard_error.to_string(),
            r.threshold.to_string(),
            label(&r.comparison),
            label(&r.verdict),
            r.seed.to_string(),
            r.samples_used.to_string(),
            r.note.clone().unwrap_or_default(),
        ])
        .map_err(enc)?;
    }
    finish(w)
}

/// `(draw, kind, atom, weight)` rows, with a header.
pub fn samples_csv(draws: &[SampleDraw]) -> Result<String> {
    let mut w = csv_writer();
    w.write_record(["draw", "kind", "atom", "weight"]).map_err(enc)?;
    for d in draws {
        for r in &d.records {
            w.write_record([d.draw.to_string(), label(&r.kind), r.atom.to_string(), r.weight.to_string()])
                .map_err(enc)?;
        }
    }
    finish(w)
}

/// Plain two-column `value F_n(value)` blocks, one per report that carries an
/// ECDF, each headed by `# name` and separated by a blank line.
pub fn ecdf_dump(reports: &[TestReport]) -> String {
    let mut out = String::new();
    for r in reports {
        let Some(points) = &r.ecdf else { continue };
        if !out.is_empty() {
            out.push('\n');
        }
        let _ = writeln!(out, "# {}", r.name);
        for (v, f) in points {
            let _ = writeln!(out, "{v} {f}");
        }
    }
    out
}

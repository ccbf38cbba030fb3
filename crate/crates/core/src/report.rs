//! Rendering of analysis outputs: yield group tables, factor series for
//! plotting, and findings documents.
//!
//! Every file is UTF-8 with LF line ends and is written atomically. Run
//! metadata, the only place a timestamp appears, goes to its own file so
//! the data files are reproducible byte for byte.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde_json::json;
use thiserror::Error;

use crate::analytics::{
    Factor, FactorGroupStats, GroupYieldStats, OptimalFinding, SignificanceRule, Verdict,
};
use crate::fsutil::atomic_write;
use crate::number;
use crate::store::Snapshot;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Delimited,
    Json,
    Markdown,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Delimited => "csv",
            Format::Json => "json",
            Format::Markdown => "md",
        }
    }
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" | "delimited" => Ok(Format::Delimited),
            "json" => Ok(Format::Json),
            "markdown" | "md" => Ok(Format::Markdown),
            _ => Err(format!("unknown format {s:?} (expected csv, json or markdown)")),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Delimited => "csv",
            Format::Json => "json",
            Format::Markdown => "markdown",
        })
    }
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("no group statistics to report")]
    EmptyStats,
    #[error("{0} output is not supported here")]
    UnsupportedFormat(Format),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn write(path: &Path, text: &str) -> Result<(), ReportError> {
    atomic_write(path, text.as_bytes()).map_err(|source| ReportError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn csv_text(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory write")).expect("utf-8 fields")
}

fn markdown_table(header: &[&str], rows: &[Vec<String>]) -> String {
    let cell = |s: &str| s.replace('|', "\\|");
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", " --- |".repeat(header.len())));
    for r in rows {
        let cells: Vec<String> = r.iter().map(|c| cell(c)).collect();
        out.push_str(&format!("| {} |\n", cells.join(" | ")));
    }
    out
}

fn json_text(v: &serde_json::Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("json serializes");
    s.push('\n');
    s
}

/// Percentage with one decimal and an explicit sign; zero renders as `0`.
pub fn render_pct(pct: f64) -> String {
    let r = number::round_settled(pct, 1);
    if r == 0.0 {
        "0".to_string()
    } else {
        format!("{r:+.1}")
    }
}

fn stored(x: f64) -> String {
    number::canonical_f64(x).map(number::render).unwrap_or_default()
}

const GROUP_COLUMNS: [&str; 4] = ["group", "crop", "mean_yield", "pct_vs_g3"];

/// Renders yield group tables, one row per (crop, group) sorted by crop then
/// group.
pub fn group_table(stats: &[GroupYieldStats], format: Format) -> Result<String, ReportError> {
    if stats.is_empty() {
        return Err(ReportError::EmptyStats);
    }
    let mut sorted: Vec<&GroupYieldStats> = stats.iter().collect();
    sorted.sort_by(|a, b| a.crop.cmp(&b.crop));
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for s in sorted {
        for (g, gy) in s.groups.iter().enumerate() {
            let mean = number::render_fixed(gy.mean, 2);
            let pct = render_pct(gy.pct_vs_g3);
            items.push(json!({
                "group": g + 1,
                "crop": s.crop,
                "mean_yield": number::round_settled(gy.mean, 2),
                "pct_vs_g3": number::round_settled(gy.pct_vs_g3, 1),
                "count": gy.count,
            }));
            rows.push(vec![(g + 1).to_string(), s.crop.clone(), mean, pct]);
        }
    }
    Ok(match format {
        Format::Delimited => csv_text(&GROUP_COLUMNS, &rows),
        Format::Markdown => markdown_table(&GROUP_COLUMNS, &rows),
        Format::Json => json_text(&serde_json::Value::Array(items)),
    })
}

pub fn emit_group_table(
    stats: &[GroupYieldStats],
    format: Format,
    path: &Path,
) -> Result<(), ReportError> {
    write(path, &group_table(stats, format)?)
}

const SERIES_COLUMNS: [&str; 6] = ["crop", "factor", "group", "mean", "count", "sd"];

/// Renders per-group factor means sorted by factor, crop and group. Absent
/// means and sds are empty fields (`null` in JSON).
pub fn factor_series(stats: &[FactorGroupStats], format: Format) -> Result<String, ReportError> {
    let mut sorted: Vec<&FactorGroupStats> = stats.iter().collect();
    sorted.sort_by(|a, b| (a.factor, &a.crop).cmp(&(b.factor, &b.crop)));
    let mut rows = Vec::new();
    let mut items = Vec::new();
    for s in sorted {
        for (g, fg) in s.groups.iter().enumerate() {
            let mean = fg.mean.and_then(number::canonical_f64);
            let sd = fg.sd.and_then(number::canonical_f64);
            items.push(json!({
                "crop": s.crop,
                "factor": s.factor.token(),
                "unit": s.factor.unit(),
                "group": g + 1,
                "mean": mean,
                "count": fg.count,
                "sd": sd,
            }));
            rows.push(vec![
                s.crop.clone(),
                s.factor.token().to_string(),
                (g + 1).to_string(),
                fg.mean.map(stored).unwrap_or_default(),
                fg.count.to_string(),
                fg.sd.map(stored).unwrap_or_default(),
            ]);
        }
    }
    Ok(match format {
        Format::Delimited => csv_text(&SERIES_COLUMNS, &rows),
        Format::Markdown => markdown_table(&SERIES_COLUMNS, &rows),
        Format::Json => json_text(&serde_json::Value::Array(items)),
    })
}

pub fn emit_factor_series(
    stats: &[FactorGroupStats],
    format: Format,
    path: &Path,
) -> Result<(), ReportError> {
    write(path, &factor_series(stats, format)?)
}

fn factor_phrase(f: Factor) -> &'static str {
    match f {
        Factor::SoilPh => "soil pH",
        Factor::SoilP => "soil P",
        Factor::SoilK => "soil K",
        Factor::SoilMg => "soil Mg",
        Factor::Herbicide => "herbicide quantity",
        Factor::Insecticide => "insecticide quantity",
    }
}

fn findings_markdown(findings: &[OptimalFinding]) -> String {
    let mut out = String::from("# Findings\n");
    if findings.is_empty() {
        out.push_str("\nNo findings.\n");
        return out;
    }
    for factor in Factor::ALL {
        let of: Vec<&OptimalFinding> = findings.iter().filter(|f| f.factor == factor).collect();
        if of.is_empty() {
            continue;
        }
        out.push_str(&format!("\n## {} ({})\n\n", factor_phrase(factor), factor.unit()));
        let optimal: Vec<_> = of.iter().filter(|f| f.verdict.value().is_some()).collect();
        if optimal.is_empty() {
            out.push_str("No optimal value was found for any crop.\n");
        }
        for f in optimal {
            let v = f.verdict.value().expect("filtered");
            out.push_str(&format!(
                "- The optimal {} for {} is {} ({}).\n",
                factor_phrase(factor),
                f.crop,
                number::render_fixed(v, factor.decimals() as usize),
                factor.unit()
            ));
        }
        let flat: Vec<_> = of
            .iter()
            .filter(|f| f.verdict == Verdict::NotDiscriminative)
            .collect();
        if !flat.is_empty() {
            out.push_str("\n### No optimum found\n\n");
            for f in flat {
                out.push_str(&format!(
                    "- {}: {} does not differ between yield groups 1 and 5.\n",
                    f.crop,
                    factor_phrase(factor)
                ));
            }
        }
        let thin: Vec<_> = of
            .iter()
            .filter(|f| f.verdict == Verdict::InsufficientData)
            .collect();
        if !thin.is_empty() {
            out.push_str("\n### Insufficient data\n\n");
            for f in thin {
                let c = f.evidence.group_counts;
                out.push_str(&format!(
                    "- {}: too few records with {} (group counts {}).\n",
                    f.crop,
                    factor_phrase(factor),
                    c.map(|n| n.to_string()).join("/")
                ));
            }
        }
    }
    out
}

/// Renders findings as a JSON array or a markdown report grouped by factor.
pub fn findings_document(
    findings: &[OptimalFinding],
    format: Format,
) -> Result<String, ReportError> {
    match format {
        Format::Json => Ok(json_text(&serde_json::Value::Array(
            findings.iter().map(OptimalFinding::to_json).collect(),
        ))),
        Format::Markdown => Ok(findings_markdown(findings)),
        Format::Delimited => Err(ReportError::UnsupportedFormat(format)),
    }
}

pub fn emit_findings(
    findings: &[OptimalFinding],
    format: Format,
    path: &Path,
) -> Result<(), ReportError> {
    write(path, &findings_document(findings, format)?)
}

/// Parses a JSON findings document.
pub fn parse_findings(text: &str) -> Result<Vec<OptimalFinding>, String> {
    let v: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    v.as_array()
        .ok_or("findings document is not an array")?
        .iter()
        .map(OptimalFinding::from_json)
        .collect()
}

/// Provenance of a report run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMetadata {
    pub catalog_digest: String,
    pub snapshot_digest: String,
    pub rule: Option<SignificanceRule>,
    pub command: String,
    pub timestamp: String,
}

impl RunMetadata {
    pub fn new(snap: &Snapshot, rule: Option<SignificanceRule>, command: &str) -> Self {
        Self {
            catalog_digest: snap.catalog().digest().to_hex(),
            snapshot_digest: snap.digest().to_hex(),
            rule,
            command: command.to_string(),
            timestamp: chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
        }
    }

    pub fn to_json(&self) -> String {
        json_text(&json!({
            "catalog_digest": self.catalog_digest,
            "snapshot_digest": self.snapshot_digest,
            "rule": self.rule.map(|r| r.to_json()),
            "command": self.command,
            "timestamp": self.timestamp,
        }))
    }
}

pub fn emit_run_metadata(meta: &RunMetadata, path: &Path) -> Result<(), ReportError> {
    write(path, &meta.to_json())
}

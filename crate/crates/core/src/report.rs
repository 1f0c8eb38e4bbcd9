//! CSV and JSON outputs. Rows and summaries contain no timings or other
//! run-dependent data, so equal inputs give byte-identical files.

use std::fs;
use std::io;
use std::path::Path;

use serde::Serialize;

use crate::metric::converge::{ChainCheck, ConvergenceReport, Extrapolation, Status};
use crate::metric::{DistanceEstimate, SpectrumReport};

/// One cell of a table: a value at one `a`, with its bounds and provenance.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct Row {
    pub kind: String,
    pub label: String,
    pub level_time: String,
    pub line_time: String,
    /// `0` for extrapolated limits.
    pub a: f64,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Whether `lower` is a proven bound rather than a placeholder.
    pub certified_lower: bool,
    pub method: String,
    /// Radius covered by the leaf lift.
    pub ball_radius: f64,
    /// Whether the computation stayed inside that radius.
    pub complete: bool,
}

pub fn distance_rows(kind: &str, label: &str, line_time: &str, est: &[DistanceEstimate]) -> Vec<Row> {
    est.iter()
        .map(|e| Row {
            kind: kind.into(),
            label: label.into(),
            level_time: e.time.clone(),
            line_time: line_time.into(),
            a: e.a,
            value: e.value(),
            lower: e.lower,
            upper: e.upper,
            certified_lower: e.certified_lower,
            method: e.method.clone(),
            ball_radius: e.covered_radius,
            complete: e.complete,
        })
        .collect()
}

/// Grid rows of a spectrum. On τ-levels the tree translation length is a
/// lower bound.
pub fn spectrum_rows(r: &SpectrumReport, ball_radius: f64) -> Vec<Row> {
    let certified = r.level_time == "cosmological";
    r.points
        .iter()
        .map(|p| Row {
            kind: if r.level_time == r.line_time { "l" } else { "l_prime" }.into(),
            label: r.gamma.to_string(),
            level_time: r.level_time.clone(),
            line_time: r.line_time.clone(),
            a: p.a,
            value: p.value,
            lower: if certified { r.tree_value } else { 0.0 },
            upper: p.value,
            certified_lower: certified,
            method: format!("nelder-mead {} evaluations", p.evaluations),
            ball_radius,
            complete: true,
        })
        .collect()
}

pub fn method_of(e: &Extrapolation) -> String {
    match e.order {
        Some(p) => format!("{:?} order {p:.4}", e.kind).to_lowercase(),
        None => format!("{:?}", e.kind).to_lowercase(),
    }
}

/// Every cell of a convergence run, followed by one `a = 0` row per
/// extrapolated item.
pub fn convergence_rows(report: &ConvergenceReport, ball_radius: f64) -> Vec<Row> {
    let mut rows = Vec::new();
    for d in &report.distances {
        rows.extend(distance_rows(&d.kind, &d.label, "cosmological", &d.estimates));
    }
    for r in &report.spectra {
        rows.extend(spectrum_rows(r, ball_radius));
    }
    for item in &report.items {
        rows.push(Row {
            kind: format!("{}_limit", item.kind),
            label: item.label.clone(),
            level_time: item.level_time.clone(),
            line_time: item.line_time.clone(),
            a: 0.0,
            value: item.extrapolation.limit,
            lower: item.target,
            upper: item.target,
            certified_lower: false,
            method: method_of(&item.extrapolation),
            ball_radius,
            complete: item.status != Status::Inconclusive,
        });
    }
    rows
}

pub fn write_csv(path: &Path, rows: &[Row]) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> io::Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)
}

/// Per-item line of a convergence summary.
#[derive(Clone, Debug, Serialize)]
pub struct ItemSummary {
    pub kind: String,
    pub label: String,
    pub level_time: String,
    pub line_time: String,
    pub limit: f64,
    pub method: String,
    pub target: f64,
    pub last_value: f64,
    pub monotone: Option<bool>,
    pub status: Status,
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvergenceSummary {
    pub status: Status,
    pub passed: usize,
    pub failed: usize,
    pub inconclusive: usize,
    pub items: Vec<ItemSummary>,
    pub chains: Vec<ChainCheck>,
}

pub fn convergence_summary(report: &ConvergenceReport) -> ConvergenceSummary {
    let items: Vec<ItemSummary> = report
        .items
        .iter()
        .map(|i| ItemSummary {
            kind: i.kind.clone(),
            label: i.label.clone(),
            level_time: i.level_time.clone(),
            line_time: i.line_time.clone(),
            limit: i.extrapolation.limit,
            method: method_of(&i.extrapolation),
            target: i.target,
            last_value: i.values.last().copied().unwrap_or(f64::NAN),
            monotone: i.monotone,
            status: i.status,
        })
        .collect();
    let statuses = items.iter().map(|i| i.status).chain(report.chains.iter().map(|c| c.status));
    let (mut passed, mut failed, mut inconclusive) = (0, 0, 0);
    for s in statuses {
        match s {
            Status::Pass => passed += 1,
            Status::Fail => failed += 1,
            Status::Inconclusive => inconclusive += 1,
        }
    }
    ConvergenceSummary {
        status: report.status,
        passed,
        failed,
        inconclusive,
        items,
        chains: report.chains.clone(),
    }
}

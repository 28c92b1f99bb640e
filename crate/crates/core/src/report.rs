//! Report emission: trace tables, distance summaries and consolidation of
//! prior runs into one table keyed by `(p, c, schedule-hash)`.
//!
//! Rationals print exactly as `num/den` strings everywhere; decimal
//! renderings never appear in any comparison or output.

use std::io::Write;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::engine::{DefectVerdict, Schedule, ScheduleJson, Trace};
use crate::rat::{DistanceBound, Rat};

#[derive(Error, Debug)]
pub enum ReportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema mismatch in {path}: {what}")]
    Schema { path: String, what: String },
}

/// Short content hash of a schedule's canonical JSON, used as a run key.
pub fn schedule_hash(json: &ScheduleJson) -> String {
    let text = serde_json::to_string(json).expect("schedule serializes");
    let digest = Sha256::digest(text.as_bytes());
    let hex: String = digest.iter().map(|b| format!("{:02x}", b)).collect();
    hex[..12].to_string()
}

/// Serialized simulation result.
#[derive(Serialize, Deserialize)]
pub struct RunReport {
    pub p: u32,
    /// Seed exponent `c` of the run.
    pub c: String,
    pub schedule_hash: String,
    pub rows: Vec<TraceRow>,
    pub distance: DistanceBound,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub verdict: Option<DefectVerdict>,
}

/// One trace table row; `sigma` is the invariant of the step arriving at
/// this depth, empty at depth 0.
#[derive(Serialize, Deserialize, Clone)]
pub struct TraceRow {
    pub depth: usize,
    #[serde(rename = "type")]
    pub ext_type: String,
    pub c: String,
    pub jac_ratio: Rat,
    #[serde(rename = "M")]
    pub m_product: String,
    pub d_i: Rat,
    pub sigma: String,
}

pub fn trace_rows(trace: &Trace) -> Vec<TraceRow> {
    trace
        .states
        .iter()
        .enumerate()
        .map(|(depth, s)| TraceRow {
            depth,
            ext_type: s.ext_type.to_string(),
            c: s.c_exponent()
                .map(|c| c.to_string())
                .unwrap_or_else(|| "-".into()),
            jac_ratio: s.jac_ratio.clone(),
            m_product: s.m_product.to_string(),
            d_i: trace.d_values[depth].clone(),
            sigma: if depth == 0 {
                String::new()
            } else {
                trace.sigma_values[depth - 1].to_string()
            },
        })
        .collect()
}

pub fn run_report(
    trace: &Trace,
    schedule: &Schedule,
    distance: DistanceBound,
    verdict: Option<DefectVerdict>,
) -> RunReport {
    let json = ScheduleJson::from_parts(trace.seed_state(), schedule);
    RunReport {
        p: trace.p,
        c: trace
            .seed_state()
            .c_exponent()
            .map(|c| c.to_string())
            .unwrap_or_else(|| "-".into()),
        schedule_hash: schedule_hash(&json),
        rows: trace_rows(trace),
        distance,
        verdict,
    }
}

/// Write the trace table as CSV with a leading `#` metadata line carrying
/// the report key, so CSV outputs stay consolidatable.
pub fn write_trace_csv<W: Write>(mut out: W, report: &RunReport) -> Result<(), ReportError> {
    writeln!(
        out,
        "# p={} c={} schedule={} dist_lower={} dist_upper={} exact={}",
        report.p,
        report.c,
        report.schedule_hash,
        report.distance.lower,
        report.distance.upper,
        report.distance.exact
    )?;
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["depth", "type", "c", "jac_ratio", "M", "d_i", "sigma"])?;
    for r in &report.rows {
        w.write_record([
            r.depth.to_string(),
            r.ext_type.clone(),
            r.c.clone(),
            r.jac_ratio.to_string(),
            r.m_product.clone(),
            r.d_i.to_string(),
            r.sigma.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// One row of the consolidated report.
#[derive(Serialize, Deserialize, Clone, Debug, PartialEq)]
pub struct ConsolidatedRow {
    pub p: u32,
    pub c: String,
    pub schedule_hash: String,
    pub depth: usize,
    pub dist_lower: Rat,
    pub dist_upper: Rat,
    pub exact: bool,
}

/// Read a prior run output (JSON `RunReport` or the CSV with its `#` key
/// line) back into a consolidated row.
pub fn read_run_output(path: &std::path::Path) -> Result<ConsolidatedRow, ReportError> {
    let text = std::fs::read_to_string(path)?;
    let as_str = |p: &std::path::Path| p.display().to_string();
    if text.trim_start().starts_with('{') {
        let report: RunReport = serde_json::from_str(&text)?;
        return Ok(ConsolidatedRow {
            p: report.p,
            c: report.c,
            schedule_hash: report.schedule_hash,
            depth: report.rows.len().saturating_sub(1),
            dist_lower: report.distance.lower,
            dist_upper: report.distance.upper,
            exact: report.distance.exact,
        });
    }
    // CSV: parse the metadata line, count data rows
    let mut lines = text.lines();
    let meta = lines.next().ok_or_else(|| ReportError::Schema {
        path: as_str(path),
        what: "empty file".into(),
    })?;
    if !meta.starts_with('#') {
        return Err(ReportError::Schema {
            path: as_str(path),
            what: "missing `#` metadata line".into(),
        });
    }
    let mut p = None;
    let mut c = None;
    let mut hash = None;
    let mut lower = None;
    let mut upper = None;
    let mut exact = None;
    for field in meta.trim_start_matches('#').split_whitespace() {
        let Some((k, v)) = field.split_once('=') else {
            continue;
        };
        match k {
            "p" => p = v.parse::<u32>().ok(),
            "c" => c = Some(v.to_string()),
            "schedule" => hash = Some(v.to_string()),
            "dist_lower" => lower = v.parse::<Rat>().ok(),
            "dist_upper" => upper = v.parse::<Rat>().ok(),
            "exact" => exact = v.parse::<bool>().ok(),
            _ => {}
        }
    }
    let rows = lines.skip(1).filter(|l| !l.trim().is_empty()).count();
    match (p, c, hash, lower, upper, exact) {
        (
            Some(p),
            Some(c),
            Some(schedule_hash),
            Some(dist_lower),
            Some(dist_upper),
            Some(exact),
        ) => Ok(ConsolidatedRow {
            p,
            c,
            schedule_hash,
            depth: rows.saturating_sub(1),
            dist_lower,
            dist_upper,
            exact,
        }),
        _ => Err(ReportError::Schema {
            path: as_str(path),
            what: "metadata line lacks required keys".into(),
        }),
    }
}

pub fn write_consolidated_csv<W: Write>(
    out: W,
    rows: &[ConsolidatedRow],
) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "p",
        "c",
        "schedule_hash",
        "depth",
        "dist_lower",
        "dist_upper",
        "exact",
    ])?;
    for r in rows {
        w.write_record([
            r.p.to_string(),
            r.c.clone(),
            r.schedule_hash.clone(),
            r.depth.to_string(),
            r.dist_lower.to_string(),
            r.dist_upper.to_string(),
            r.exact.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

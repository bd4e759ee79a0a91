use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::exec::{sort_cells, CellKey, CellOutcome, CellTiming};
use super::ExperimentPlan;
use crate::error::{Error, Result};
use crate::gnn::Backbone;
use crate::metrics::MetricVector;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CellStatus {
    Ok,
    Failed,
}

/// One line of `cells.jsonl`. Metric keys sit at the top level and are
/// missing for failed cells.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub dataset: String,
    pub backbone: Backbone,
    pub method: String,
    pub seed: u64,
    pub status: CellStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(flatten)]
    pub metrics: Option<MetricVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub forget_size: Option<usize>,
    #[serde(default)]
    pub flags: Vec<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub std: f64,
}

impl MeanStd {
    pub fn of(values: &[f64]) -> Option<MeanStd> {
        let n = values.len();
        if n == 0 {
            return None;
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let std = if n == 1 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64).sqrt()
        };
        Some(MeanStd { mean, std })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricStats {
    pub ra_pre_pct: MeanStd,
    pub ra_post_pct: MeanStd,
    pub hs: MeanStd,
    pub esd: MeanStd,
    pub ged_delta: MeanStd,
    pub grs: MeanStd,
    pub mi_auc_pre: MeanStd,
    pub mi_auc_post: MeanStd,
}

impl MetricStats {
    /// Statistics over `rows` taken in the given order.
    pub fn of(rows: &[&MetricVector]) -> Option<MetricStats> {
        let col = |f: fn(&MetricVector) -> f64| {
            MeanStd::of(&rows.iter().map(|m| f(m)).collect::<Vec<_>>())
        };
        Some(MetricStats {
            ra_pre_pct: col(|m| m.ra_pre)?,
            ra_post_pct: col(|m| m.ra_post)?,
            hs: col(|m| m.hs)?,
            esd: col(|m| m.esd)?,
            ged_delta: col(|m| m.ged_delta as f64)?,
            grs: col(|m| m.grs as f64)?,
            mi_auc_pre: col(|m| m.mi_auc_pre)?,
            mi_auc_post: col(|m| m.mi_auc_post)?,
        })
    }
}

/// Mean and spread over the seeds of one `(dataset, backbone, method)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub dataset: String,
    pub backbone: Backbone,
    pub method: String,
    pub seeds_ok: Vec<u64>,
    pub seeds_failed: Vec<u64>,
    /// Absent when every seed failed.
    pub stats: Option<MetricStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub backbone: Backbone,
    pub method: String,
    pub seed: u64,
    #[serde(flatten)]
    pub timing: CellTiming,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub tool_version: String,
    pub plan: ExperimentPlan,
    pub cells: Vec<CellRecord>,
    pub aggregates: Vec<AggregateRow>,
    /// Wall times vary between runs, so they are written to their own file.
    #[serde(skip)]
    pub timings: Vec<TimingRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportStatus {
    Complete,
    Partial,
    AllFailed,
}

impl VerificationReport {
    pub fn status(&self) -> ReportStatus {
        let failed = self
            .cells
            .iter()
            .filter(|c| c.status == CellStatus::Failed)
            .count();
        match failed {
            0 => ReportStatus::Complete,
            n if n == self.cells.len() => ReportStatus::AllFailed,
            _ => ReportStatus::Partial,
        }
    }

    pub fn failed_cells(&self) -> impl Iterator<Item = &CellRecord> {
        self.cells.iter().filter(|c| c.status == CellStatus::Failed)
    }
}

/// Builds the report from cell outcomes given in any order.
pub fn assemble(plan: &ExperimentPlan, outcomes: Vec<CellOutcome>) -> VerificationReport {
    let dataset = plan.dataset.name();
    let mut by_key: BTreeMap<CellKey, CellOutcome> =
        outcomes.into_iter().map(|o| (o.key.clone(), o)).collect();
    let mut keys: Vec<CellKey> = by_key.keys().cloned().collect();
    sort_cells(&mut keys);

    let mut cells = Vec::with_capacity(keys.len());
    let mut timings = Vec::with_capacity(keys.len());
    for key in &keys {
        let o = by_key.remove(key).expect("key present");
        timings.push(TimingRecord {
            backbone: key.backbone,
            method: key.method.clone(),
            seed: key.seed,
            timing: o.timing,
        });
        cells.push(match o.result {
            Ok(s) => CellRecord {
                dataset: dataset.clone(),
                backbone: key.backbone,
                method: key.method.clone(),
                seed: key.seed,
                status: CellStatus::Ok,
                error: None,
                metrics: Some(s.metrics),
                forget_size: Some(s.forget_size),
                flags: s.flags,
                metadata: s.metadata,
            },
            Err(e) => CellRecord {
                dataset: dataset.clone(),
                backbone: key.backbone,
                method: key.method.clone(),
                seed: key.seed,
                status: CellStatus::Failed,
                error: Some(e),
                metrics: None,
                forget_size: None,
                flags: Vec::new(),
                metadata: BTreeMap::new(),
            },
        });
    }

    let aggregates = aggregate(&cells);
    VerificationReport {
        tool_version: TOOL_VERSION.to_string(),
        plan: plan.clone(),
        cells,
        aggregates,
        timings,
    }
}

/// Groups sorted cell records by `(dataset, backbone, method)`.
pub fn aggregate(cells: &[CellRecord]) -> Vec<AggregateRow> {
    let mut rows: Vec<AggregateRow> = Vec::new();
    let mut members: Vec<Vec<&MetricVector>> = Vec::new();
    for c in cells {
        let same = rows.last().is_some_and(|r| {
            r.dataset == c.dataset && r.backbone == c.backbone && r.method == c.method
        });
        if !same {
            rows.push(AggregateRow {
                dataset: c.dataset.clone(),
                backbone: c.backbone,
                method: c.method.clone(),
                seeds_ok: Vec::new(),
                seeds_failed: Vec::new(),
                stats: None,
            });
            members.push(Vec::new());
        }
        let row = rows.last_mut().expect("row");
        match &c.metrics {
            Some(m) if c.status == CellStatus::Ok => {
                row.seeds_ok.push(c.seed);
                members.last_mut().expect("members").push(m);
            }
            _ => row.seeds_failed.push(c.seed),
        }
    }
    for (row, ms) in rows.iter_mut().zip(&members) {
        row.stats = MetricStats::of(ms);
    }
    rows
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    /// `cells.jsonl` (one record per cell) and `report.json`.
    Records,
    /// `table.txt` and `membership.txt`.
    Table,
}

fn write(dir: &Path, name: &str, body: String) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, body).map_err(|e| Error::io(&path, e))
}

pub fn cells_jsonl(report: &VerificationReport) -> String {
    report
        .cells
        .iter()
        .map(|c| serde_json::to_string(c).expect("cell serializes") + "\n")
        .collect()
}

/// Parses `cells.jsonl` content back into records.
pub fn parse_cells(text: &str) -> Result<Vec<CellRecord>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| Error::Parse {
                path: "cells.jsonl".into(),
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn render(headers: &[&str], rows: &[Vec<String>]) -> String {
    let mut widths: Vec<usize> = headers.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, cell) in widths.iter_mut().zip(r) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, w))| {
                if i < 2 {
                    format!("{c:<w$}")
                } else {
                    format!("{c:>w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string() + "\n"
    };
    let mut out = line(headers.to_vec());
    out += &line(
        widths
            .iter()
            .map(|w| "-".repeat(*w))
            .collect::<Vec<_>>()
            .iter()
            .map(|s| s.as_str())
            .collect(),
    );
    for r in rows {
        out += &line(r.iter().map(|s| s.as_str()).collect());
    }
    out
}

fn pm(s: &MeanStd, digits: usize) -> String {
    format!("{:.digits$} ± {:.digits$}", s.mean, s.std)
}

fn notes(report: &VerificationReport) -> String {
    let mut out = String::new();
    for a in report
        .aggregates
        .iter()
        .filter(|a| !a.seeds_failed.is_empty())
    {
        let seeds: Vec<String> = a.seeds_failed.iter().map(|s| s.to_string()).collect();
        let _ = writeln!(
            out,
            "{}/{}: failed seeds {} ({} of {} cells aggregated)",
            a.backbone,
            a.method,
            seeds.join(","),
            a.seeds_ok.len(),
            a.seeds_ok.len() + a.seeds_failed.len()
        );
    }
    if out.is_empty() {
        out
    } else {
        format!("\n{out}")
    }
}

/// Mean ± sample std per backbone and method.
pub fn metrics_table(report: &VerificationReport) -> String {
    let headers = [
        "Backbone", "Method", "RA_pre", "RA_post", "HS", "ESD", "GED∆", "GRS",
    ];
    let rows: Vec<Vec<String>> = report
        .aggregates
        .iter()
        .map(|a| {
            let mut r = vec![a.backbone.to_string(), a.method.clone()];
            match &a.stats {
                Some(s) => r.extend([
                    pm(&s.ra_pre_pct, 2),
                    pm(&s.ra_post_pct, 2),
                    pm(&s.hs, 6),
                    pm(&s.esd, 6),
                    pm(&s.ged_delta, 1),
                    pm(&s.grs, 1),
                ]),
                None => r.extend(std::iter::repeat_n("failed".to_string(), 6)),
            }
            r
        })
        .collect();
    format!(
        "dataset: {}\nRA in percent; mean ± sample std over seeds\n\n{}{}",
        report.plan.dataset.name(),
        render(&headers, &rows),
        notes(report)
    )
}

/// Membership-inference ROC-AUC before and after unlearning.
pub fn membership_table(report: &VerificationReport) -> String {
    let headers = ["Backbone", "Method", "MI_AUC_pre", "MI_AUC_post"];
    let rows: Vec<Vec<String>> = report
        .aggregates
        .iter()
        .map(|a| {
            let mut r = vec![a.backbone.to_string(), a.method.clone()];
            match &a.stats {
                Some(s) => r.extend([pm(&s.mi_auc_pre, 4), pm(&s.mi_auc_post, 4)]),
                None => r.extend(std::iter::repeat_n("failed".to_string(), 2)),
            }
            r
        })
        .collect();
    format!(
        "dataset: {}\nmean ± sample std over seeds\n\n{}",
        report.plan.dataset.name(),
        render(&headers, &rows)
    )
}

/// Writes the requested formats into `dir`, plus `timings.json`.
pub fn emit_report(
    report: &VerificationReport,
    dir: &Path,
    formats: &[ReportFormat],
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if formats.contains(&ReportFormat::Records) {
        write(dir, "cells.jsonl", cells_jsonl(report))?;
        write(
            dir,
            "report.json",
            serde_json::to_string_pretty(report).expect("report serializes") + "\n",
        )?;
    }
    if formats.contains(&ReportFormat::Table) {
        write(dir, "table.txt", metrics_table(report))?;
        write(dir, "membership.txt", membership_table(report))?;
    }
    write(
        dir,
        "timings.json",
        serde_json::to_string_pretty(&report.timings).expect("timings serialize") + "\n",
    )
}

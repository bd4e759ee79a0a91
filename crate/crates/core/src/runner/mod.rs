//! Grid execution and reporting.
//!
//! A plan names one dataset and lists backbones, methods and seeds. Each
//! `(backbone, seed)` trains one baseline model and samples one forget set,
//! which every method at that seed then reuses.
//!
//! Output layout:
//!
//! ```text
//! <out>/cells.jsonl          one record per cell
//! <out>/report.json          plan echo, cells and aggregates
//! <out>/table.txt            RA_pre RA_post HS ESD GED∆ GRS, mean ± std
//! <out>/membership.txt       MI ROC-AUC before and after
//! <out>/timings.json         wall times (the only run-dependent file)
//! <out>/<backbone>-<method>-<seed>/{pre,post,forget.txt,metrics.json}
//! ```

mod exec;
mod plan;
mod report;

use crate::error::Result;
use crate::unlearning::Registry;

pub use exec::{
    cell_dir, execute, plan_cells, prepare, run_cell, run_prepared, CellKey, CellOutcome,
    CellSuccess, CellTiming, PreRun,
};
pub use plan::{DatasetSpec, ExperimentPlan, ModelSettings, DEFAULT_SEEDS, LARGE_GRAPH_NODES};
pub use report::{
    aggregate, assemble, cells_jsonl, emit_report, membership_table, metrics_table, parse_cells,
    AggregateRow, CellRecord, CellStatus, MeanStd, MetricStats, ReportFormat, ReportStatus,
    TimingRecord, VerificationReport, TOOL_VERSION,
};

/// Validates the plan, runs every cell and assembles the report. Fails when
/// the plan is invalid or the dataset cannot be loaded. Cell failures are
/// recorded in the report; check [`VerificationReport::status`].
pub fn run_plan(plan: &ExperimentPlan, registry: &Registry) -> Result<VerificationReport> {
    plan.validate(registry)?;
    let g = plan.load_graph()?;
    log::info!(
        "dataset {}: {} nodes, {} edges, {} classes",
        plan.dataset.name(),
        g.num_nodes(),
        g.edges().len(),
        g.num_classes()
    );
    let outcomes = execute(plan, registry, &g, &plan_cells(plan), true);
    Ok(assemble(plan, outcomes))
}

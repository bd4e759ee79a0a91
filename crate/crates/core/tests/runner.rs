mod common;

use std::fs;
use std::path::Path;

use common::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use unlearn_audit::gnn::Backbone;
use unlearn_audit::runner::*;
use unlearn_audit::unlearning::{MethodArgs, Registry};
use unlearn_audit::Error;

const REPORT_FILES: [&str; 4] = ["cells.jsonl", "report.json", "table.txt", "membership.txt"];

fn gcn_plan(out: &Path) -> ExperimentPlan {
    let mut plan = fixture_plan(out);
    plan.backbones = vec![Backbone::Gcn];
    plan
}

fn run_and_emit(plan: &ExperimentPlan) -> VerificationReport {
    let report = run_plan(plan, &Registry::default()).unwrap();
    emit_report(
        &report,
        &plan.out,
        &[ReportFormat::Records, ReportFormat::Table],
    )
    .unwrap();
    report
}

#[test]
fn grid_counts_and_aggregates() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = gcn_plan(tmp.path());
    let report = run_and_emit(&plan);
    assert_eq!(report.status(), ReportStatus::Complete);
    assert_eq!(report.cells.len(), 9);
    assert_eq!(report.aggregates.len(), 3);
    assert_eq!(report.tool_version, env!("CARGO_PKG_VERSION"));
    for a in &report.aggregates {
        let rows: Vec<f64> = report
            .cells
            .iter()
            .filter(|c| c.method == a.method)
            .map(|c| c.metrics.as_ref().unwrap().hs)
            .collect();
        assert_eq!(rows.len(), 3);
        let mean = rows.iter().sum::<f64>() / 3.0;
        let std = (rows.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / 2.0).sqrt();
        let s = a.stats.as_ref().unwrap();
        assert_eq!((s.hs.mean, s.hs.std), (mean, std));
    }
    for c in &report.cells {
        assert_eq!(c.forget_size, Some(10));
        let dir = tmp.path().join(format!("gcn-{}-{}", c.method, c.seed));
        for f in [
            "forget.txt",
            "metrics.json",
            "pre/attribution.tsv",
            "post/rules.txt",
        ] {
            assert!(dir.join(f).exists(), "{}", dir.join(f).display());
        }
    }
}

#[test]
fn mean_and_sample_std() {
    assert_eq!(
        MeanStd::of(&[4.0, 5.0, 6.0]),
        Some(MeanStd {
            mean: 5.0,
            std: 1.0
        })
    );
    assert_eq!(
        MeanStd::of(&[2.5]),
        Some(MeanStd {
            mean: 2.5,
            std: 0.0
        })
    );
    assert_eq!(MeanStd::of(&[]), None);
}

#[test]
fn forget_set_is_shared_across_methods_and_varies_across_seeds() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = gcn_plan(tmp.path());
    run_and_emit(&plan);
    let read = |m: &str, s: u64| {
        fs::read_to_string(tmp.path().join(format!("gcn-{m}-{s}/forget.txt"))).unwrap()
    };
    for s in [1001, 1002, 1003] {
        assert_eq!(read("retrain", s), read("noop", s));
        assert_eq!(read("retrain", s), read("local-finetune", s));
    }
    assert_ne!(read("retrain", 1001), read("retrain", 1002));
    assert_ne!(read("retrain", 1002), read("retrain", 1003));
}

#[test]
fn records_parse_back_to_identical_metric_vectors() {
    let tmp = tempfile::tempdir().unwrap();
    let report = run_and_emit(&gcn_plan(tmp.path()));
    let text = fs::read_to_string(tmp.path().join("cells.jsonl")).unwrap();
    let parsed = parse_cells(&text).unwrap();
    assert_eq!(parsed, report.cells);
    for line in text.lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        for key in [
            "ra_pre_pct",
            "ra_post_pct",
            "hs",
            "esd",
            "ged_delta",
            "grs",
            "mi_auc_pre",
            "mi_auc_post",
        ] {
            assert!(v.get(key).is_some(), "{key} missing");
        }
    }
    let full: VerificationReport =
        serde_json::from_str(&fs::read_to_string(tmp.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(full.cells, report.cells);
    assert_eq!(full.aggregates, report.aggregates);
    assert_eq!(full.plan, report.plan);
}

#[test]
fn table_has_the_metric_columns_in_order() {
    let tmp = tempfile::tempdir().unwrap();
    run_and_emit(&gcn_plan(tmp.path()));
    let table = fs::read_to_string(tmp.path().join("table.txt")).unwrap();
    let header = table.lines().find(|l| l.starts_with("Backbone")).unwrap();
    let cols: Vec<&str> = header.split_whitespace().collect();
    assert_eq!(
        cols,
        ["Backbone", "Method", "RA_pre", "RA_post", "HS", "ESD", "GED∆", "GRS"]
    );
    assert_eq!(table.lines().filter(|l| l.starts_with("gcn")).count(), 3);
    let mi = fs::read_to_string(tmp.path().join("membership.txt")).unwrap();
    assert!(mi.contains("MI_AUC_pre") && mi.contains("MI_AUC_post"));
}

fn report_bytes(dir: &Path) -> Vec<Vec<u8>> {
    REPORT_FILES
        .iter()
        .map(|f| fs::read(dir.join(f)).unwrap())
        .collect()
}

#[test]
fn repeated_and_shuffled_runs_are_identical() {
    let (a, b, c) = (
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
        tempfile::tempdir().unwrap(),
    );
    let mut plan = fixture_plan(a.path());
    plan.seeds = vec![1001, 1002];
    run_and_emit(&plan);
    plan.out = b.path().to_path_buf();
    let first = report_bytes(a.path());

    // Same plan, output directory aside, must give the same bytes.
    let mut again = plan.clone();
    again.out = a.path().to_path_buf();
    let r2 = run_plan(&again, &Registry::default()).unwrap();
    emit_report(&r2, b.path(), &[ReportFormat::Records, ReportFormat::Table]).unwrap();
    assert_eq!(first, report_bytes(b.path()));

    let g = plan.load_graph().unwrap();
    let mut keys = plan_cells(&plan);
    keys.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    let mut shuffled_plan = plan.clone();
    shuffled_plan.out = c.path().to_path_buf();
    let outcomes = execute(&shuffled_plan, &Registry::default(), &g, &keys, false);
    let mut r3 = assemble(&shuffled_plan, outcomes);
    r3.plan.out = a.path().to_path_buf();
    emit_report(&r3, c.path(), &[ReportFormat::Records, ReportFormat::Table]).unwrap();
    assert_eq!(first, report_bytes(c.path()));
    for k in &keys {
        for f in [
            "pre/attribution.tsv",
            "post/attribution.tsv",
            "post/rules.txt",
            "metrics.json",
        ] {
            let rel = format!("{}/{f}", k.dir_name());
            assert_eq!(
                fs::read(a.path().join(&rel)).unwrap(),
                fs::read(c.path().join(&rel)).unwrap(),
                "{rel}"
            );
        }
    }
}

#[test]
fn invalid_plans_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let base = fixture_plan(tmp.path());
    let reg = Registry::default();
    let cases: Vec<Box<dyn Fn(&mut ExperimentPlan)>> = vec![
        Box::new(|p| p.methods.clear()),
        Box::new(|p| p.backbones.clear()),
        Box::new(|p| p.seeds.clear()),
        Box::new(|p| p.forget_frac = 0.0),
        Box::new(|p| p.forget_frac = 1.0),
        Box::new(|p| p.k = 0),
        Box::new(|p| p.methods.push("retrain".into())),
        Box::new(|p| p.methods = vec!["foo".into()]),
        Box::new(|p| p.method_args = MethodArgs::parse(["bogus=1"]).unwrap()),
        Box::new(|p| p.model.hidden = 0),
    ];
    for (i, edit) in cases.iter().enumerate() {
        let mut plan = base.clone();
        edit(&mut plan);
        let err = run_plan(&plan, &reg).unwrap_err();
        assert!(matches!(err, Error::Plan(_)), "case {i}: {err}");
    }
    assert!(!tmp.path().join("cells.jsonl").exists());
}

#[test]
fn failing_cells_are_recorded_without_stopping_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let mut plan = gcn_plan(tmp.path());
    plan.seeds = vec![1001];
    // The size gate forces an error only at load; instead make one method fail.
    plan.methods = vec!["noop".into(), "local-finetune".into()];
    plan.method_args = MethodArgs::parse(["radius=notanumber"]).unwrap();
    let report = run_plan(&plan, &Registry::default()).unwrap();
    assert_eq!(report.status(), ReportStatus::Partial);
    let failed: Vec<_> = report.failed_cells().collect();
    assert_eq!(failed.len(), 1);
    assert_eq!(failed[0].method, "local-finetune");
    assert!(failed[0].error.as_ref().unwrap().contains("radius"));
    assert!(failed[0].metrics.is_none());
    emit_report(
        &report,
        tmp.path(),
        &[ReportFormat::Records, ReportFormat::Table],
    )
    .unwrap();
    let parsed = parse_cells(&fs::read_to_string(tmp.path().join("cells.jsonl")).unwrap()).unwrap();
    assert_eq!(parsed, report.cells);
    let table = fs::read_to_string(tmp.path().join("table.txt")).unwrap();
    assert!(table.contains("failed seeds 1001"));
}

#[test]
fn large_graphs_need_the_override() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("big");
    fs::create_dir(&data).unwrap();
    let n = LARGE_GRAPH_NODES + 1;
    fs::write(data.join("edges.txt"), "0 1\n").unwrap();
    fs::write(data.join("features.csv"), "1\n".repeat(n)).unwrap();
    fs::write(data.join("labels.txt"), "0\n1\n".repeat(n / 2) + "0\n").unwrap();
    fs::write(
        data.join("masks.txt"),
        "train\ntest\n".repeat(n / 2) + "val\n",
    )
    .unwrap();
    let ds = DatasetSpec::parse(
        data.to_str().unwrap(),
        unlearn_audit::graph::GraphFormat::EdgeList,
    )
    .unwrap();
    assert_eq!(ds.name(), "big");
    let mut plan = ExperimentPlan::new(ds, tmp.path().join("out"));
    assert!(matches!(plan.load_graph(), Err(Error::Plan(_))));
    plan.allow_large = true;
    assert_eq!(plan.load_graph().unwrap().num_nodes(), n);
}

#[test]
fn single_cell_matches_the_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let plan = gcn_plan(tmp.path());
    let report = run_and_emit(&plan);
    let g = plan.load_graph().unwrap();
    let key = CellKey {
        backbone: Backbone::Gcn,
        method: "local-finetune".into(),
        seed: 1002,
    };
    let (one, _) = run_cell(&plan, &Registry::default(), &g, &key).unwrap();
    let cell = report
        .cells
        .iter()
        .find(|c| c.method == key.method && c.seed == key.seed)
        .unwrap();
    assert_eq!(cell.metrics.as_ref().unwrap(), &one.metrics);
}

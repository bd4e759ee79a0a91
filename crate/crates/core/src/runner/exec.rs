use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentPlan;
use crate::error::{Error, Result};
use crate::explain::{take_snapshot, write_snapshot, Snapshot, SnapshotSettings};
use crate::gnn::{self, write_checkpoint, Backbone, ModelConfig, ModelParams};
use crate::graph::{sample_forget_set, ForgetSet, Graph, NodeId, Split};
use crate::metrics::{compute_all_flagged, MetricVector};
use crate::rng::{derive_seed, Role};
use crate::unlearning::{Registry, StrategyInput};

/// One grid cell.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellKey {
    pub backbone: Backbone,
    pub method: String,
    pub seed: u64,
}

impl CellKey {
    /// Directory name under the output root.
    pub fn dir_name(&self) -> String {
        format!("{}-{}-{}", self.backbone, self.method, self.seed)
    }

    fn sort_key(&self) -> (&'static str, &str, u64) {
        (self.backbone.as_str(), &self.method, self.seed)
    }
}

/// Result of a successful cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSuccess {
    pub metrics: MetricVector,
    pub forget_size: usize,
    pub flags: Vec<String>,
    pub metadata: BTreeMap<String, String>,
}

/// Wall-clock seconds spent in each stage of a cell.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CellTiming {
    /// Pre-model training and snapshot, shared by the cells of one
    /// `(backbone, seed)`.
    pub pre_seconds: f64,
    pub strategy_seconds: f64,
    pub post_seconds: f64,
}

#[derive(Debug, Clone)]
pub struct CellOutcome {
    pub key: CellKey,
    pub result: std::result::Result<CellSuccess, String>,
    pub timing: CellTiming,
}

/// State shared by all methods at one `(backbone, seed)`.
#[derive(Debug, Clone)]
pub struct PreRun {
    pub config: ModelConfig,
    pub params: ModelParams,
    pub forget: ForgetSet,
    pub heldout: Vec<NodeId>,
    pub settings: SnapshotSettings,
    pub snapshot: Snapshot,
    pub seconds: f64,
}

/// Trains the pre-unlearning model, samples the forget set and takes the
/// baseline snapshot. The forget set depends on the seed only.
pub fn prepare(plan: &ExperimentPlan, g: &Graph, backbone: Backbone, seed: u64) -> Result<PreRun> {
    let start = Instant::now();
    let config = plan.model.config(backbone, seed);
    let forget = sample_forget_set(g, plan.forget_frac, seed)?;
    let heldout = g.nodes_in(Split::Test);
    let settings = SnapshotSettings {
        k: plan.k,
        depth: plan.tree_depth,
        tree_seed: derive_seed(seed, Role::Tree),
    };
    let params = gnn::train(g, &config)?;
    let snapshot = take_snapshot("pre", &params, g, &config, &forget, &heldout, &settings)?;
    Ok(PreRun {
        config,
        params,
        forget,
        heldout,
        settings,
        snapshot,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn write_cell_artifacts(
    dir: &Path,
    pre: &PreRun,
    post: &Snapshot,
    params_post: &ModelParams,
    success: &CellSuccess,
    save_params: bool,
) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_snapshot(&pre.snapshot, &dir.join("pre"))?;
    write_snapshot(post, &dir.join("post"))?;
    let forget: String = pre
        .forget
        .nodes()
        .iter()
        .map(|v| format!("{v}\n"))
        .collect();
    let path = dir.join("forget.txt");
    fs::write(&path, forget).map_err(|e| Error::io(&path, e))?;
    let path = dir.join("metrics.json");
    let body = serde_json::to_string_pretty(&success.metrics).expect("metrics serialize") + "\n";
    fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    if save_params {
        write_checkpoint(&pre.params, &dir.join("params_pre.txt"))?;
        write_checkpoint(params_post, &dir.join("params_post.txt"))?;
    }
    Ok(())
}

/// Runs one method against a prepared baseline and writes the cell's
/// artifacts under `out/<cell>/`.
pub fn run_prepared(
    plan: &ExperimentPlan,
    registry: &Registry,
    g: &Graph,
    pre: &PreRun,
    key: &CellKey,
) -> Result<(CellSuccess, CellTiming)> {
    let input = StrategyInput {
        graph: g,
        forget: &pre.forget,
        config: &pre.config,
        pre_params: &pre.params,
        args: &plan.method_args,
    };
    let outcome = registry.run_strategy(&key.method, input)?;
    let post_start = Instant::now();
    let post = take_snapshot(
        "post",
        &outcome.params_post,
        &outcome.graph_post,
        &pre.config,
        &pre.forget,
        &pre.heldout,
        &pre.settings,
    )?;
    let (metrics, metric_flags) =
        compute_all_flagged(&pre.snapshot, &post, &pre.forget, &outcome.graph_post)?;
    metrics.check_ranges()?;
    let mut flags: Vec<String> = metric_flags.into_iter().map(String::from).collect();
    flags.extend(outcome.flags);
    let success = CellSuccess {
        metrics,
        forget_size: pre.forget.len(),
        flags,
        metadata: outcome.metadata,
    };
    write_cell_artifacts(
        &plan.out.join(key.dir_name()),
        pre,
        &post,
        &outcome.params_post,
        &success,
        plan.save_params,
    )?;
    let timing = CellTiming {
        pre_seconds: pre.seconds,
        strategy_seconds: outcome.wall_time.as_secs_f64(),
        post_seconds: post_start.elapsed().as_secs_f64(),
    };
    Ok((success, timing))
}

/// Runs a single cell from scratch, baseline included.
pub fn run_cell(
    plan: &ExperimentPlan,
    registry: &Registry,
    g: &Graph,
    key: &CellKey,
) -> Result<(CellSuccess, CellTiming)> {
    let pre = prepare(plan, g, key.backbone, key.seed)?;
    run_prepared(plan, registry, g, &pre, key)
}

/// Every cell of the plan in sorted order.
pub fn plan_cells(plan: &ExperimentPlan) -> Vec<CellKey> {
    let mut keys: Vec<CellKey> = plan
        .backbones
        .iter()
        .flat_map(|&backbone| {
            plan.methods.iter().flat_map(move |method| {
                plan.seeds.iter().map(move |&seed| CellKey {
                    backbone,
                    method: method.clone(),
                    seed,
                })
            })
        })
        .collect();
    sort_cells(&mut keys);
    keys
}

pub(crate) fn sort_cells(keys: &mut [CellKey]) {
    keys.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Runs `keys`, sharing one baseline per `(backbone, seed)`. Groups run
/// concurrently when `parallel` is set; otherwise everything runs in the
/// order given. A failing stage marks the affected cells failed.
pub fn execute(
    plan: &ExperimentPlan,
    registry: &Registry,
    g: &Graph,
    keys: &[CellKey],
    parallel: bool,
) -> Vec<CellOutcome> {
    let mut groups: Vec<((Backbone, u64), Vec<CellKey>)> = Vec::new();
    for key in keys {
        let id = (key.backbone, key.seed);
        match groups.iter_mut().find(|(g, _)| *g == id) {
            Some((_, members)) => members.push(key.clone()),
            None => groups.push((id, vec![key.clone()])),
        }
    }
    let run_group =
        |((backbone, seed), members): &((Backbone, u64), Vec<CellKey>)| -> Vec<CellOutcome> {
            log::info!("training {backbone} baseline for seed {seed}");
            let pre = match prepare(plan, g, *backbone, *seed) {
                Ok(pre) => pre,
                Err(e) => {
                    log::error!("{backbone} seed {seed}: baseline failed: {e}");
                    return members
                        .iter()
                        .map(|key| CellOutcome {
                            key: key.clone(),
                            result: Err(format!("baseline: {e}")),
                            timing: CellTiming::default(),
                        })
                        .collect();
                }
            };
            let run_one = |key: &CellKey| {
                log::info!("running cell {}", key.dir_name());
                match run_prepared(plan, registry, g, &pre, key) {
                    Ok((s, timing)) => CellOutcome {
                        key: key.clone(),
                        result: Ok(s),
                        timing,
                    },
                    Err(e) => {
                        log::error!("cell {} failed: {e}", key.dir_name());
                        CellOutcome {
                            key: key.clone(),
                            result: Err(e.to_string()),
                            timing: CellTiming {
                                pre_seconds: pre.seconds,
                                ..CellTiming::default()
                            },
                        }
                    }
                }
            };
            if parallel {
                members.par_iter().map(run_one).collect()
            } else {
                members.iter().map(run_one).collect()
            }
        };
    if parallel {
        groups.par_iter().flat_map(run_group).collect()
    } else {
        groups.iter().flat_map(run_group).collect()
    }
}

/// Directory holding a cell's artifacts.
pub fn cell_dir(plan: &ExperimentPlan, key: &CellKey) -> PathBuf {
    plan.out.join(key.dir_name())
}

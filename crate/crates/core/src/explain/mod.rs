//! Explanation artifacts and snapshots.

mod export;
mod surrogate;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::gnn::{self, LossReport, ModelConfig, ModelParams, Wrt};
use crate::graph::{proxy_graph, EdgeSet, ForgetSet, Graph, NodeId, Split};

pub use export::{read_snapshot, write_snapshot};
pub use surrogate::{fit_tree, Cmp, Predicate, Rule, RuleSet};

/// Per-node saliency over every original node id; absent nodes hold 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributionMap {
    values: Vec<f64>,
}

impl AttributionMap {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::arg(format!(
                "attribution value {v} is not finite and nonnegative"
            )));
        }
        Ok(AttributionMap { values })
    }

    pub fn zeros(n: usize) -> Self {
        AttributionMap {
            values: vec![0.0; n],
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, v: NodeId) -> f64 {
        self.values.get(v).copied().unwrap_or(0.0)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Map with every value multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        AttributionMap::new(self.values.iter().map(|v| v * c).collect())
    }
}

/// L1 norm of each node's input-feature gradient of the mean train-split
/// cross-entropy, in eval mode.
pub fn saliency(params: &ModelParams, g: &Graph, config: &ModelConfig) -> Result<AttributionMap> {
    if params.in_dim() != g.feature_dim() {
        return Err(Error::arg(format!(
            "model expects {} features, graph has {}",
            params.in_dim(),
            g.feature_dim()
        )));
    }
    let train = g.nodes_in(Split::Train);
    if train.is_empty() {
        return Err(Error::arg("saliency needs at least one present train node"));
    }
    let grads = gnn::loss_and_gradients(params, g, config, &train, Wrt::Inputs)?;
    let gx = grads.inputs.expect("input gradients");
    let values = (0..g.num_nodes())
        .map(|v| {
            if g.is_present(v) {
                gx.row(v).iter().map(|x| x.abs()).sum()
            } else {
                0.0
            }
        })
        .collect();
    AttributionMap::new(values)
}

/// Decision tree over raw features of present nodes, fit to the model's
/// predicted classes.
pub fn fit_surrogate(
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
    depth: usize,
    tree_seed: u64,
) -> Result<RuleSet> {
    let preds = gnn::predictions(params, g, config)?;
    let nodes = g.present_nodes();
    if nodes.is_empty() {
        return Err(Error::arg("surrogate needs at least one present node"));
    }
    let mut x = ndarray::Array2::zeros((nodes.len(), g.feature_dim()));
    for (r, &v) in nodes.iter().enumerate() {
        x.row_mut(r).assign(&g.feature_row(v));
    }
    let y: Vec<usize> = nodes
        .iter()
        .map(|&v| preds[v].expect("present node"))
        .collect();
    Ok(fit_tree(&x, &y, g.num_classes(), depth, tree_seed))
}

/// Fixed explainer settings shared by the pre and post snapshots of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotSettings {
    pub k: usize,
    pub depth: usize,
    pub tree_seed: u64,
}

impl Default for SnapshotSettings {
    fn default() -> Self {
        SnapshotSettings {
            k: 2,
            depth: 3,
            tree_seed: 0,
        }
    }
}

/// Explanation artifacts of one `(params, graph)` pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub label: String,
    pub attribution: AttributionMap,
    pub proxy: EdgeSet,
    pub rules: RuleSet,
    pub member_losses: LossReport,
    pub nonmember_losses: LossReport,
    pub predictions: Vec<Option<usize>>,
    /// Present nodes of the graph the snapshot was taken on.
    pub present: Vec<NodeId>,
    /// Hex SHA-256 over model config, explainer settings, forget set and
    /// held-out pool. Snapshots of one run share it.
    pub digest: String,
}

#[derive(Serialize)]
struct DigestInput<'a> {
    config: &'a ModelConfig,
    settings: &'a SnapshotSettings,
    forget: &'a [NodeId],
    heldout: &'a [NodeId],
}

pub fn run_digest(
    config: &ModelConfig,
    settings: &SnapshotSettings,
    f: &ForgetSet,
    heldout: &[NodeId],
) -> String {
    let input = DigestInput {
        config,
        settings,
        forget: f.nodes(),
        heldout,
    };
    let bytes = serde_json::to_vec(&input).expect("digest input serializes");
    hex::encode(Sha256::digest(&bytes))
}

/// Computes every artifact for `(params, g)`.
///
/// Members are present train nodes; non-members are present nodes of
/// `heldout`, which must not intersect the train split.
pub fn take_snapshot(
    label: &str,
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
    f: &ForgetSet,
    heldout: &[NodeId],
    settings: &SnapshotSettings,
) -> Result<Snapshot> {
    if let Some(&v) = heldout
        .iter()
        .find(|&&v| v >= g.num_nodes() || g.split(v) == Split::Train)
    {
        return Err(Error::arg(format!(
            "held-out node {v} is a train node or out of range"
        )));
    }
    let attribution = saliency(params, g, config)?;
    let proxy = if f.is_empty() {
        EdgeSet::new()
    } else {
        proxy_graph(g, f, settings.k)?
    };
    let rules = fit_surrogate(params, g, config, settings.depth, settings.tree_seed)?;
    let members = g.nodes_in(Split::Train);
    let nonmembers: Vec<NodeId> = heldout
        .iter()
        .copied()
        .filter(|&v| g.is_present(v))
        .collect();
    let member_losses = gnn::per_node_losses(params, g, config, &members)?;
    let nonmember_losses = gnn::per_node_losses(params, g, config, &nonmembers)?;
    let predictions = gnn::predictions(params, g, config)?;
    Ok(Snapshot {
        label: label.to_string(),
        attribution,
        proxy,
        rules,
        member_losses,
        nonmember_losses,
        predictions,
        present: g.present_nodes(),
        digest: run_digest(config, settings, f, heldout),
    })
}

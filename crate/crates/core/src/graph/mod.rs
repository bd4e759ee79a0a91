//! Attributed undirected graphs with stable node identities.
//!
//! Nodes are never reindexed. Deleting a node clears its `present` flag and
//! drops its incident edges, so per-node quantities computed before and after
//! a deletion stay aligned by id.

mod edges;
mod io;
mod ops;
pub mod pickle;
mod planetoid;
mod sbm;

use ndarray::{Array2, ArrayView1};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use edges::{edge_symmetric_difference, EdgeSet};
pub use io::{load_edge_list, EdgeListFiles};
pub use ops::{ego_network, proxy_graph, remove_nodes, sample_forget_set, within_hops, ForgetSet};
pub use planetoid::load_planetoid;
pub use sbm::{generate_sbm, SbmSpec};

pub type NodeId = usize;

/// Split membership of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
    None,
}

impl std::str::FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            "none" => Ok(Split::None),
            other => Err(format!("unknown split `{other}`")),
        }
    }
}

/// On-disk dataset layouts accepted by [`load_graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GraphFormat {
    EdgeList,
    PlanetoidRaw,
}

impl std::str::FromStr for GraphFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "edge-list" => Ok(GraphFormat::EdgeList),
            "planetoid-raw" => Ok(GraphFormat::PlanetoidRaw),
            other => Err(format!(
                "unknown format `{other}` (expected edge-list or planetoid-raw)"
            )),
        }
    }
}

pub fn load_graph(path: &std::path::Path, format: GraphFormat) -> Result<Graph> {
    match format {
        GraphFormat::EdgeList => load_edge_list(&EdgeListFiles::in_dir(path)),
        GraphFormat::PlanetoidRaw => load_planetoid(path),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    features: Array2<f64>,
    labels: Vec<usize>,
    num_classes: usize,
    edges: EdgeSet,
    splits: Vec<Split>,
    present: Vec<bool>,
    neighbors: Vec<Vec<NodeId>>,
}

impl Graph {
    /// Builds a graph in which every node is present.
    ///
    /// `num_classes` defaults to `max(label) + 1`.
    pub fn new(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: Option<usize>,
        edges: EdgeSet,
        splits: Vec<Split>,
    ) -> Result<Self> {
        let n = features.nrows();
        let present = vec![true; n];
        Self::from_parts(features, labels, num_classes, edges, splits, present)
    }

    fn from_parts(
        features: Array2<f64>,
        labels: Vec<usize>,
        num_classes: Option<usize>,
        edges: EdgeSet,
        splits: Vec<Split>,
        present: Vec<bool>,
    ) -> Result<Self> {
        let n = features.nrows();
        if labels.len() != n {
            return Err(Error::integrity(format!(
                "{} label rows for {} feature rows",
                labels.len(),
                n
            )));
        }
        if splits.len() != n {
            return Err(Error::integrity(format!(
                "{} mask rows for {} feature rows",
                splits.len(),
                n
            )));
        }
        if let Some(v) = features.iter().find(|v| !v.is_finite()) {
            return Err(Error::integrity(format!("non-finite feature value {v}")));
        }
        let num_classes = num_classes.unwrap_or_else(|| labels.iter().max().map_or(0, |&m| m + 1));
        if let Some(&bad) = labels.iter().find(|&&l| l >= num_classes) {
            return Err(Error::integrity(format!(
                "label {bad} outside [0, {num_classes})"
            )));
        }
        let mut neighbors = vec![Vec::new(); n];
        for (u, v) in edges.iter() {
            if v >= n {
                return Err(Error::integrity(format!(
                    "edge ({u}, {v}) references node {v} but the graph has {n} nodes"
                )));
            }
            if !present[u] || !present[v] {
                return Err(Error::integrity(format!(
                    "edge ({u}, {v}) touches an absent node"
                )));
            }
            neighbors[u].push(v);
            neighbors[v].push(u);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Graph {
            features,
            labels,
            num_classes,
            edges,
            splits,
            present,
            neighbors,
        })
    }

    /// Number of node identities, present or not.
    pub fn num_nodes(&self) -> usize {
        self.features.nrows()
    }

    pub fn num_present(&self) -> usize {
        self.present.iter().filter(|&&p| p).count()
    }

    pub fn feature_dim(&self) -> usize {
        self.features.ncols()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn feature_row(&self, v: NodeId) -> ArrayView1<'_, f64> {
        self.features.row(v)
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, v: NodeId) -> usize {
        self.labels[v]
    }

    pub fn edges(&self) -> &EdgeSet {
        &self.edges
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn split(&self, v: NodeId) -> Split {
        self.splits[v]
    }

    pub fn is_present(&self, v: NodeId) -> bool {
        self.present.get(v).copied().unwrap_or(false)
    }

    /// Sorted neighbors of `v`; empty for absent nodes.
    pub fn neighbors(&self, v: NodeId) -> &[NodeId] {
        &self.neighbors[v]
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.neighbors[v].len()
    }

    /// Present node ids in ascending order.
    pub fn present_nodes(&self) -> Vec<NodeId> {
        (0..self.num_nodes()).filter(|&v| self.present[v]).collect()
    }

    /// Present nodes carrying `split`, ascending.
    pub fn nodes_in(&self, split: Split) -> Vec<NodeId> {
        (0..self.num_nodes())
            .filter(|&v| self.present[v] && self.splits[v] == split)
            .collect()
    }

    /// Copy of the graph with a replacement feature matrix of the same shape.
    pub fn with_features(&self, features: Array2<f64>) -> Result<Graph> {
        if features.dim() != self.features.dim() {
            return Err(Error::arg(format!(
                "feature matrix {:?} does not match graph {:?}",
                features.dim(),
                self.features.dim()
            )));
        }
        let mut g = self.clone();
        g.features = features;
        Ok(g)
    }

    pub(crate) fn without(&self, removed: &[NodeId]) -> Result<Graph> {
        let mut present = self.present.clone();
        for &v in removed {
            present[v] = false;
        }
        let edges: EdgeSet = self
            .edges
            .iter()
            .filter(|&(u, v)| present[u] && present[v])
            .collect();
        Graph::from_parts(
            self.features.clone(),
            self.labels.clone(),
            Some(self.num_classes),
            edges,
            self.splits.clone(),
            present,
        )
    }
}

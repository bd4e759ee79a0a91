use std::collections::VecDeque;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::{EdgeSet, Graph, NodeId};
use crate::error::{Error, Result};
use crate::rng::{self, Role};

/// Nodes designated for removal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForgetSet {
    nodes: Vec<NodeId>,
    seed: u64,
    fraction: f64,
}

impl ForgetSet {
    /// Hand-picked forget set. `fraction` is recorded as `|nodes| / present`.
    pub fn explicit(g: &Graph, nodes: impl IntoIterator<Item = NodeId>) -> Result<Self> {
        let mut nodes: Vec<NodeId> = nodes.into_iter().collect();
        nodes.sort_unstable();
        nodes.dedup();
        if let Some(&v) = nodes.iter().find(|&&v| !g.is_present(v)) {
            return Err(Error::arg(format!("forget node {v} is not present")));
        }
        let fraction = nodes.len() as f64 / g.num_present().max(1) as f64;
        Ok(ForgetSet {
            nodes,
            seed: 0,
            fraction,
        })
    }

    /// Sorted node ids.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.binary_search(&v).is_ok()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn fraction(&self) -> f64 {
        self.fraction
    }
}

/// Samples `round(fraction * n)` present nodes uniformly without replacement.
pub fn sample_forget_set(g: &Graph, fraction: f64, seed: u64) -> Result<ForgetSet> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::arg(format!(
            "forget fraction {fraction} not in (0, 1)"
        )));
    }
    let candidates = g.present_nodes();
    let m = (fraction * candidates.len() as f64).round() as usize;
    if m == 0 {
        return Err(Error::arg(format!(
            "forget fraction {fraction} selects no node out of {}",
            candidates.len()
        )));
    }
    let mut rng = rng::stream(seed, Role::ForgetSampling);
    let mut nodes: Vec<NodeId> = index::sample(&mut rng, candidates.len(), m)
        .into_iter()
        .map(|i| candidates[i])
        .collect();
    nodes.sort_unstable();
    Ok(ForgetSet {
        nodes,
        seed,
        fraction,
    })
}

/// Marks the forget set absent and drops its incident edges.
pub fn remove_nodes(g: &Graph, f: &ForgetSet) -> Result<Graph> {
    if let Some(&v) = f.nodes().iter().find(|&&v| !g.is_present(v)) {
        return Err(Error::arg(format!("node {v} is already absent")));
    }
    g.without(f.nodes())
}

fn ball(g: &Graph, centers: &[NodeId], k: usize) -> Vec<bool> {
    let mut dist = vec![usize::MAX; g.num_nodes()];
    let mut inside = vec![false; g.num_nodes()];
    let mut queue = VecDeque::new();
    for &c in centers {
        if dist[c] == usize::MAX {
            dist[c] = 0;
            inside[c] = true;
            queue.push_back(c);
        }
    }
    while let Some(u) = queue.pop_front() {
        if dist[u] == k {
            continue;
        }
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                inside[w] = true;
                queue.push_back(w);
            }
        }
    }
    inside
}

/// Edges of the subgraph induced by the nodes within `k` hops of `center`.
pub fn ego_network(g: &Graph, center: NodeId, k: usize) -> Result<EdgeSet> {
    if !g.is_present(center) {
        return Err(Error::arg(format!("ego center {center} is not present")));
    }
    let inside = ball(g, &[center], k);
    let mut out = EdgeSet::new();
    for u in (0..g.num_nodes()).filter(|&u| inside[u]) {
        for &w in g.neighbors(u) {
            if u < w && inside[w] {
                out.insert(u, w);
            }
        }
    }
    Ok(out)
}

/// Nodes within `k` hops of any of `sources`, sources included, ascending.
pub fn within_hops(g: &Graph, sources: &[NodeId], k: usize) -> Result<Vec<NodeId>> {
    if let Some(&v) = sources.iter().find(|&&v| !g.is_present(v)) {
        return Err(Error::arg(format!("source node {v} is not present")));
    }
    let inside = ball(g, sources, k);
    Ok((0..g.num_nodes()).filter(|&v| inside[v]).collect())
}

/// Union of the `k`-hop ego networks around the forget set.
///
/// Forget nodes that are absent from `g` (as after a deletion) have an empty
/// neighbourhood and contribute no edges.
pub fn proxy_graph(g: &Graph, f: &ForgetSet, k: usize) -> Result<EdgeSet> {
    if k == 0 {
        return Err(Error::arg("proxy hop count must be at least 1"));
    }
    let mut out = EdgeSet::new();
    for &v in f.nodes().iter().filter(|&&v| g.is_present(v)) {
        out.extend_from(&ego_network(g, v, k)?);
    }
    Ok(out)
}

use ndarray::Array2;

use super::Backbone;
use crate::graph::{Graph, NodeId};

/// `D^{-1/2} (A + I) D^{-1/2}` over present nodes in ascending id order.
pub fn normalized_adjacency(g: &Graph) -> Array2<f64> {
    let nodes = g.present_nodes();
    let mut row_of = vec![usize::MAX; g.num_nodes()];
    for (r, &v) in nodes.iter().enumerate() {
        row_of[v] = r;
    }
    let inv_sqrt: Vec<f64> = nodes
        .iter()
        .map(|&v| 1.0 / ((g.degree(v) + 1) as f64).sqrt())
        .collect();
    let n = nodes.len();
    let mut a = Array2::zeros((n, n));
    for (r, &v) in nodes.iter().enumerate() {
        a[[r, r]] = inv_sqrt[r] * inv_sqrt[r];
        for &w in g.neighbors(v) {
            let c = row_of[w];
            a[[r, c]] = inv_sqrt[r] * inv_sqrt[c];
        }
    }
    a
}

/// Graph structure prepared for message passing over present nodes.
///
/// Rows are present nodes in ascending id order. GCN uses the dense
/// normalized adjacency; GAT attends over each row's neighbors plus itself.
#[derive(Debug, Clone)]
pub struct Propagation {
    nodes: Vec<NodeId>,
    row_of: Vec<Option<usize>>,
    pub(crate) adjacency: Option<Array2<f64>>,
    pub(crate) attend: Vec<Vec<usize>>,
}

impl Propagation {
    pub fn new(g: &Graph, backbone: Backbone) -> Self {
        let nodes = g.present_nodes();
        let mut row_of = vec![None; g.num_nodes()];
        for (r, &v) in nodes.iter().enumerate() {
            row_of[v] = Some(r);
        }
        let (adjacency, attend) = match backbone {
            Backbone::Gcn => (Some(normalized_adjacency(g)), Vec::new()),
            Backbone::Gat => {
                let attend = nodes
                    .iter()
                    .enumerate()
                    .map(|(r, &v)| {
                        let mut cols: Vec<usize> = g
                            .neighbors(v)
                            .iter()
                            .map(|&w| row_of[w].expect("neighbor is present"))
                            .collect();
                        cols.push(r);
                        cols.sort_unstable();
                        cols
                    })
                    .collect();
                (None, attend)
            }
        };
        Propagation {
            nodes,
            row_of,
            adjacency,
            attend,
        }
    }

    /// Node id of each row.
    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn row_of(&self, v: NodeId) -> Option<usize> {
        self.row_of.get(v).copied().flatten()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Feature rows of the present nodes.
    pub fn gather(&self, g: &Graph) -> Array2<f64> {
        let mut x = Array2::zeros((self.nodes.len(), g.feature_dim()));
        for (r, &v) in self.nodes.iter().enumerate() {
            x.row_mut(r).assign(&g.feature_row(v));
        }
        x
    }
}

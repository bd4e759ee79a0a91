//! Dense two-layer GCN and single-head GAT with hand-written reverse-mode
//! gradients and full-batch Adam training.

mod checkpoint;
mod model;
mod propagation;
mod train;

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, Role};

pub use checkpoint::{checkpoint_string, parse_checkpoint, read_checkpoint, write_checkpoint};
pub use model::{
    attention_weights, forward, loss_and_gradients, AttentionRow, Gradients, Logits, Mode, Wrt,
};
pub use propagation::{normalized_adjacency, Propagation};
pub use train::{
    cross_entropy_rows, per_node_losses, predictions, train, train_steps, Adam, LossReport,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backbone {
    Gcn,
    Gat,
}

impl Backbone {
    pub fn as_str(self) -> &'static str {
        match self {
            Backbone::Gcn => "gcn",
            Backbone::Gat => "gat",
        }
    }
}

impl std::fmt::Display for Backbone {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Backbone {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "gcn" => Ok(Backbone::Gcn),
            "gat" => Ok(Backbone::Gat),
            other => Err(format!("unknown backbone `{other}` (expected gcn or gat)")),
        }
    }
}

/// Architecture and optimizer settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub backbone: Backbone,
    pub hidden: usize,
    pub layers: usize,
    pub dropout: f64,
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
    pub gat_heads: usize,
    pub leaky_slope: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl ModelConfig {
    pub fn new(backbone: Backbone, seed: u64) -> Self {
        ModelConfig {
            backbone,
            hidden: 64,
            layers: 2,
            dropout: 0.5,
            lr: 0.005,
            epochs: 100,
            seed,
            gat_heads: 1,
            leaky_slope: 0.2,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden == 0 {
            return Err(Error::arg("hidden width must be at least 1"));
        }
        if self.layers != 2 {
            return Err(Error::arg(format!(
                "only 2-layer models are supported, got {}",
                self.layers
            )));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::arg(format!(
                "dropout {} not in [0, 1)",
                self.dropout
            )));
        }
        if self.gat_heads != 1 {
            return Err(Error::arg("only single-head attention is supported"));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::arg(format!(
                "learning rate {} must be positive",
                self.lr
            )));
        }
        Ok(())
    }
}

/// Attention vectors of one GAT layer; score of edge `j -> i` is
/// `leaky(src · p_i + dst · p_j)` where `p = h W`.
#[derive(Debug, Clone, PartialEq)]
pub struct Attention {
    pub src: Array1<f64>,
    pub dst: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub attention: Option<Attention>,
}

impl Layer {
    fn zeros(fan_in: usize, fan_out: usize, attention: bool) -> Layer {
        Layer {
            weight: Array2::zeros((fan_in, fan_out)),
            bias: Array1::zeros(fan_out),
            attention: attention.then(|| Attention {
                src: Array1::zeros(fan_out),
                dst: Array1::zeros(fan_out),
            }),
        }
    }
}

/// Trained (or initial) weights of a two-layer model.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub backbone: Backbone,
    pub seed: u64,
    pub layers: [Layer; 2],
}

fn glorot(rng: &mut impl Rng, values: &mut [f64], fan_in: usize, fan_out: usize) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    for v in values {
        *v = rng.random_range(-limit..limit);
    }
}

impl ModelParams {
    pub fn zeros(backbone: Backbone, in_dim: usize, hidden: usize, classes: usize) -> Self {
        let att = backbone == Backbone::Gat;
        ModelParams {
            backbone,
            seed: 0,
            layers: [
                Layer::zeros(in_dim, hidden, att),
                Layer::zeros(hidden, classes, att),
            ],
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for s in z.slices_mut() {
            s.fill(0.0);
        }
        z
    }

    /// Glorot-uniform weights and attention vectors, zero biases, drawn from
    /// the `Init` stream of `config.seed`.
    pub fn init(config: &ModelConfig, in_dim: usize, classes: usize) -> Self {
        let mut p = Self::zeros(config.backbone, in_dim, config.hidden, classes);
        p.seed = config.seed;
        let mut rng = rng::stream(config.seed, Role::Init);
        for layer in &mut p.layers {
            let (fi, fo) = layer.weight.dim();
            glorot(&mut rng, layer.weight.as_slice_mut().unwrap(), fi, fo);
            if let Some(att) = &mut layer.attention {
                glorot(&mut rng, att.src.as_slice_mut().unwrap(), fo, 1);
                glorot(&mut rng, att.dst.as_slice_mut().unwrap(), fo, 1);
            }
        }
        p
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].weight.nrows()
    }

    pub fn hidden(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn classes(&self) -> usize {
        self.layers[1].weight.ncols()
    }

    /// Every tensor as a flat row-major slice, in a fixed order:
    /// per layer weight, bias, then attention src and dst.
    pub fn slices(&self) -> Vec<&[f64]> {
        let mut out = Vec::new();
        for l in &self.layers {
            out.push(l.weight.as_slice().expect("standard layout"));
            out.push(l.bias.as_slice().expect("standard layout"));
            if let Some(a) = &l.attention {
                out.push(a.src.as_slice().expect("standard layout"));
                out.push(a.dst.as_slice().expect("standard layout"));
            }
        }
        out
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::new();
        for l in &mut self.layers {
            out.push(l.weight.as_slice_mut().expect("standard layout"));
            out.push(l.bias.as_slice_mut().expect("standard layout"));
            if let Some(a) = &mut l.attention {
                out.push(a.src.as_slice_mut().expect("standard layout"));
                out.push(a.dst.as_slice_mut().expect("standard layout"));
            }
        }
        out
    }

    pub fn num_values(&self) -> usize {
        self.slices().iter().map(|s| s.len()).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.slices()
            .iter()
            .all(|s| s.iter().all(|v| v.is_finite()))
    }

    pub(crate) fn check_shapes(&self, in_dim: usize, classes: usize) -> Result<()> {
        if self.in_dim() != in_dim || self.classes() != classes {
            return Err(Error::arg(format!(
                "model expects {} features and {} classes, graph has {in_dim} and {classes}",
                self.in_dim(),
                self.classes()
            )));
        }
        Ok(())
    }
}

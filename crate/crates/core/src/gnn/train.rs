use serde::{Deserialize, Serialize};

use super::model::{backward, forward_prepared, Mode, Wrt};
use super::{ModelConfig, ModelParams, Propagation};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, Split};
use crate::rng::{self, Role};

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: &ModelConfig, params: &ModelParams) -> Self {
        let shapes: Vec<Vec<f64>> = params.slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Adam {
            lr: config.lr,
            beta1: config.beta1,
            beta2: config.beta2,
            eps: config.eps,
            step: 0,
            m: shapes.clone(),
            v: shapes,
        }
    }

    pub fn update(&mut self, params: &mut ModelParams, grads: &ModelParams) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        for (((p, g), m), v) in params
            .slices_mut()
            .into_iter()
            .zip(grads.slices())
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            for i in 0..p.len() {
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g[i];
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Runs `epochs` full-batch Adam steps on the mean cross-entropy of `nodes`,
/// starting from `start`. Dropout masks come from the `(config.seed, role)`
/// stream.
pub fn train_steps(
    start: ModelParams,
    g: &Graph,
    config: &ModelConfig,
    nodes: &[NodeId],
    epochs: usize,
    role: Role,
) -> Result<ModelParams> {
    config.validate()?;
    start.check_shapes(g.feature_dim(), g.num_classes())?;
    if nodes.is_empty() {
        return Err(Error::arg("training node set is empty"));
    }
    let prop = Propagation::new(g, start.backbone);
    let x = prop.gather(g);
    let rows = nodes
        .iter()
        .map(|&v| {
            prop.row_of(v)
                .ok_or_else(|| Error::arg(format!("training node {v} is not present")))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = nodes.iter().map(|&v| g.label(v)).collect();
    let mut params = start;
    let mut adam = Adam::new(config, &params);
    let mut dropout = rng::stream(config.seed, role);
    for epoch in 0..epochs {
        let (loss, grads, _) = backward(
            &params,
            &prop,
            x.clone(),
            config,
            Mode::Train(&mut dropout),
            &rows,
            &labels,
            Wrt::Parameters,
        )?;
        log::trace!("epoch {epoch}: loss {loss:.6}");
        adam.update(&mut params, &grads.expect("parameter gradients"));
        if !params.is_finite() {
            return Err(Error::Numeric {
                layer: "parameters",
            });
        }
    }
    Ok(params)
}

/// Trains from a fresh Glorot initialization on the train split.
pub fn train(g: &Graph, config: &ModelConfig) -> Result<ModelParams> {
    config.validate()?;
    let nodes = g.nodes_in(Split::Train);
    if nodes.is_empty() {
        return Err(Error::arg("train mask is empty"));
    }
    let init = ModelParams::init(config, g.feature_dim(), g.num_classes());
    train_steps(init, g, config, &nodes, config.epochs, Role::Dropout)
}

/// Per-node cross-entropy values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub nodes: Vec<NodeId>,
    pub losses: Vec<f64>,
}

impl LossReport {
    pub fn len(&self) -> usize {
        self.losses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.losses.is_empty()
    }
}

/// Cross-entropy of each requested row of `logits`.
pub fn cross_entropy_rows(
    logits: &ndarray::Array2<f64>,
    rows: &[usize],
    labels: &[usize],
) -> Vec<f64> {
    rows.iter()
        .zip(labels)
        .map(|(&r, &y)| {
            let z = logits.row(r);
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
            (max + sum.ln() - z[y]).max(0.0)
        })
        .collect()
}

fn eval_logits(
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
) -> Result<(Propagation, ndarray::Array2<f64>)> {
    params.check_shapes(g.feature_dim(), g.num_classes())?;
    let prop = Propagation::new(g, params.backbone);
    let logits = forward_prepared(params, &prop, prop.gather(g), config, Mode::Eval)?;
    Ok((prop, logits))
}

/// Eval-mode cross-entropy of every node in `nodes`.
pub fn per_node_losses(
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
    nodes: &[NodeId],
) -> Result<LossReport> {
    let (prop, logits) = eval_logits(params, g, config)?;
    let rows = nodes
        .iter()
        .map(|&v| {
            prop.row_of(v)
                .ok_or_else(|| Error::arg(format!("node {v} is not present")))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = nodes.iter().map(|&v| g.label(v)).collect();
    Ok(LossReport {
        nodes: nodes.to_vec(),
        losses: cross_entropy_rows(&logits, &rows, &labels),
    })
}

/// Eval-mode argmax class per node id; `None` for absent nodes.
pub fn predictions(
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
) -> Result<Vec<Option<usize>>> {
    let (prop, logits) = eval_logits(params, g, config)?;
    let mut out = vec![None; g.num_nodes()];
    for (r, &v) in prop.nodes().iter().enumerate() {
        let row = logits.row(r);
        let best =
            row.iter().enumerate().fold(
                (0, f64::NEG_INFINITY),
                |b, (c, &z)| if z > b.1 { (c, z) } else { b },
            );
        out[v] = Some(best.0);
    }
    Ok(out)
}

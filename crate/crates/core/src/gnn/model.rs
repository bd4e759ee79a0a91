//! Forward pass and reverse-mode gradients.

use ndarray::{Array1, Array2, Axis, Zip};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{Attention, Layer, ModelConfig, ModelParams, Propagation};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

/// Whether dropout is active.
pub enum Mode<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Per-row outputs of one GAT layer kept for the backward pass.
struct AttentionCache {
    src_score: Array1<f64>,
    dst_score: Array1<f64>,
    alpha: Vec<Vec<f64>>,
}

struct LayerCache {
    input: Array2<f64>,
    projected: Array2<f64>,
    attention: Option<AttentionCache>,
}

struct Trace {
    first: LayerCache,
    hidden_pre: Array2<f64>,
    dropout_scale: Option<Array2<f64>>,
    second: LayerCache,
    logits: Array2<f64>,
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn finite(a: &Array2<f64>, layer: &'static str) -> Result<()> {
    if a.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric { layer })
    }
}

fn layer_forward(
    layer: &Layer,
    prop: &Propagation,
    input: Array2<f64>,
    slope: f64,
) -> (Array2<f64>, LayerCache) {
    let projected = input.dot(&layer.weight);
    let (mut out, attention) = match &layer.attention {
        None => {
            let a = prop.adjacency.as_ref().expect("GCN propagation");
            (a.dot(&projected), None)
        }
        Some(att) => {
            let src_score = projected.dot(&att.src);
            let dst_score = projected.dot(&att.dst);
            let mut out = Array2::zeros(projected.dim());
            let mut alpha = Vec::with_capacity(prop.attend.len());
            for (i, cols) in prop.attend.iter().enumerate() {
                let scores: Vec<f64> = cols
                    .iter()
                    .map(|&j| leaky(src_score[i] + dst_score[j], slope))
                    .collect();
                let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let exp: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
                let total: f64 = exp.iter().sum();
                let weights: Vec<f64> = exp.iter().map(|e| e / total).collect();
                let mut row = out.row_mut(i);
                for (&j, &w) in cols.iter().zip(&weights) {
                    row.scaled_add(w, &projected.row(j));
                }
                alpha.push(weights);
            }
            (
                out,
                Some(AttentionCache {
                    src_score,
                    dst_score,
                    alpha,
                }),
            )
        }
    };
    out += &layer.bias;
    (
        out,
        LayerCache {
            input,
            projected,
            attention,
        },
    )
}

/// Backpropagates `grad_out` through one layer. Returns the input gradient
/// when `need_input` is set.
fn layer_backward(
    layer: &Layer,
    cache: &LayerCache,
    prop: &Propagation,
    grad_out: &Array2<f64>,
    slope: f64,
    grads: Option<&mut Layer>,
    need_input: bool,
) -> Option<Array2<f64>> {
    let mut grad_projected;
    let mut grad_att = None;
    match (&layer.attention, &cache.attention) {
        (None, _) => {
            let a = prop.adjacency.as_ref().expect("GCN propagation");
            grad_projected = a.t().dot(grad_out);
        }
        (Some(att), Some(ac)) => {
            let n = prop.attend.len();
            grad_projected = Array2::zeros(cache.projected.dim());
            let mut grad_src = Array1::<f64>::zeros(n);
            let mut grad_dst = Array1::<f64>::zeros(n);
            for (i, cols) in prop.attend.iter().enumerate() {
                let alpha = &ac.alpha[i];
                let g_i = grad_out.row(i);
                // dL/dalpha_ij = g_i . p_j
                let d_alpha: Vec<f64> = cols
                    .iter()
                    .map(|&j| g_i.dot(&cache.projected.row(j)))
                    .collect();
                let weighted: f64 = alpha.iter().zip(&d_alpha).map(|(a, d)| a * d).sum();
                for (k, &j) in cols.iter().enumerate() {
                    grad_projected.row_mut(j).scaled_add(alpha[k], &g_i);
                    let d_score = alpha[k] * (d_alpha[k] - weighted);
                    let raw = ac.src_score[i] + ac.dst_score[j];
                    let d_raw = if raw > 0.0 { d_score } else { slope * d_score };
                    grad_src[i] += d_raw;
                    grad_dst[j] += d_raw;
                }
            }
            for (mut row, (&gs, &gd)) in grad_projected
                .rows_mut()
                .into_iter()
                .zip(grad_src.iter().zip(grad_dst.iter()))
            {
                row.scaled_add(gs, &att.src);
                row.scaled_add(gd, &att.dst);
            }
            grad_att = Some(Attention {
                src: cache.projected.t().dot(&grad_src),
                dst: cache.projected.t().dot(&grad_dst),
            });
        }
        (Some(_), None) => unreachable!("attention layer without attention cache"),
    }
    if let Some(g) = grads {
        g.bias = grad_out.sum_axis(Axis(0));
        g.weight = cache.input.t().dot(&grad_projected);
        if let Some(a) = grad_att {
            g.attention = Some(a);
        }
    }
    need_input.then(|| grad_projected.dot(&layer.weight.t()))
}

fn run(
    params: &ModelParams,
    prop: &Propagation,
    x: Array2<f64>,
    config: &ModelConfig,
    mode: Mode<'_>,
) -> Result<Trace> {
    let slope = config.leaky_slope;
    let (hidden_pre, first) = layer_forward(&params.layers[0], prop, x, slope);
    finite(&hidden_pre, "layer 1")?;
    let mut hidden = hidden_pre.mapv(|v| v.max(0.0));
    let dropout_scale = match mode {
        Mode::Eval => None,
        Mode::Train(_) if config.dropout == 0.0 => None,
        Mode::Train(rng) => {
            let keep = 1.0 - config.dropout;
            let scale = Array2::from_shape_simple_fn(hidden.dim(), || {
                if rng.random::<f64>() < keep {
                    1.0 / keep
                } else {
                    0.0
                }
            });
            hidden *= &scale;
            Some(scale)
        }
    };
    let (logits, second) = layer_forward(&params.layers[1], prop, hidden, slope);
    finite(&logits, "layer 2")?;
    Ok(Trace {
        first,
        hidden_pre,
        dropout_scale,
        second,
        logits,
    })
}

/// Logits of every present node.
#[derive(Debug, Clone, PartialEq)]
pub struct Logits {
    pub nodes: Vec<NodeId>,
    pub values: Array2<f64>,
}

pub fn forward(
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
    mode: Mode<'_>,
) -> Result<Logits> {
    params.check_shapes(g.feature_dim(), g.num_classes())?;
    let prop = Propagation::new(g, params.backbone);
    let logits = forward_prepared(params, &prop, prop.gather(g), config, mode)?;
    Ok(Logits {
        nodes: prop.nodes().to_vec(),
        values: logits,
    })
}

pub(crate) fn forward_prepared(
    params: &ModelParams,
    prop: &Propagation,
    x: Array2<f64>,
    config: &ModelConfig,
    mode: Mode<'_>,
) -> Result<Array2<f64>> {
    Ok(run(params, prop, x, config, mode)?.logits)
}

/// What to differentiate with respect to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wrt {
    Parameters,
    Inputs,
    Both,
}

#[derive(Debug, Clone)]
pub struct Gradients {
    pub loss: f64,
    pub params: Option<ModelParams>,
    /// Gradient for every node id; rows of absent nodes are zero.
    pub inputs: Option<Array2<f64>>,
}

/// Mean cross-entropy over `rows` and its gradient with respect to the logits.
pub(crate) fn loss_and_logit_grad(
    logits: &Array2<f64>,
    labels: &[usize],
    rows: &[usize],
) -> (f64, Array2<f64>) {
    let mut grad = Array2::zeros(logits.dim());
    let scale = 1.0 / rows.len() as f64;
    let mut loss = 0.0;
    for (&r, &y) in rows.iter().zip(labels) {
        let z = logits.row(r);
        let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = z.iter().map(|v| (v - max).exp()).sum();
        let log_norm = max + sum.ln();
        loss += log_norm - z[y];
        let mut g = grad.row_mut(r);
        Zip::from(&mut g)
            .and(&z)
            .for_each(|g, &v| *g = (v - log_norm).exp() * scale);
        g[y] -= scale;
    }
    (loss * scale, grad)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn backward(
    params: &ModelParams,
    prop: &Propagation,
    x: Array2<f64>,
    config: &ModelConfig,
    mode: Mode<'_>,
    rows: &[usize],
    labels: &[usize],
    wrt: Wrt,
) -> Result<(f64, Option<ModelParams>, Option<Array2<f64>>)> {
    let trace = run(params, prop, x, config, mode)?;
    let (loss, grad_logits) = loss_and_logit_grad(&trace.logits, labels, rows);
    if !loss.is_finite() {
        return Err(Error::Numeric { layer: "loss" });
    }
    let want_params = matches!(wrt, Wrt::Parameters | Wrt::Both);
    let want_inputs = matches!(wrt, Wrt::Inputs | Wrt::Both);
    let mut grads = want_params.then(|| params.zeros_like());
    let slope = config.leaky_slope;

    let (g0, g1) = match &mut grads {
        Some(g) => {
            let [a, b] = &mut g.layers;
            (Some(a), Some(b))
        }
        None => (None, None),
    };
    let mut grad_hidden = layer_backward(
        &params.layers[1],
        &trace.second,
        prop,
        &grad_logits,
        slope,
        g1,
        true,
    )
    .expect("hidden gradient requested");
    if let Some(scale) = &trace.dropout_scale {
        grad_hidden *= scale;
    }
    Zip::from(&mut grad_hidden)
        .and(&trace.hidden_pre)
        .for_each(|g, &z| {
            if z <= 0.0 {
                *g = 0.0;
            }
        });
    let grad_x = layer_backward(
        &params.layers[0],
        &trace.first,
        prop,
        &grad_hidden,
        slope,
        g0,
        want_inputs,
    );
    Ok((loss, grads, grad_x))
}

/// Mean cross-entropy over `node_set` and its gradients, in eval mode.
pub fn loss_and_gradients(
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
    node_set: &[NodeId],
    wrt: Wrt,
) -> Result<Gradients> {
    params.check_shapes(g.feature_dim(), g.num_classes())?;
    if node_set.is_empty() {
        return Err(Error::arg("loss node set is empty"));
    }
    let prop = Propagation::new(g, params.backbone);
    let rows = node_set
        .iter()
        .map(|&v| {
            prop.row_of(v)
                .ok_or_else(|| Error::arg(format!("loss node {v} is not present")))
        })
        .collect::<Result<Vec<_>>>()?;
    let labels: Vec<usize> = node_set.iter().map(|&v| g.label(v)).collect();
    let (loss, params_grad, x_grad) = backward(
        params,
        &prop,
        prop.gather(g),
        config,
        Mode::Eval,
        &rows,
        &labels,
        wrt,
    )?;
    let inputs = x_grad.map(|gx| {
        let mut full = Array2::zeros((g.num_nodes(), g.feature_dim()));
        for (r, &v) in prop.nodes().iter().enumerate() {
            full.row_mut(v).assign(&gx.row(r));
        }
        full
    });
    Ok(Gradients {
        loss,
        params: params_grad,
        inputs,
    })
}

/// Attention row of one node: `(attended node, weight)` pairs.
pub type AttentionRow = (NodeId, Vec<(NodeId, f64)>);

/// Eval-mode attention coefficients of GAT layer `layer` (0 or 1): for each
/// present node, its attended nodes (neighbors plus itself) and weights.
pub fn attention_weights(
    params: &ModelParams,
    g: &Graph,
    config: &ModelConfig,
    layer: usize,
) -> Result<Vec<AttentionRow>> {
    params.check_shapes(g.feature_dim(), g.num_classes())?;
    if params
        .layers
        .get(layer)
        .and_then(|l| l.attention.as_ref())
        .is_none()
    {
        return Err(Error::arg(format!("layer {layer} has no attention")));
    }
    let prop = Propagation::new(g, params.backbone);
    let trace = run(params, &prop, prop.gather(g), config, Mode::Eval)?;
    let cache = if layer == 0 {
        &trace.first
    } else {
        &trace.second
    };
    let alpha = &cache.attention.as_ref().expect("attention cache").alpha;
    Ok(prop
        .attend
        .iter()
        .enumerate()
        .map(|(i, cols)| {
            (
                prop.nodes()[i],
                cols.iter()
                    .zip(&alpha[i])
                    .map(|(&j, &w)| (prop.nodes()[j], w))
                    .collect(),
            )
        })
        .collect())
}

#![allow(dead_code)]

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use unlearn_audit::gnn::{Backbone, ModelConfig, ModelParams};
use unlearn_audit::graph::{EdgeSet, Graph, Split};

/// Random labelled graph with `n` nodes, every node in the train split.
pub fn random_graph(n: usize, d: usize, classes: usize, p_edge: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = EdgeSet::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < p_edge {
                edges.insert(u, v);
            }
        }
    }
    let features = Array2::from_shape_simple_fn((n, d), || rng.random_range(-1.0..1.0));
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
    Graph::new(
        features,
        labels,
        Some(classes),
        edges,
        vec![Split::Train; n],
    )
    .unwrap()
}

pub fn small_config(backbone: Backbone, hidden: usize, seed: u64) -> ModelConfig {
    let mut c = ModelConfig::new(backbone, seed);
    c.hidden = hidden;
    c
}

/// Parameters with every entry, biases included, drawn uniformly from `[-scale, scale]`.
pub fn random_params(
    config: &ModelConfig,
    d: usize,
    classes: usize,
    scale: f64,
    seed: u64,
) -> ModelParams {
    let mut p = ModelParams::init(config, d, classes);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in p.slices_mut() {
        for v in s.iter_mut() {
            *v = rng.random_range(-scale..scale);
        }
    }
    p
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

/// Straight-line forward pass over present nodes, indexed by node id.
/// Rows of absent nodes are left at zero.
pub fn oracle_logits(p: &ModelParams, g: &Graph, slope: f64) -> Vec<Vec<f64>> {
    oracle_forward(p, g, slope).0
}

/// Oracle logits plus the sign of every ReLU and leaky-ReLU argument, in a
/// fixed traversal order. Two parameter settings with equal patterns lie in
/// the same differentiable piece of the network.
pub fn oracle_forward(p: &ModelParams, g: &Graph, slope: f64) -> (Vec<Vec<f64>>, Vec<bool>) {
    let mut pattern = Vec::new();
    let n = g.num_nodes();
    let present: Vec<bool> = (0..n).map(|v| g.is_present(v)).collect();
    let x: Vec<Vec<f64>> = (0..n).map(|v| g.feature_row(v).to_vec()).collect();
    let mut h = x;
    for (li, layer) in p.layers.iter().enumerate() {
        let (fi, fo) = layer.weight.dim();
        let mut proj = vec![vec![0.0; fo]; n];
        for v in 0..n {
            for o in 0..fo {
                let mut acc = 0.0;
                for k in 0..fi {
                    acc += h[v][k] * layer.weight[[k, o]];
                }
                proj[v][o] = acc;
            }
        }
        let mut out = vec![vec![0.0; fo]; n];
        for i in 0..n {
            if !present[i] {
                continue;
            }
            let mut group: Vec<usize> = g.neighbors(i).to_vec();
            group.push(i);
            let weights: Vec<f64> = match &layer.attention {
                None => {
                    let di = (g.degree(i) + 1) as f64;
                    group
                        .iter()
                        .map(|&j| 1.0 / (di.sqrt() * ((g.degree(j) + 1) as f64).sqrt()))
                        .collect()
                }
                Some(att) => {
                    let s_i: f64 = (0..fo).map(|k| att.src[k] * proj[i][k]).sum();
                    let e: Vec<f64> = group
                        .iter()
                        .map(|&j| {
                            let t_j: f64 = (0..fo).map(|k| att.dst[k] * proj[j][k]).sum();
                            pattern.push(s_i + t_j > 0.0);
                            leaky(s_i + t_j, slope)
                        })
                        .collect();
                    let m = e.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let z: f64 = e.iter().map(|v| (v - m).exp()).sum();
                    e.iter().map(|v| (v - m).exp() / z).collect()
                }
            };
            for (&j, &w) in group.iter().zip(&weights) {
                for o in 0..fo {
                    out[i][o] += w * proj[j][o];
                }
            }
            for o in 0..fo {
                out[i][o] += layer.bias[o];
            }
        }
        if li == 0 {
            for row in &mut out {
                for v in row.iter_mut() {
                    pattern.push(*v > 0.0);
                    *v = v.max(0.0);
                }
            }
        }
        h = out;
    }
    (h, pattern)
}

/// Mean cross-entropy over `nodes` from the oracle forward pass.
pub fn oracle_loss(p: &ModelParams, g: &Graph, slope: f64, nodes: &[usize]) -> f64 {
    mean_ce(&oracle_logits(p, g, slope), g, nodes)
}

/// 2-block fixture used across integration tests: 200 nodes.
pub fn sbm_fixture(seed: u64) -> Graph {
    unlearn_audit::graph::generate_sbm(&[100, 100], 0.1, 0.01, 16, seed).unwrap()
}

/// Outcome of comparing reverse-mode gradients with central differences.
#[derive(Debug, Default, Clone, Copy)]
pub struct GradCheck {
    pub max_rel_err: f64,
    pub checked: usize,
    /// Coordinates whose `±h` stencil crosses a ReLU/leaky-ReLU kink.
    pub kinked: usize,
}

impl GradCheck {
    fn record(&mut self, analytic: f64, numeric: f64) {
        let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(GRAD_FLOOR);
        self.max_rel_err = self.max_rel_err.max(rel);
        self.checked += 1;
    }
}

/// Denominator floor of the relative error; gradients below it are compared
/// in absolute terms.
pub const GRAD_FLOOR: f64 = 1e-6;
pub const FD_STEP: f64 = 1e-3;

/// Checks parameter and input gradients of `instances` random 10-node graphs.
pub fn gradient_check(backbone: Backbone, instances: u64) -> GradCheck {
    use unlearn_audit::gnn::{loss_and_gradients, Wrt};
    let mut out = GradCheck::default();
    let slope = 0.2;
    for inst in 0..instances {
        let g = random_graph(10, 4, 3, 0.3, 100 + inst);
        let cfg = small_config(backbone, 5, inst);
        let p = random_params(&cfg, 4, 3, 0.8, 200 + inst);
        let nodes: Vec<usize> = (0..10).filter(|v| v % 3 != 2).collect();
        let grads = loss_and_gradients(&p, &g, &cfg, &nodes, Wrt::Both).unwrap();
        let gp = grads.params.unwrap();
        let gx = grads.inputs.unwrap();

        let base_pattern = oracle_forward(&p, &g, slope).1;
        let n_slices = p.slices().len();
        for s in 0..n_slices {
            for i in 0..p.slices()[s].len() {
                let mut plus = p.clone();
                plus.slices_mut()[s][i] += FD_STEP;
                let mut minus = p.clone();
                minus.slices_mut()[s][i] -= FD_STEP;
                let (lp, pp) = oracle_forward(&plus, &g, slope);
                let (lm, pm) = oracle_forward(&minus, &g, slope);
                if pp != base_pattern || pm != base_pattern {
                    out.kinked += 1;
                    continue;
                }
                let fd = (mean_ce(&lp, &g, &nodes) - mean_ce(&lm, &g, &nodes)) / (2.0 * FD_STEP);
                out.record(gp.slices()[s][i], fd);
            }
        }
        for v in 0..g.num_nodes() {
            for k in 0..g.feature_dim() {
                let shift = |delta: f64| {
                    let mut x = g.features().clone();
                    x[[v, k]] += delta;
                    g.with_features(x).unwrap()
                };
                let (gplus, gminus) = (shift(FD_STEP), shift(-FD_STEP));
                let (lp, pp) = oracle_forward(&p, &gplus, slope);
                let (lm, pm) = oracle_forward(&p, &gminus, slope);
                if pp != base_pattern || pm != base_pattern {
                    out.kinked += 1;
                    continue;
                }
                let fd = (mean_ce(&lp, &gplus, &nodes) - mean_ce(&lm, &gminus, &nodes))
                    / (2.0 * FD_STEP);
                out.record(gx[[v, k]], fd);
            }
        }
    }
    out
}

fn mean_ce(logits: &[Vec<f64>], g: &Graph, nodes: &[usize]) -> f64 {
    let mut total = 0.0;
    for &v in nodes {
        let z = &logits[v];
        let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln();
        total += lse - z[g.label(v)];
    }
    total / nodes.len() as f64
}

/// The 200-node two-block graph used by end-to-end tests.
pub const SBM_FIXTURE: &str = "sbm:blocks=100/100,p_in=0.1,p_out=0.01,d=16,seed=7";

pub fn fixture_dataset() -> unlearn_audit::runner::DatasetSpec {
    unlearn_audit::runner::DatasetSpec::parse(
        SBM_FIXTURE,
        unlearn_audit::graph::GraphFormat::EdgeList,
    )
    .unwrap()
}

pub fn fixture_graph() -> Graph {
    fixture_dataset().load().unwrap()
}

/// Hop distances from `src` by repeated relaxation over the full edge list.
/// `usize::MAX` marks unreachable or absent nodes.
pub fn oracle_distances(g: &Graph, src: usize) -> Vec<usize> {
    let n = g.num_nodes();
    let mut dist = vec![usize::MAX; n];
    dist[src] = 0;
    loop {
        let mut changed = false;
        for (u, v) in g.edges().iter() {
            for (a, b) in [(u, v), (v, u)] {
                if dist[a] != usize::MAX && dist[a] + 1 < dist[b] {
                    dist[b] = dist[a] + 1;
                    changed = true;
                }
            }
        }
        if !changed {
            return dist;
        }
    }
}

/// Union over `centers` of edges with both endpoints within `k` hops.
pub fn oracle_proxy(
    g: &Graph,
    centers: &[usize],
    k: usize,
) -> std::collections::BTreeSet<(usize, usize)> {
    let mut out = std::collections::BTreeSet::new();
    for &c in centers.iter().filter(|&&c| g.is_present(c)) {
        let d = oracle_distances(g, c);
        for (u, v) in g.edges().iter() {
            if d[u] <= k && d[v] <= k {
                out.insert((u, v));
            }
        }
    }
    out
}

/// `|a △ b|` by pairwise membership tests.
pub fn oracle_sym_diff(a: &EdgeSet, b: &EdgeSet) -> usize {
    a.iter().filter(|&(u, v)| !b.contains(u, v)).count()
        + b.iter().filter(|&(u, v)| !a.contains(u, v)).count()
}

/// AUC by counting every member/non-member pair.
pub fn oracle_auc(member: &[f64], nonmember: &[f64]) -> f64 {
    let mut wins = 0.0;
    let mut ties = 0.0;
    for &m in member {
        for &n in nonmember {
            if m < n {
                wins += 1.0;
            } else if m == n {
                ties += 1.0;
            }
        }
    }
    (wins + 0.5 * ties) / (member.len() * nonmember.len()) as f64
}

pub fn loss_report(losses: &[f64]) -> unlearn_audit::gnn::LossReport {
    unlearn_audit::gnn::LossReport {
        nodes: (0..losses.len()).collect(),
        losses: losses.to_vec(),
    }
}

/// Default grid on the SBM fixture writing to `out`.
pub fn fixture_plan(out: &std::path::Path) -> unlearn_audit::runner::ExperimentPlan {
    unlearn_audit::runner::ExperimentPlan::new(fixture_dataset(), out)
}

mod common;

use common::*;
use ndarray::Array2;
use unlearn_audit::gnn::*;
use unlearn_audit::graph::{generate_sbm, EdgeSet, Graph, Split};

#[test]
fn forward_matches_straight_line_oracle() {
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        for seed in 0..4 {
            let g = random_graph(6, 3, 4, 0.4, seed);
            let cfg = small_config(backbone, 7, seed);
            let p = random_params(&cfg, 3, 4, 1.0, 50 + seed);
            let got = forward(&p, &g, &cfg, Mode::Eval).unwrap();
            let want = oracle_logits(&p, &g, cfg.leaky_slope);
            for (r, &v) in got.nodes.iter().enumerate() {
                for c in 0..4 {
                    assert!(
                        (got.values[[r, c]] - want[v][c]).abs() < 1e-10,
                        "{backbone} seed {seed} node {v} class {c}"
                    );
                }
            }
        }
    }
}

#[test]
fn gradients_match_central_differences() {
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let check = gradient_check(backbone, 3);
        println!("{backbone}: {check:?}");
        assert!(check.max_rel_err <= 1e-3, "{backbone}: {check:?}");
        assert!(check.kinked * 20 < check.checked, "{backbone}: {check:?}");
    }
}

#[test]
fn zero_weights_give_zero_logits() {
    let g = random_graph(8, 3, 3, 0.3, 1);
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let cfg = small_config(backbone, 4, 0);
        let p = ModelParams::zeros(backbone, 3, 4, 3);
        let out = forward(&p, &g, &cfg, Mode::Eval).unwrap();
        assert!(out.values.iter().all(|&v| v == 0.0));
        let losses = per_node_losses(&p, &g, &cfg, &[0, 1]).unwrap();
        assert!(losses.losses.iter().all(|&l| (l - 3f64.ln()).abs() < 1e-15));
    }
}

#[test]
fn uniform_logits_over_seven_classes() {
    let g = random_graph(5, 2, 7, 0.5, 3);
    let cfg = small_config(Backbone::Gcn, 3, 0);
    let p = ModelParams::zeros(Backbone::Gcn, 2, 3, 7);
    let r = per_node_losses(&p, &g, &cfg, &[0, 1, 2, 3, 4]).unwrap();
    for l in r.losses {
        assert!((l - 7f64.ln()).abs() < 1e-12 && (l - 1.9459).abs() < 1e-4);
    }
}

#[test]
fn confident_correct_logit_has_vanishing_loss_and_gradient() {
    // One node, one feature equal to 1: logits are the layer-2 bias.
    let g = Graph::new(
        Array2::ones((1, 1)),
        vec![1],
        Some(3),
        EdgeSet::new(),
        vec![Split::Train],
    )
    .unwrap();
    let cfg = small_config(Backbone::Gcn, 2, 0);
    let mut p = ModelParams::zeros(Backbone::Gcn, 1, 2, 3);
    p.layers[1].bias[1] = 60.0;
    let r = per_node_losses(&p, &g, &cfg, &[0]).unwrap();
    assert!(r.losses[0] < 1e-25);
    let grads = loss_and_gradients(&p, &g, &cfg, &[0], Wrt::Inputs).unwrap();
    assert!(grads.inputs.unwrap().iter().all(|v| v.abs() < 1e-20));
}

fn with_isolated_node() -> Graph {
    let mut edges = EdgeSet::new();
    for (u, v) in [(0, 1), (1, 2), (2, 3), (3, 0)] {
        edges.insert(u, v);
    }
    let x = Array2::from_shape_fn((5, 3), |(i, j)| (i * 3 + j) as f64 * 0.1 - 0.5);
    Graph::new(x, vec![0, 1, 0, 1, 1], None, edges, vec![Split::Train; 5]).unwrap()
}

#[test]
fn isolated_node_is_independent_of_others() {
    let g = with_isolated_node();
    let cfg = small_config(Backbone::Gcn, 4, 2);
    let p = random_params(&cfg, 3, 2, 0.7, 9);
    let before = forward(&p, &g, &cfg, Mode::Eval).unwrap();
    let grad_before = loss_and_gradients(&p, &g, &cfg, &[0, 4], Wrt::Inputs).unwrap();

    let mut x = g.features().clone();
    for v in 0..4 {
        x.row_mut(v).mapv_inplace(|f| f * -3.0 + 1.0);
    }
    let h = g.with_features(x).unwrap();
    let after = forward(&p, &h, &cfg, Mode::Eval).unwrap();
    assert_eq!(before.values.row(4), after.values.row(4));
    let grad_after = loss_and_gradients(&p, &h, &cfg, &[0, 4], Wrt::Inputs).unwrap();
    assert_eq!(
        grad_before.inputs.unwrap().row(4),
        grad_after.inputs.unwrap().row(4)
    );
}

#[test]
fn gcn_is_permutation_equivariant() {
    let g = random_graph(9, 3, 3, 0.35, 21);
    let perm = [4, 7, 0, 2, 8, 1, 6, 3, 5];
    let mut x = Array2::zeros((9, 3));
    let mut labels = vec![0; 9];
    for v in 0..9 {
        x.row_mut(perm[v]).assign(&g.feature_row(v));
        labels[perm[v]] = g.label(v);
    }
    let edges: EdgeSet = g.edges().iter().map(|(u, v)| (perm[u], perm[v])).collect();
    let h = Graph::new(x, labels, Some(3), edges, vec![Split::Train; 9]).unwrap();
    let cfg = small_config(Backbone::Gcn, 6, 1);
    let p = random_params(&cfg, 3, 3, 1.0, 4);
    let a = forward(&p, &g, &cfg, Mode::Eval).unwrap();
    let b = forward(&p, &h, &cfg, Mode::Eval).unwrap();
    for v in 0..9 {
        for c in 0..3 {
            assert!((a.values[[v, c]] - b.values[[perm[v], c]]).abs() < 1e-12);
        }
    }
}

#[test]
fn attention_rows_sum_to_one() {
    let g = random_graph(12, 3, 3, 0.3, 8);
    let cfg = small_config(Backbone::Gat, 5, 1);
    let p = random_params(&cfg, 3, 3, 1.5, 2);
    for layer in 0..2 {
        for (v, row) in attention_weights(&p, &g, &cfg, layer).unwrap() {
            let total: f64 = row.iter().map(|(_, w)| w).sum();
            assert!((total - 1.0).abs() <= 1e-12, "node {v}: {total}");
            assert!(row.iter().any(|&(u, _)| u == v));
        }
    }
}

#[test]
fn singleton_loss_matches_per_node_loss() {
    let g = random_graph(10, 4, 3, 0.3, 31);
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let cfg = small_config(backbone, 5, 3);
        let p = random_params(&cfg, 4, 3, 0.9, 32);
        let per = per_node_losses(&p, &g, &cfg, &[6]).unwrap();
        let scalar = loss_and_gradients(&p, &g, &cfg, &[6], Wrt::Parameters)
            .unwrap()
            .loss;
        assert!((per.losses[0] - scalar).abs() < 1e-12);
    }
}

#[test]
fn absent_loss_node_is_rejected() {
    use unlearn_audit::graph::{remove_nodes, ForgetSet};
    let g = random_graph(6, 2, 2, 0.5, 1);
    let h = remove_nodes(&g, &ForgetSet::explicit(&g, [2]).unwrap()).unwrap();
    let cfg = small_config(Backbone::Gcn, 3, 0);
    let p = ModelParams::init(&cfg, 2, 2);
    assert!(loss_and_gradients(&p, &h, &cfg, &[1, 2], Wrt::Inputs).is_err());
    assert!(loss_and_gradients(&p, &h, &cfg, &[], Wrt::Inputs).is_err());
}

#[test]
fn training_is_deterministic_and_zero_epochs_is_init() {
    let g = random_graph(15, 4, 3, 0.25, 12);
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let mut cfg = small_config(backbone, 8, 77);
        cfg.epochs = 20;
        let a = train(&g, &cfg).unwrap();
        let b = train(&g, &cfg).unwrap();
        assert_eq!(a, b);
        cfg.epochs = 0;
        assert_eq!(train(&g, &cfg).unwrap(), ModelParams::init(&cfg, 4, 3));
    }
}

#[test]
fn empty_train_mask_is_rejected() {
    let g = Graph::new(
        Array2::zeros((3, 2)),
        vec![0, 1, 0],
        None,
        EdgeSet::new(),
        vec![Split::Test; 3],
    )
    .unwrap();
    let cfg = ModelConfig::new(Backbone::Gcn, 1);
    assert!(train(&g, &cfg).is_err());
}

/// Plain gradient-descent logistic regression (softmax) on raw features.
fn logistic_regression_accuracy(g: &Graph) -> f64 {
    let (d, c) = (g.feature_dim(), g.num_classes());
    let mut w = Array2::<f64>::zeros((d, c));
    let train = g.nodes_in(Split::Train);
    let test = g.nodes_in(Split::Test);
    for _ in 0..500 {
        let mut grad = Array2::<f64>::zeros((d, c));
        for &v in &train {
            let x = g.feature_row(v);
            let z = x.dot(&w);
            let m = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = z.iter().map(|t| (t - m).exp()).collect();
            let s: f64 = e.iter().sum();
            for k in 0..c {
                let delta = e[k] / s - if k == g.label(v) { 1.0 } else { 0.0 };
                for j in 0..d {
                    grad[[j, k]] += delta * x[j];
                }
            }
        }
        w.scaled_add(-0.5 / train.len() as f64, &grad);
    }
    let correct = test
        .iter()
        .filter(|&&v| {
            let z = g.feature_row(v).dot(&w);
            let best = (0..c).max_by(|&a, &b| z[a].total_cmp(&z[b])).unwrap();
            best == g.label(v)
        })
        .count();
    correct as f64 / test.len() as f64
}

#[test]
fn trained_model_separates_two_block_sbm() {
    let g = generate_sbm(&[20, 20], 0.9, 0.05, 8, 1001).unwrap();
    assert!(
        logistic_regression_accuracy(&g) >= 0.9,
        "fixture is not near-separable"
    );
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let cfg = ModelConfig::new(backbone, 1001);
        let p = train(&g, &cfg).unwrap();
        let pred = predictions(&p, &g, &cfg).unwrap();
        let test = g.nodes_in(Split::Test);
        let correct = test
            .iter()
            .filter(|&&v| pred[v] == Some(g.label(v)))
            .count();
        let acc = correct as f64 / test.len() as f64;
        assert!(acc >= 0.9, "{backbone}: test accuracy {acc}");
    }
}

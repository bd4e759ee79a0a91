mod common;

use common::*;
use ndarray::Array2;
use unlearn_audit::explain::*;
use unlearn_audit::gnn::{self, Backbone, ModelConfig, ModelParams, Wrt};
use unlearn_audit::graph::{remove_nodes, sample_forget_set, EdgeSet, ForgetSet, Graph, Split};

fn trained(backbone: Backbone, seed: u64) -> (Graph, ModelConfig, ModelParams) {
    let g = fixture_graph();
    let cfg = ModelConfig::new(backbone, seed);
    let p = gnn::train(&g, &cfg).unwrap();
    (g, cfg, p)
}

#[test]
fn saliency_is_rowwise_l1_of_input_gradient() {
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let (g, cfg, p) = trained(backbone, 1001);
        let sal = saliency(&p, &g, &cfg).unwrap();
        let gx = gnn::loss_and_gradients(&p, &g, &cfg, &g.nodes_in(Split::Train), Wrt::Inputs)
            .unwrap()
            .inputs
            .unwrap();
        for v in 0..g.num_nodes() {
            let want: f64 = gx.row(v).iter().map(|x| x.abs()).sum();
            assert!((sal.get(v) - want).abs() <= 1e-12, "{backbone} node {v}");
        }
        assert!(sal.values().iter().all(|&a| a.is_finite() && a >= 0.0));
    }
}

#[test]
fn zero_model_has_zero_saliency() {
    let g = fixture_graph();
    let cfg = ModelConfig::new(Backbone::Gcn, 1);
    let p = ModelParams::zeros(Backbone::Gcn, g.feature_dim(), 8, g.num_classes());
    assert!(saliency(&p, &g, &cfg)
        .unwrap()
        .values()
        .iter()
        .all(|&a| a == 0.0));
}

#[test]
fn saliency_rejects_dimension_mismatch() {
    let g = fixture_graph();
    let cfg = ModelConfig::new(Backbone::Gcn, 1);
    let p = ModelParams::init(&cfg, g.feature_dim() + 1, g.num_classes());
    assert!(saliency(&p, &g, &cfg).is_err());
}

#[test]
fn isolated_node_saliency_ignores_other_features() {
    let mut g = random_graph(8, 3, 2, 0.5, 3);
    let edges: EdgeSet = g
        .edges()
        .iter()
        .filter(|&(u, v)| u != 0 && v != 0)
        .collect();
    g = Graph::new(
        g.features().clone(),
        g.labels().to_vec(),
        Some(2),
        edges,
        g.splits().to_vec(),
    )
    .unwrap();
    let cfg = small_config(Backbone::Gcn, 6, 2);
    let p = random_params(&cfg, 3, 2, 0.7, 9);
    let before = saliency(&p, &g, &cfg).unwrap().get(0);
    let mut x = g.features().clone();
    for v in 1..8 {
        x[[v, 1]] += 0.37 * v as f64;
    }
    let after = saliency(&p, &g.with_features(x).unwrap(), &cfg)
        .unwrap()
        .get(0);
    // The train mean divides by the same count, so only node 0's own terms matter.
    assert_eq!(before, after);
}

fn gini(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    if n == 0 {
        return 0.0;
    }
    1.0 - counts
        .iter()
        .map(|&c| (c as f64 / n as f64).powi(2))
        .sum::<f64>()
}

/// Best root split by scanning every feature and midpoint threshold.
fn exhaustive_root(x: &Array2<f64>, y: &[usize], classes: usize) -> Option<(usize, f64)> {
    let n = y.len();
    let mut all = vec![0; classes];
    y.iter().for_each(|&c| all[c] += 1);
    let parent = gini(&all);
    let mut best: Option<(f64, usize, f64)> = None;
    for f in 0..x.ncols() {
        let mut vals: Vec<f64> = x.column(f).to_vec();
        vals.sort_by(f64::total_cmp);
        vals.dedup();
        for w in vals.windows(2) {
            let t = (w[0] + w[1]) / 2.0;
            let (mut l, mut r) = (vec![0; classes], vec![0; classes]);
            for i in 0..n {
                if x[[i, f]] <= t {
                    l[y[i]] += 1
                } else {
                    r[y[i]] += 1
                }
            }
            let (nl, nr) = (
                l.iter().sum::<usize>() as f64,
                r.iter().sum::<usize>() as f64,
            );
            let imp = (nl * gini(&l) + nr * gini(&r)) / n as f64;
            if best.is_none_or(|(b, _, _)| imp < b - 1e-12) {
                best = Some((imp, f, t));
            }
        }
    }
    best.filter(|(imp, _, _)| *imp < parent - 1e-12)
        .map(|(_, f, t)| (f, t))
}

#[test]
fn surrogate_root_matches_exhaustive_scan_and_separates_blocks() {
    for backbone in [Backbone::Gcn, Backbone::Gat] {
        let (g, cfg, p) = trained(backbone, 1002);
        let rules = fit_surrogate(&p, &g, &cfg, 3, 0).unwrap();
        assert!((1..=8).contains(&rules.len()));

        let preds = gnn::predictions(&p, &g, &cfg).unwrap();
        let y: Vec<usize> = preds.iter().map(|c| c.unwrap()).collect();
        let (f, t) = exhaustive_root(g.features(), &y, g.num_classes()).unwrap();
        let root = rules.rules[0].predicates[0];
        assert_eq!((root.feature, root.threshold), (f, t), "{backbone}");
        assert!(f < 2, "root feature {f} is not a block indicator");

        let agree = (0..g.num_nodes())
            .filter(|&v| (g.feature_row(v)[f] > t) == (g.label(v) == f))
            .count();
        assert!(
            agree as f64 >= 0.95 * g.num_nodes() as f64,
            "{backbone}: {agree}/200"
        );
    }
}

#[test]
fn surrogate_rule_counts_are_bounded_on_random_inputs() {
    for seed in 0..40 {
        let g = random_graph(30, 4, 3, 0.2, seed);
        let y: Vec<usize> = g.labels().to_vec();
        let a = fit_tree(g.features(), &y, 3, 3, seed);
        let b = fit_tree(g.features(), &y, 3, 3, seed);
        assert_eq!(a, b);
        assert!((1..=8).contains(&a.len()));
        assert_eq!(a.rules.iter().map(|r| r.support).sum::<usize>(), 30);
        for i in 0..30 {
            let row = g.feature_row(i).to_vec();
            assert_eq!(
                a.rules
                    .iter()
                    .filter(|r| r.predicates.iter().all(|p| p.holds(row[p.feature])))
                    .count(),
                1
            );
        }
    }
    let g = random_graph(10, 3, 2, 0.2, 5);
    assert_eq!(fit_tree(g.features(), &[1; 10], 2, 3, 0).len(), 1);
}

fn snapshot_inputs(seed: u64) -> (Graph, ModelConfig, ModelParams, ForgetSet, Vec<usize>) {
    let (g, cfg, p) = trained(Backbone::Gcn, seed);
    let f = sample_forget_set(&g, 0.05, seed).unwrap();
    let held = g.nodes_in(Split::Test);
    (g, cfg, p, f, held)
}

#[test]
fn snapshots_are_deterministic_and_round_trip_through_disk() {
    let (g, cfg, p, f, held) = snapshot_inputs(1001);
    let s = SnapshotSettings::default();
    let a = take_snapshot("pre", &p, &g, &cfg, &f, &held, &s).unwrap();
    let b = take_snapshot("pre", &p, &g, &cfg, &f, &held, &s).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.member_losses.len(), 100);
    assert_eq!(a.nonmember_losses.len(), 60);

    let tmp = tempfile::tempdir().unwrap();
    write_snapshot(&a, tmp.path()).unwrap();
    let back = read_snapshot(tmp.path()).unwrap();
    assert_eq!(back, a);
    let rules = std::fs::read_to_string(tmp.path().join("rules.txt")).unwrap();
    assert_eq!(rules.lines().count(), a.rules.len());
}

#[test]
fn post_deletion_snapshot_has_no_forget_edges_or_attribution() {
    let (g, cfg, _, f, held) = snapshot_inputs(1003);
    let post = remove_nodes(&g, &f).unwrap();
    let p2 = gnn::train(&post, &cfg).unwrap();
    let s = take_snapshot(
        "post",
        &p2,
        &post,
        &cfg,
        &f,
        &held,
        &SnapshotSettings::default(),
    )
    .unwrap();
    assert!(s
        .proxy
        .iter()
        .all(|(u, v)| !f.contains(u) && !f.contains(v)));
    assert!(f
        .nodes()
        .iter()
        .all(|&v| s.attribution.get(v) == 0.0 && s.predictions[v].is_none()));
    assert_eq!(s.present.len(), 190);
}

#[test]
fn heldout_must_avoid_train_nodes() {
    let (g, cfg, p, f, _) = snapshot_inputs(1001);
    let train = g.nodes_in(Split::Train);
    assert!(take_snapshot(
        "pre",
        &p,
        &g,
        &cfg,
        &f,
        &train[..2],
        &SnapshotSettings::default()
    )
    .is_err());
}

#[test]
fn digest_changes_with_every_config_field() {
    let g = fixture_graph();
    let f = sample_forget_set(&g, 0.05, 1).unwrap();
    let held = g.nodes_in(Split::Test);
    let base = ModelConfig::new(Backbone::Gcn, 1001);
    let s = SnapshotSettings::default();
    let d0 = run_digest(&base, &s, &f, &held);
    assert_eq!(d0, run_digest(&base.clone(), &s, &f, &held));

    let variants: Vec<ModelConfig> = vec![
        ModelConfig {
            backbone: Backbone::Gat,
            ..base.clone()
        },
        ModelConfig {
            hidden: 65,
            ..base.clone()
        },
        ModelConfig {
            layers: 3,
            ..base.clone()
        },
        ModelConfig {
            dropout: 0.4,
            ..base.clone()
        },
        ModelConfig {
            lr: 0.01,
            ..base.clone()
        },
        ModelConfig {
            epochs: 99,
            ..base.clone()
        },
        ModelConfig {
            seed: 1002,
            ..base.clone()
        },
        ModelConfig {
            gat_heads: 2,
            ..base.clone()
        },
        ModelConfig {
            leaky_slope: 0.1,
            ..base.clone()
        },
        ModelConfig {
            beta1: 0.8,
            ..base.clone()
        },
        ModelConfig {
            beta2: 0.99,
            ..base.clone()
        },
        ModelConfig {
            eps: 1e-7,
            ..base.clone()
        },
    ];
    let mut seen = std::collections::BTreeSet::from([d0.clone()]);
    for v in &variants {
        assert!(seen.insert(run_digest(v, &s, &f, &held)), "{v:?}");
    }
    for s2 in [
        SnapshotSettings { k: 3, ..s.clone() },
        SnapshotSettings {
            depth: 2,
            ..s.clone()
        },
        SnapshotSettings {
            tree_seed: 1,
            ..s.clone()
        },
    ] {
        assert!(seen.insert(run_digest(&base, &s2, &f, &held)));
    }
    let f2 = sample_forget_set(&g, 0.05, 2).unwrap();
    assert!(seen.insert(run_digest(&base, &s, &f2, &held)));
    assert!(seen.insert(run_digest(&base, &s, &f, &held[1..])));
}

use std::collections::BTreeMap;

use super::{Strategy, StrategyInput, StrategyOutput};
use crate::error::{Error, Result};
use crate::gnn::{self, ModelConfig, ModelParams, Wrt};
use crate::graph::{remove_nodes, within_hops, ForgetSet, Graph, Split};
use crate::rng::Role;

pub const FLAG_FINETUNE_FALLBACK: &str = "finetune-no-labeled-nodes-in-radius";

fn strategy_err(name: &str, msg: impl Into<String>) -> Error {
    Error::Strategy {
        strategy: name.to_string(),
        msg: msg.into(),
    }
}

/// Deletes `f` and trains a fresh model on what is left. The pre-unlearning
/// parameters are not used.
pub fn retrain(g: &Graph, f: &ForgetSet, config: &ModelConfig) -> Result<(ModelParams, Graph)> {
    let post = remove_nodes(g, f)?;
    if post.nodes_in(Split::Train).is_empty() {
        return Err(strategy_err(
            "retrain",
            "deleting the forget set empties the train mask",
        ));
    }
    let params = gnn::train(&post, config)?;
    Ok((params, post))
}

/// Result of [`local_finetune`].
#[derive(Debug, Clone)]
pub struct Finetuned {
    pub params: ModelParams,
    pub graph: Graph,
    /// Train nodes that were fine-tuned on.
    pub region: Vec<usize>,
}

/// Deletes `f`, then runs `epochs` Adam steps from `pre` on the train nodes
/// within `radius` hops of `f` in the original graph that survive the
/// deletion. An empty region means zero steps.
pub fn local_finetune(
    g: &Graph,
    f: &ForgetSet,
    config: &ModelConfig,
    pre: &ModelParams,
    epochs: usize,
    radius: usize,
) -> Result<Finetuned> {
    let post = remove_nodes(g, f)?;
    let region: Vec<usize> = within_hops(g, f.nodes(), radius)?
        .into_iter()
        .filter(|&v| post.is_present(v) && post.split(v) == Split::Train)
        .collect();
    let params = if region.is_empty() || epochs == 0 {
        pre.clone()
    } else {
        gnn::train_steps(
            pre.clone(),
            &post,
            config,
            &region,
            epochs,
            Role::FinetuneDropout,
        )?
    };
    Ok(Finetuned {
        params,
        graph: post,
        region,
    })
}

/// `steps` plain gradient-ascent steps of size `lr / 10` on the mean
/// forget-set cross-entropy, eval mode. The graph is returned unchanged.
pub fn noop_approx(
    g: &Graph,
    f: &ForgetSet,
    config: &ModelConfig,
    pre: &ModelParams,
    steps: usize,
) -> Result<ModelParams> {
    let mut params = pre.clone();
    if f.is_empty() {
        return Ok(params);
    }
    let step = config.lr / 10.0;
    for _ in 0..steps {
        let grads = gnn::loss_and_gradients(&params, g, config, f.nodes(), Wrt::Parameters)?;
        let grads = grads.params.expect("parameter gradients");
        for (p, d) in params.slices_mut().into_iter().zip(grads.slices()) {
            for (p, d) in p.iter_mut().zip(d) {
                *p += step * d;
            }
        }
    }
    Ok(params)
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Retrain;

impl Strategy for Retrain {
    fn name(&self) -> &str {
        "retrain"
    }

    fn run(&self, input: StrategyInput<'_>) -> Result<StrategyOutput> {
        let (params_post, graph_post) = retrain(input.graph, input.forget, input.config)?;
        let metadata = BTreeMap::from([("epochs".to_string(), input.config.epochs.to_string())]);
        Ok(StrategyOutput {
            params_post,
            graph_post,
            metadata,
            flags: Vec::new(),
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LocalFinetune;

impl Strategy for LocalFinetune {
    fn name(&self) -> &str {
        "local-finetune"
    }

    fn arg_keys(&self) -> &[&'static str] {
        &["finetune_epochs", "radius"]
    }

    fn run(&self, input: StrategyInput<'_>) -> Result<StrategyOutput> {
        let epochs = input.args.get_or("finetune_epochs", 10usize)?;
        let radius = input.args.get_or("radius", 2usize)?;
        let out = local_finetune(
            input.graph,
            input.forget,
            input.config,
            input.pre_params,
            epochs,
            radius,
        )?;
        let mut flags = Vec::new();
        if out.region.is_empty() {
            log::warn!("local-finetune: no labeled node within {radius} hops of the forget set; 0 steps taken");
            flags.push(FLAG_FINETUNE_FALLBACK.to_string());
        }
        let metadata = BTreeMap::from([
            ("finetune_epochs".to_string(), epochs.to_string()),
            ("radius".to_string(), radius.to_string()),
            ("region_size".to_string(), out.region.len().to_string()),
        ]);
        Ok(StrategyOutput {
            params_post: out.params,
            graph_post: out.graph,
            metadata,
            flags,
        })
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct NoopApprox;

impl Strategy for NoopApprox {
    fn name(&self) -> &str {
        "noop"
    }

    fn arg_keys(&self) -> &[&'static str] {
        &["ascent_steps"]
    }

    fn run(&self, input: StrategyInput<'_>) -> Result<StrategyOutput> {
        let steps = input.args.get_or("ascent_steps", 1usize)?;
        let params_post = noop_approx(
            input.graph,
            input.forget,
            input.config,
            input.pre_params,
            steps,
        )?;
        let metadata = BTreeMap::from([
            ("ascent_steps".to_string(), steps.to_string()),
            (
                "step_size".to_string(),
                (input.config.lr / 10.0).to_string(),
            ),
        ]);
        Ok(StrategyOutput {
            params_post,
            graph_post: input.graph.clone(),
            metadata,
            flags: Vec::new(),
        })
    }
}

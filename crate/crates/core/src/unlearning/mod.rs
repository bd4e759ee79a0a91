//! Unlearning strategies and their registry.
//!
//! A strategy maps `(graph, forget set, config, pre-unlearning params)` to a
//! post-unlearning model and graph. Three are built in:
//!
//! * `retrain`: delete the forget set and train from scratch.
//! * `local-finetune`: delete the forget set and briefly fine-tune the old
//!   model on labeled nodes near the deleted ones.
//! * `noop`: keep the graph, take a few small gradient-ascent steps on the
//!   forget-set loss. With zero steps nothing changes at all.

mod args;
mod builtin;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::gnn::{ModelConfig, ModelParams};
use crate::graph::{ForgetSet, Graph};

pub use args::MethodArgs;
pub use builtin::{
    local_finetune, noop_approx, retrain, LocalFinetune, NoopApprox, Retrain,
    FLAG_FINETUNE_FALLBACK,
};

/// Everything a strategy may look at.
#[derive(Debug, Clone, Copy)]
pub struct StrategyInput<'a> {
    pub graph: &'a Graph,
    pub forget: &'a ForgetSet,
    pub config: &'a ModelConfig,
    pub pre_params: &'a ModelParams,
    pub args: &'a MethodArgs,
}

/// What a strategy hands back.
#[derive(Debug, Clone)]
pub struct StrategyOutput {
    pub params_post: ModelParams,
    pub graph_post: Graph,
    pub metadata: BTreeMap<String, String>,
    pub flags: Vec<String>,
}

pub trait Strategy: Send + Sync {
    fn name(&self) -> &str;

    /// `--method-arg` keys the strategy understands.
    fn arg_keys(&self) -> &[&'static str] {
        &[]
    }

    fn run(&self, input: StrategyInput<'_>) -> Result<StrategyOutput>;
}

#[derive(Debug, Clone)]
pub struct UnlearningOutcome {
    pub params_post: ModelParams,
    pub graph_post: Graph,
    pub strategy_name: String,
    pub wall_time: Duration,
    pub metadata: BTreeMap<String, String>,
    pub flags: Vec<String>,
}

/// Name → strategy table. Build it once, then share it read-only.
#[derive(Clone)]
pub struct Registry {
    strategies: BTreeMap<String, Arc<dyn Strategy>>,
}

impl std::fmt::Debug for Registry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list().entries(self.strategies.keys()).finish()
    }
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(Arc::new(Retrain));
        r.register(Arc::new(LocalFinetune));
        r.register(Arc::new(NoopApprox));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry {
            strategies: BTreeMap::new(),
        }
    }

    /// Adds or replaces the strategy under its own name.
    pub fn register(&mut self, s: Arc<dyn Strategy>) {
        self.strategies.insert(s.name().to_string(), s);
    }

    pub fn names(&self) -> Vec<String> {
        self.strategies.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<&Arc<dyn Strategy>> {
        self.strategies
            .get(name)
            .ok_or_else(|| Error::UnknownStrategy {
                name: name.to_string(),
                available: self.names(),
            })
    }

    /// Rejects unknown method names and argument keys no selected method
    /// understands.
    pub fn check(&self, methods: &[String], args: &MethodArgs) -> Result<()> {
        let mut known = Vec::new();
        for m in methods {
            known.extend_from_slice(self.get(m)?.arg_keys());
        }
        if let Some(key) = args.keys().find(|k| !known.contains(k)) {
            return Err(Error::arg(format!(
                "method argument `{key}` is not used by any of: {}",
                methods.join(", ")
            )));
        }
        Ok(())
    }

    pub fn run_strategy(&self, name: &str, input: StrategyInput<'_>) -> Result<UnlearningOutcome> {
        let strategy = self.get(name)?;
        let start = Instant::now();
        let out = strategy.run(input).map_err(|e| match e {
            Error::Strategy { .. } => e,
            other => Error::Strategy {
                strategy: name.to_string(),
                msg: other.to_string(),
            },
        })?;
        let wall_time = start.elapsed();
        if !out.params_post.is_finite() {
            return Err(Error::Strategy {
                strategy: name.to_string(),
                msg: "produced non-finite parameters".into(),
            });
        }
        Ok(UnlearningOutcome {
            params_post: out.params_post,
            graph_post: out.graph_post,
            strategy_name: name.to_string(),
            wall_time,
            metadata: out.metadata,
            flags: out.flags,
        })
    }
}

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gnn::{Backbone, ModelConfig};
use crate::graph::{load_graph, Graph, GraphFormat, SbmSpec};
use crate::unlearning::{MethodArgs, Registry};

/// Node count above which loading needs `allow_large`.
pub const LARGE_GRAPH_NODES: usize = 30_000;

pub const DEFAULT_SEEDS: [u64; 3] = [1001, 1002, 1003];

/// Where the graph comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    File { path: PathBuf, format: GraphFormat },
    Sbm { spec: SbmSpec },
}

impl DatasetSpec {
    /// `sbm:...` selects a synthetic graph; anything else is a path read in
    /// `format`.
    pub fn parse(text: &str, format: GraphFormat) -> Result<Self> {
        if text.starts_with("sbm:") {
            let spec = SbmSpec::from_str(text).map_err(|e| Error::Plan(e.to_string()))?;
            Ok(DatasetSpec::Sbm { spec })
        } else {
            Ok(DatasetSpec::File {
                path: PathBuf::from(text),
                format,
            })
        }
    }

    /// Short name used in cell keys.
    pub fn name(&self) -> String {
        match self {
            DatasetSpec::File { path, .. } => path
                .file_name()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| path.display().to_string()),
            DatasetSpec::Sbm { spec } => spec.to_string(),
        }
    }

    pub fn load(&self) -> Result<Graph> {
        match self {
            DatasetSpec::File { path, format } => load_graph(path, *format),
            DatasetSpec::Sbm { spec } => spec.generate(),
        }
    }
}

impl fmt::Display for DatasetSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// Model settings shared by every cell; backbone and seed vary per cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSettings {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub dropout: f64,
}

impl Default for ModelSettings {
    fn default() -> Self {
        let c = ModelConfig::new(Backbone::Gcn, 0);
        ModelSettings {
            hidden: c.hidden,
            epochs: c.epochs,
            lr: c.lr,
            dropout: c.dropout,
        }
    }
}

impl ModelSettings {
    pub fn config(&self, backbone: Backbone, seed: u64) -> ModelConfig {
        ModelConfig {
            hidden: self.hidden,
            epochs: self.epochs,
            lr: self.lr,
            dropout: self.dropout,
            ..ModelConfig::new(backbone, seed)
        }
    }
}

/// A dataset × backbone × method × seed grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub dataset: DatasetSpec,
    pub backbones: Vec<Backbone>,
    pub methods: Vec<String>,
    pub seeds: Vec<u64>,
    pub forget_frac: f64,
    pub k: usize,
    pub tree_depth: usize,
    pub model: ModelSettings,
    pub method_args: MethodArgs,
    pub out: PathBuf,
    pub allow_large: bool,
    /// Also write pre/post parameter checkpoints into each cell directory.
    pub save_params: bool,
}

impl ExperimentPlan {
    /// Plan with the default grid settings.
    pub fn new(dataset: DatasetSpec, out: impl AsRef<Path>) -> Self {
        ExperimentPlan {
            dataset,
            backbones: vec![Backbone::Gcn, Backbone::Gat],
            methods: vec!["retrain".into(), "local-finetune".into(), "noop".into()],
            seeds: DEFAULT_SEEDS.to_vec(),
            forget_frac: 0.05,
            k: 2,
            tree_depth: 3,
            model: ModelSettings::default(),
            method_args: MethodArgs::new(),
            out: out.as_ref().to_path_buf(),
            allow_large: false,
            save_params: false,
        }
    }

    pub fn validate(&self, registry: &Registry) -> Result<()> {
        let plan_err = |m: String| Err(Error::Plan(m));
        if self.backbones.is_empty() {
            return plan_err("no backbone selected".into());
        }
        if self.methods.is_empty() {
            return plan_err("no method selected".into());
        }
        if self.seeds.is_empty() {
            return plan_err("no seed given".into());
        }
        for (what, dup) in [
            ("backbone", has_duplicate(&self.backbones)),
            ("method", has_duplicate(&self.methods)),
            ("seed", has_duplicate(&self.seeds)),
        ] {
            if dup {
                return plan_err(format!("duplicate {what} in plan"));
            }
        }
        if !(self.forget_frac > 0.0 && self.forget_frac < 1.0) {
            return plan_err(format!(
                "forget fraction {} not in (0, 1)",
                self.forget_frac
            ));
        }
        if self.k == 0 {
            return plan_err("k must be at least 1".into());
        }
        for b in &self.backbones {
            self.model
                .config(*b, 0)
                .validate()
                .map_err(|e| Error::Plan(e.to_string()))?;
        }
        registry
            .check(&self.methods, &self.method_args)
            .map_err(|e| Error::Plan(e.to_string()))
    }

    /// Loads the dataset, enforcing the size gate.
    pub fn load_graph(&self) -> Result<Graph> {
        let g = self.dataset.load()?;
        if g.num_nodes() > LARGE_GRAPH_NODES {
            if !self.allow_large {
                return Err(Error::Plan(format!(
                    "graph has {} nodes (limit {LARGE_GRAPH_NODES}); the dense engine needs O(n²) memory, pass allow-large to proceed",
                    g.num_nodes()
                )));
            }
            log::warn!(
                "graph has {} nodes; dense propagation will be slow",
                g.num_nodes()
            );
        }
        Ok(g)
    }
}

fn has_duplicate<T: PartialEq>(v: &[T]) -> bool {
    v.iter().enumerate().any(|(i, a)| v[..i].contains(a))
}

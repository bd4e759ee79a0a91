//! Stochastic block model fixtures.

use std::str::FromStr;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{EdgeSet, Graph, Split};
use crate::error::{Error, Result};
use crate::rng::{self, Role};

/// Parameters of a synthetic block-model graph.
///
/// Features are a block indicator (column `block % feature_dim`) plus
/// Gaussian noise; labels are block indices. Within each block, a seeded
/// shuffle assigns `train_frac` of the nodes to train, `val_frac` to val and
/// the rest to test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SbmSpec {
    pub blocks: Vec<usize>,
    pub p_in: f64,
    pub p_out: f64,
    pub feature_dim: usize,
    pub seed: u64,
    pub noise: f64,
    pub train_frac: f64,
    pub val_frac: f64,
}

impl SbmSpec {
    pub fn new(blocks: Vec<usize>, p_in: f64, p_out: f64, feature_dim: usize, seed: u64) -> Self {
        SbmSpec {
            blocks,
            p_in,
            p_out,
            feature_dim,
            seed,
            noise: 0.3,
            train_frac: 0.5,
            val_frac: 0.2,
        }
    }

    pub fn generate(&self) -> Result<Graph> {
        if self.blocks.is_empty() {
            return Err(Error::arg("block list is empty"));
        }
        if self.blocks.contains(&0) {
            return Err(Error::arg("block sizes must be at least 1"));
        }
        for (name, p) in [("p_in", self.p_in), ("p_out", self.p_out)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::arg(format!("{name}={p} not in [0, 1]")));
            }
        }
        if self.feature_dim == 0 {
            return Err(Error::arg("feature dimension must be at least 1"));
        }
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(Error::arg(format!(
                "noise={} must be finite and >= 0",
                self.noise
            )));
        }
        if !(self.train_frac >= 0.0
            && self.val_frac >= 0.0
            && self.train_frac + self.val_frac <= 1.0)
        {
            return Err(Error::arg(
                "train/val fractions must be nonnegative and sum to at most 1",
            ));
        }

        let mut rng = rng::stream(self.seed, Role::Graph);
        let block_of: Vec<usize> = self
            .blocks
            .iter()
            .enumerate()
            .flat_map(|(b, &size)| std::iter::repeat_n(b, size))
            .collect();
        let n = block_of.len();

        let mut edges = EdgeSet::new();
        for u in 0..n {
            for v in u + 1..n {
                let p = if block_of[u] == block_of[v] {
                    self.p_in
                } else {
                    self.p_out
                };
                if rng.random::<f64>() < p {
                    edges.insert(u, v);
                }
            }
        }

        let normal = Normal::new(0.0, self.noise).map_err(|e| Error::arg(e.to_string()))?;
        let mut features = Array2::zeros((n, self.feature_dim));
        for (v, mut row) in features.rows_mut().into_iter().enumerate() {
            for x in row.iter_mut() {
                *x = normal.sample(&mut rng);
            }
            row[block_of[v] % self.feature_dim] += 1.0;
        }

        let mut splits = vec![Split::Test; n];
        let mut start = 0;
        for &size in &self.blocks {
            let mut members: Vec<usize> = (start..start + size).collect();
            members.shuffle(&mut rng);
            let n_train = (self.train_frac * size as f64).round() as usize;
            let n_val = ((self.val_frac * size as f64).round() as usize).min(size - n_train);
            for (i, &v) in members.iter().enumerate() {
                splits[v] = if i < n_train {
                    Split::Train
                } else if i < n_train + n_val {
                    Split::Val
                } else {
                    Split::Test
                };
            }
            start += size;
        }

        Graph::new(features, block_of, Some(self.blocks.len()), edges, splits)
    }
}

/// Block-model graph with the default noise level and split fractions.
pub fn generate_sbm(
    blocks: &[usize],
    p_in: f64,
    p_out: f64,
    feature_dim: usize,
    seed: u64,
) -> Result<Graph> {
    SbmSpec::new(blocks.to_vec(), p_in, p_out, feature_dim, seed).generate()
}

impl FromStr for SbmSpec {
    type Err = Error;

    /// Parses `sbm:blocks=100/100,p_in=0.1,p_out=0.01,d=16,seed=7`.
    /// Optional keys: `noise`, `train`, `val`. The `sbm:` prefix is optional.
    fn from_str(s: &str) -> Result<Self> {
        let body = s.strip_prefix("sbm:").unwrap_or(s);
        let mut spec = SbmSpec::new(Vec::new(), f64::NAN, f64::NAN, 0, 0);
        let bad = |k: &str, v: &str| Error::Plan(format!("bad sbm value {k}={v}"));
        for kv in body.split(',').filter(|t| !t.is_empty()) {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Plan(format!("sbm field `{kv}` is not key=value")))?;
            let real = || v.parse::<f64>().map_err(|_| bad(k, v));
            match k {
                "blocks" => {
                    spec.blocks = v
                        .split('/')
                        .map(|b| b.parse::<usize>().map_err(|_| bad(k, v)))
                        .collect::<Result<_>>()?
                }
                "p_in" => spec.p_in = real()?,
                "p_out" => spec.p_out = real()?,
                "d" => spec.feature_dim = v.parse().map_err(|_| bad(k, v))?,
                "seed" => spec.seed = v.parse().map_err(|_| bad(k, v))?,
                "noise" => spec.noise = real()?,
                "train" => spec.train_frac = real()?,
                "val" => spec.val_frac = real()?,
                other => return Err(Error::Plan(format!("unknown sbm key `{other}`"))),
            }
        }
        if spec.blocks.is_empty()
            || spec.p_in.is_nan()
            || spec.p_out.is_nan()
            || spec.feature_dim == 0
        {
            return Err(Error::Plan(format!(
                "sbm spec `{s}` needs blocks, p_in, p_out and d"
            )));
        }
        Ok(spec)
    }
}

impl std::fmt::Display for SbmSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let blocks: Vec<String> = self.blocks.iter().map(usize::to_string).collect();
        write!(
            f,
            "sbm:blocks={},p_in={},p_out={},d={},seed={},noise={},train={},val={}",
            blocks.join("/"),
            self.p_in,
            self.p_out,
            self.feature_dim,
            self.seed,
            self.noise,
            self.train_frac,
            self.val_frac
        )
    }
}

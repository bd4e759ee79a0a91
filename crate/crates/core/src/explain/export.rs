//! Snapshot directories.
//!
//! | file | content |
//! |------|---------|
//! | `meta.json` | label, digest, node count, tree depth and seed |
//! | `attribution.tsv` | `node<TAB>saliency` for every node id |
//! | `proxy_edges.txt` | `u v` per proxy edge, `u < v`, ascending |
//! | `rules.txt` | one rule per line: `f3 <= 0.5 AND f7 > 0.1 => 2 [support]` |
//! | `member_losses.tsv`, `nonmember_losses.tsv` | `node<TAB>loss` |
//! | `predictions.tsv` | `node<TAB>class`, `-` for absent nodes |
//!
//! Reals are written in the shortest form that parses back bit-exactly.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AttributionMap, Rule, RuleSet, Snapshot};
use crate::error::{Error, Result};
use crate::gnn::LossReport;
use crate::graph::{EdgeSet, NodeId};

#[derive(Serialize, Deserialize)]
struct Meta {
    label: String,
    digest: String,
    num_nodes: usize,
    depth: usize,
    tree_seed: u64,
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn losses_text(r: &LossReport) -> String {
    r.nodes
        .iter()
        .zip(&r.losses)
        .map(|(v, l)| format!("{v}\t{l}\n"))
        .collect()
}

pub fn write_snapshot(s: &Snapshot, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = Meta {
        label: s.label.clone(),
        digest: s.digest.clone(),
        num_nodes: s.attribution.len(),
        depth: s.rules.depth,
        tree_seed: s.rules.tree_seed,
    };
    write(
        &dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).expect("meta serializes") + "\n",
    )?;
    write(
        &dir.join("attribution.tsv"),
        s.attribution
            .values()
            .iter()
            .enumerate()
            .map(|(v, a)| format!("{v}\t{a}\n"))
            .collect(),
    )?;
    write(
        &dir.join("proxy_edges.txt"),
        s.proxy.iter().map(|(u, v)| format!("{u} {v}\n")).collect(),
    )?;
    write(
        &dir.join("rules.txt"),
        s.rules.rules.iter().map(|r| format!("{r}\n")).collect(),
    )?;
    write(
        &dir.join("member_losses.tsv"),
        losses_text(&s.member_losses),
    )?;
    write(
        &dir.join("nonmember_losses.tsv"),
        losses_text(&s.nonmember_losses),
    )?;
    write(
        &dir.join("predictions.tsv"),
        s.predictions
            .iter()
            .enumerate()
            .map(|(v, p)| match p {
                Some(c) => format!("{v}\t{c}\n"),
                None => format!("{v}\t-\n"),
            })
            .collect(),
    )
}

fn lines(dir: &Path, name: &str) -> Result<Vec<(usize, String)>> {
    let path = dir.join(name);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.to_string()))
        .collect())
}

fn bad(dir: &Path, name: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: dir.join(name),
        line,
        msg: msg.into(),
    }
}

fn pairs(dir: &Path, name: &str, sep: char) -> Result<Vec<(usize, NodeId, String)>> {
    lines(dir, name)?
        .into_iter()
        .map(|(ln, l)| {
            let (a, b) = l
                .split_once(sep)
                .ok_or_else(|| bad(dir, name, ln, "expected two fields"))?;
            let v = a
                .trim()
                .parse()
                .map_err(|_| bad(dir, name, ln, format!("bad node id `{a}`")))?;
            Ok((ln, v, b.trim().to_string()))
        })
        .collect()
}

fn read_losses(dir: &Path, name: &str) -> Result<LossReport> {
    let mut r = LossReport {
        nodes: Vec::new(),
        losses: Vec::new(),
    };
    for (ln, v, l) in pairs(dir, name, '\t')? {
        r.nodes.push(v);
        r.losses.push(
            l.parse()
                .map_err(|_| bad(dir, name, ln, format!("bad loss `{l}`")))?,
        );
    }
    Ok(r)
}

pub fn read_snapshot(dir: &Path) -> Result<Snapshot> {
    let meta_path = dir.join("meta.json");
    let meta_text = fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&meta_text).map_err(|e| Error::Parse {
        path: meta_path.clone(),
        line: e.line(),
        msg: e.to_string(),
    })?;

    let mut values = vec![0.0; meta.num_nodes];
    for (ln, v, a) in pairs(dir, "attribution.tsv", '\t')? {
        let slot = values
            .get_mut(v)
            .ok_or_else(|| bad(dir, "attribution.tsv", ln, format!("node {v} out of range")))?;
        *slot = a
            .parse()
            .map_err(|_| bad(dir, "attribution.tsv", ln, format!("bad value `{a}`")))?;
    }
    let attribution = AttributionMap::new(values)?;

    let mut proxy = EdgeSet::new();
    for (ln, u, v) in pairs(dir, "proxy_edges.txt", ' ')? {
        let v: NodeId = v
            .parse()
            .map_err(|_| bad(dir, "proxy_edges.txt", ln, format!("bad node id `{v}`")))?;
        proxy.insert(u, v);
    }

    let rules = lines(dir, "rules.txt")?
        .into_iter()
        .map(|(ln, l)| l.parse::<Rule>().map_err(|e| bad(dir, "rules.txt", ln, e)))
        .collect::<Result<Vec<_>>>()?;

    let mut predictions = vec![None; meta.num_nodes];
    for (ln, v, c) in pairs(dir, "predictions.tsv", '\t')? {
        if v >= meta.num_nodes {
            return Err(bad(
                dir,
                "predictions.tsv",
                ln,
                format!("node {v} out of range"),
            ));
        }
        if c != "-" {
            predictions[v] = Some(
                c.parse()
                    .map_err(|_| bad(dir, "predictions.tsv", ln, format!("bad class `{c}`")))?,
            );
        }
    }
    let present = (0..meta.num_nodes)
        .filter(|&v| predictions[v].is_some())
        .collect();

    Ok(Snapshot {
        label: meta.label,
        attribution,
        proxy,
        rules: RuleSet {
            rules,
            depth: meta.depth,
            tree_seed: meta.tree_seed,
        },
        member_losses: read_losses(dir, "member_losses.tsv")?,
        nonmember_losses: read_losses(dir, "nonmember_losses.tsv")?,
        predictions,
        present,
        digest: meta.digest,
    })
}

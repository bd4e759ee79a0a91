//! Plain-text edge-list datasets.
//!
//! A dataset directory holds four files, all one record per line:
//!
//! * `edges.txt`: `u v`, whitespace separated decimal node ids
//! * `features.csv`: comma-separated reals, one row per node
//! * `labels.txt`: one class id per node
//! * `masks.txt`: one of `train`, `val`, `test`, `none` per node
//!
//! Node ids are feature row indices. Blank lines and lines starting with `#`
//! are skipped everywhere. Edges are undirected; reversed duplicates collapse.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::{EdgeSet, Graph, Split};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct EdgeListFiles {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub masks: PathBuf,
}

impl EdgeListFiles {
    pub fn in_dir(dir: &Path) -> Self {
        EdgeListFiles {
            edges: dir.join("edges.txt"),
            features: dir.join("features.csv"),
            labels: dir.join("labels.txt"),
            masks: dir.join("masks.txt"),
        }
    }
}

fn records(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim().to_string()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn load_edge_list(files: &EdgeListFiles) -> Result<Graph> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line, rec) in records(&files.features)? {
        let row = rec
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| parse_err(&files.features, line, format!("bad feature value: {e}")))?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::integrity(format!(
                    "{}:{line}: feature row has {} values, expected {}",
                    files.features.display(),
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    let n = rows.len();
    let d = rows.first().map_or(0, Vec::len);
    let features = Array2::from_shape_vec((n, d), rows.into_iter().flatten().collect())
        .map_err(|e| Error::integrity(e.to_string()))?;

    let labels = records(&files.labels)?
        .into_iter()
        .map(|(line, rec)| {
            rec.parse::<usize>()
                .map_err(|e| parse_err(&files.labels, line, format!("bad label: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;

    let splits = records(&files.masks)?
        .into_iter()
        .map(|(line, rec)| {
            rec.parse::<Split>()
                .map_err(|e| parse_err(&files.masks, line, e))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut edges = EdgeSet::new();
    for (line, rec) in records(&files.edges)? {
        let mut it = rec.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(
                &files.edges,
                line,
                "expected exactly two node ids",
            ));
        };
        let parse = |t: &str| {
            t.parse::<usize>()
                .map_err(|e| parse_err(&files.edges, line, format!("bad node id `{t}`: {e}")))
        };
        let (u, v) = (parse(a)?, parse(b)?);
        if u == v {
            return Err(Error::integrity(format!(
                "{}:{line}: self-loop on node {u}",
                files.edges.display()
            )));
        }
        if u >= n || v >= n {
            return Err(Error::integrity(format!(
                "{}:{line}: edge ({u}, {v}) references a node outside 0..{n}",
                files.edges.display()
            )));
        }
        edges.insert(u, v);
    }

    Graph::new(features, labels, None, edges, splits)
}

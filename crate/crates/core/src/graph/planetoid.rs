//! Loader for the public Planetoid release (`ind.<name>.{x,y,tx,ty,allx,ally,graph,test.index}`).
//!
//! Follows the conventional assembly of those files: features and labels are
//! `allx`/`ally` stacked over `tx`/`ty`, test rows are moved to the positions
//! listed in `test.index`, train is the first `|y|` nodes, val the next 500,
//! and test the nodes in `test.index`. Gaps in the test index range (Citeseer)
//! become zero-feature, label-0 rows. Citation edges are symmetrized and
//! self-citations dropped.

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::pickle::{adjacency_from_pickle, unpickle, NdArray};
use super::{EdgeSet, Graph, Split};
use crate::error::{Error, Result};

const VAL_SIZE: usize = 500;

/// Resolves `path` to `(directory, dataset name)`.
///
/// `path` is either a directory holding exactly one `ind.<name>.graph`, or
/// `<dir>/<name>` naming the dataset inside `<dir>`.
fn locate(path: &Path) -> Result<(PathBuf, String)> {
    if path.is_dir() {
        let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
        let mut names: Vec<String> = entries
            .filter_map(|e| e.ok())
            .filter_map(|e| {
                let f = e.file_name().to_string_lossy().into_owned();
                f.strip_prefix("ind.")
                    .and_then(|r| r.strip_suffix(".graph"))
                    .map(str::to_string)
            })
            .collect();
        names.sort();
        return match names.as_slice() {
            [one] => Ok((path.to_path_buf(), one.clone())),
            [] => Err(Error::integrity(format!(
                "{} contains no ind.<name>.graph file",
                path.display()
            ))),
            many => Err(Error::integrity(format!(
                "{} holds several datasets ({}); name one as <dir>/<name>",
                path.display(),
                many.join(", ")
            ))),
        };
    }
    let name = path
        .file_name()
        .map(|n| n.to_string_lossy().trim_start_matches("ind.").to_string())
        .ok_or_else(|| Error::arg(format!("cannot resolve dataset from {}", path.display())))?;
    let dir = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok((dir, name))
}

fn read_pickle(dir: &Path, name: &str, part: &str) -> Result<super::pickle::Obj> {
    let p = dir.join(format!("ind.{name}.{part}"));
    let bytes = fs::read(&p).map_err(|e| Error::io(&p, e))?;
    unpickle(&bytes).map_err(|e| Error::integrity(format!("{}: {e}", p.display())))
}

fn matrix(dir: &Path, name: &str, part: &str) -> Result<NdArray> {
    let obj = read_pickle(dir, name, part)?;
    let arr = NdArray::from_matrix_pickle(&obj)
        .map_err(|e| Error::integrity(format!("ind.{name}.{part}: {e}")))?;
    if arr.shape.len() != 2 {
        return Err(Error::integrity(format!(
            "ind.{name}.{part} is not a matrix (shape {:?})",
            arr.shape
        )));
    }
    Ok(arr)
}

fn argmax_rows(m: &NdArray) -> Vec<usize> {
    let cols = m.shape[1];
    m.data
        .chunks(cols.max(1))
        .map(|row| {
            row.iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |best, (i, &v)| {
                    if v > best.1 {
                        (i, v)
                    } else {
                        best
                    }
                })
                .0
        })
        .collect()
}

pub fn load_planetoid(path: &Path) -> Result<Graph> {
    let (dir, name) = locate(path)?;
    let y = matrix(&dir, &name, "y")?;
    let tx = matrix(&dir, &name, "tx")?;
    let ty = matrix(&dir, &name, "ty")?;
    let allx = matrix(&dir, &name, "allx")?;
    let ally = matrix(&dir, &name, "ally")?;
    let adjacency = adjacency_from_pickle(&read_pickle(&dir, &name, "graph")?)?;

    let index_path = dir.join(format!("ind.{name}.test.index"));
    let index_text = fs::read_to_string(&index_path).map_err(|e| Error::io(&index_path, e))?;
    let mut test_order = Vec::new();
    for (i, line) in index_text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        test_order.push(t.parse::<usize>().map_err(|e| Error::Parse {
            path: index_path.clone(),
            line: i + 1,
            msg: format!("bad test index: {e}"),
        })?);
    }

    let d = allx.shape[1];
    let classes = ally.shape[1];
    if tx.shape[1] != d || ty.shape[1] != classes || y.shape[1] != classes {
        return Err(Error::integrity(format!(
            "column mismatch: allx {d}, tx {}, ally {classes}, ty {}, y {}",
            tx.shape[1], ty.shape[1], y.shape[1]
        )));
    }
    if allx.shape[0] != ally.shape[0] || tx.shape[0] != ty.shape[0] {
        return Err(Error::integrity("feature and label row counts disagree"));
    }
    if tx.shape[0] != test_order.len() {
        return Err(Error::integrity(format!(
            "{} test rows but {} test indices",
            tx.shape[0],
            test_order.len()
        )));
    }
    let Some((&lo, &hi)) = test_order.iter().min().zip(test_order.iter().max()) else {
        return Err(Error::integrity("empty test index"));
    };
    let n_all = allx.shape[0];
    if lo < n_all {
        return Err(Error::integrity(format!(
            "test index {lo} overlaps the {n_all} allx rows"
        )));
    }
    // Rows of tx are placed at lo..=hi; unlisted slots stay zero.
    let n = n_all.max(hi + 1);
    let mut features = Array2::<f64>::zeros((n, d));
    let mut labels = vec![0usize; n];
    let ally_labels = argmax_rows(&ally);
    let ty_labels = argmax_rows(&ty);
    for r in 0..n_all {
        features
            .row_mut(r)
            .iter_mut()
            .zip(&allx.data[r * d..(r + 1) * d])
            .for_each(|(o, &v)| *o = v);
        labels[r] = ally_labels[r];
    }
    for (k, &target) in test_order.iter().enumerate() {
        features
            .row_mut(target)
            .iter_mut()
            .zip(&tx.data[k * d..(k + 1) * d])
            .for_each(|(o, &v)| *o = v);
        labels[target] = ty_labels[k];
    }

    let mut splits = vec![Split::None; n];
    let n_train = y.shape[0];
    if n_train + VAL_SIZE > n_all {
        return Err(Error::integrity(format!(
            "{n_train} train rows plus {VAL_SIZE} val rows exceed {n_all} allx rows"
        )));
    }
    splits[..n_train].fill(Split::Train);
    splits[n_train..n_train + VAL_SIZE].fill(Split::Val);
    for &t in &test_order {
        splits[t] = Split::Test;
    }

    let mut edges = EdgeSet::new();
    let mut self_loops = 0usize;
    for (u, list) in adjacency {
        for v in list {
            if u >= n || v >= n {
                return Err(Error::integrity(format!(
                    "citation ({u}, {v}) references a node outside 0..{n}"
                )));
            }
            if u == v {
                self_loops += 1;
            } else {
                edges.insert(u, v);
            }
        }
    }
    if self_loops > 0 {
        log::info!("ind.{name}.graph: dropped {self_loops} self-citations");
    }

    Graph::new(features, labels, Some(classes), edges, splits)
}

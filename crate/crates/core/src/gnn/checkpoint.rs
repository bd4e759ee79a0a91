//! Text checkpoint of model parameters.
//!
//! ```text
//! unlearn-audit-params 1
//! backbone gcn
//! seed 1001
//! tensor layer0.weight 1433 64
//! <one line per row, space-separated values>
//! tensor layer0.bias 64
//! <one line>
//! ...
//! end
//! ```
//!
//! Tensors appear in the order layer0.weight, layer0.bias, [layer0.att_src,
//! layer0.att_dst,] layer1.weight, layer1.bias, [layer1.att_src,
//! layer1.att_dst]. Values use the shortest representation that parses back
//! to the identical `f64`.

use std::fmt::Write as _;
use std::path::Path;

use super::{Backbone, ModelParams};
use crate::error::{Error, Result};

const MAGIC: &str = "unlearn-audit-params 1";

fn names(p: &ModelParams) -> Vec<(String, Vec<usize>)> {
    let mut out = Vec::new();
    for (i, l) in p.layers.iter().enumerate() {
        let (r, c) = l.weight.dim();
        out.push((format!("layer{i}.weight"), vec![r, c]));
        out.push((format!("layer{i}.bias"), vec![c]));
        if l.attention.is_some() {
            out.push((format!("layer{i}.att_src"), vec![c]));
            out.push((format!("layer{i}.att_dst"), vec![c]));
        }
    }
    out
}

pub fn checkpoint_string(p: &ModelParams) -> String {
    let mut s = format!("{MAGIC}\nbackbone {}\nseed {}\n", p.backbone, p.seed);
    for ((name, shape), values) in names(p).into_iter().zip(p.slices()) {
        let dims: Vec<String> = shape.iter().map(usize::to_string).collect();
        writeln!(s, "tensor {name} {}", dims.join(" ")).unwrap();
        let width = *shape.last().unwrap();
        for row in values.chunks(width.max(1)) {
            let vals: Vec<String> = row.iter().map(f64::to_string).collect();
            writeln!(s, "{}", vals.join(" ")).unwrap();
        }
    }
    s.push_str("end\n");
    s
}

pub fn write_checkpoint(p: &ModelParams, path: &Path) -> Result<()> {
    std::fs::write(path, checkpoint_string(p)).map_err(|e| Error::io(path, e))
}

pub fn parse_checkpoint(text: &str, path: &Path) -> Result<ModelParams> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let perr = |line: usize, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut next = |what: &str| {
        lines
            .next()
            .ok_or_else(|| perr(0, format!("unexpected end of file, expected {what}")))
    };
    let (ln, magic) = next("header")?;
    if magic != MAGIC {
        return Err(perr(ln, format!("expected `{MAGIC}`")));
    }
    let (ln, bb) = next("backbone")?;
    let backbone: Backbone = bb
        .strip_prefix("backbone ")
        .ok_or_else(|| perr(ln, "expected `backbone <name>`".into()))?
        .parse()
        .map_err(|e: String| perr(ln, e))?;
    let (ln, sd) = next("seed")?;
    let seed: u64 = sd
        .strip_prefix("seed ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| perr(ln, "expected `seed <u64>`".into()))?;

    let mut tensors: Vec<(String, Vec<usize>, Vec<f64>)> = Vec::new();
    loop {
        let (ln, header) = next("tensor or end")?;
        if header == "end" {
            break;
        }
        let mut parts = header.split_whitespace();
        if parts.next() != Some("tensor") {
            return Err(perr(ln, "expected `tensor <name> <dims>`".into()));
        }
        let name = parts
            .next()
            .ok_or_else(|| perr(ln, "missing tensor name".into()))?
            .to_string();
        let shape = parts
            .map(|d| {
                d.parse::<usize>()
                    .map_err(|_| perr(ln, format!("bad dimension `{d}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        let rows = if shape.len() == 2 { shape[0] } else { 1 };
        let mut values = Vec::with_capacity(shape.iter().product());
        for _ in 0..rows {
            let (ln, row) = next("tensor row")?;
            for t in row.split_whitespace() {
                values.push(
                    t.parse::<f64>()
                        .map_err(|_| perr(ln, format!("bad value `{t}`")))?,
                );
            }
        }
        if values.len() != shape.iter().product::<usize>() {
            return Err(perr(
                ln,
                format!(
                    "tensor {name} has {} values for shape {shape:?}",
                    values.len()
                ),
            ));
        }
        tensors.push((name, shape, values));
    }

    let w0 = tensors
        .first()
        .ok_or_else(|| perr(0, "no tensors".into()))?;
    let in_dim = w0.1[0];
    let hidden = *w0.1.last().unwrap();
    let classes = tensors
        .iter()
        .find(|t| t.0 == "layer1.weight")
        .map(|t| *t.1.last().unwrap())
        .ok_or_else(|| perr(0, "missing layer1.weight".into()))?;
    let mut p = ModelParams::zeros(backbone, in_dim, hidden, classes);
    p.seed = seed;
    let expected = names(&p);
    if expected.len() != tensors.len() {
        return Err(perr(
            0,
            format!(
                "expected {} tensors, found {}",
                expected.len(),
                tensors.len()
            ),
        ));
    }
    for ((slot, (name, shape)), (got_name, got_shape, values)) in
        p.slices_mut().into_iter().zip(expected).zip(tensors)
    {
        if name != got_name || shape != got_shape {
            return Err(perr(
                0,
                format!("expected tensor {name} {shape:?}, found {got_name} {got_shape:?}"),
            ));
        }
        slot.copy_from_slice(&values);
    }
    Ok(p)
}

pub fn read_checkpoint(path: &Path) -> Result<ModelParams> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_checkpoint(&text, path)
}

//! Text checkpoint format for [`DenseNet`].
//!
//! Layout (whitespace-tolerant, one logical record per line):
//!
//! ```text
//! densenet v1
//! layers <count>
//! layer <in_dim> <out_dim> <activation>
//! <out_dim lines of in_dim weight values, row-major>
//! <one line of out_dim bias values>
//! ... repeated per layer ...
//! ```
//!
//! Activations are `relu`, `tanh`, `sigmoid`, `identity`, or
//! `softmax:<w1>,<w2>,...`. Values are printed with Rust's shortest
//! round-trip `f64` formatting, so save/load is exact.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::activation::Activation;
use super::matrix::Matrix;
use super::net::{DenseNet, Layer};
use crate::error::io_err;
use crate::{Error, Result};

const MAGIC: &str = "densenet v1";

pub fn save_net(path: &Path, net: &DenseNet) -> Result<()> {
    let mut out = String::new();
    out.push_str(MAGIC);
    out.push('\n');
    out.push_str(&format!("layers {}\n", net.layers().len()));
    for layer in net.layers() {
        out.push_str(&format!(
            "layer {} {} {}\n",
            layer.in_dim(),
            layer.out_dim(),
            layer.activation.to_spec_string()
        ));
        for r in 0..layer.out_dim() {
            let row: Vec<String> = layer.weight.row(r).iter().map(|v| format!("{v}")).collect();
            out.push_str(&row.join(" "));
            out.push('\n');
        }
        let bias: Vec<String> = layer.bias.iter().map(|v| format!("{v}")).collect();
        out.push_str(&bias.join(" "));
        out.push('\n');
    }
    let mut file = fs::File::create(path).map_err(|e| io_err(path.display().to_string(), e))?;
    file.write_all(out.as_bytes())
        .map_err(|e| io_err(path.display().to_string(), e))?;
    Ok(())
}

pub fn load_net(path: &Path) -> Result<DenseNet> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path.display().to_string(), e))?;
    parse_net(&text).map_err(|e| match e {
        Error::CheckpointFormat { what, .. } => Error::CheckpointFormat {
            path: path.display().to_string(),
            what,
        },
        other => other,
    })
}

fn format_err(what: impl Into<String>) -> Error {
    Error::CheckpointFormat {
        path: String::new(),
        what: what.into(),
    }
}

fn parse_net(text: &str) -> Result<DenseNet> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let magic = lines.next().ok_or_else(|| format_err("empty file"))?;
    if magic.trim() != MAGIC {
        return Err(format_err(format!("bad header '{magic}'")));
    }
    let count_line = lines.next().ok_or_else(|| format_err("missing layer count"))?;
    let count: usize = count_line
        .trim()
        .strip_prefix("layers ")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| format_err(format!("bad layer count line '{count_line}'")))?;

    let mut layers = Vec::with_capacity(count);
    for _ in 0..count {
        let header = lines.next().ok_or_else(|| format_err("missing layer header"))?;
        let mut parts = header.trim().split_whitespace();
        if parts.next() != Some("layer") {
            return Err(format_err(format!("bad layer header '{header}'")));
        }
        let in_dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err("bad in_dim"))?;
        let out_dim: usize = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| format_err("bad out_dim"))?;
        let act_str = parts.next().ok_or_else(|| format_err("missing activation"))?;
        let activation = Activation::from_spec_string(act_str)?;

        let mut weights = Vec::with_capacity(in_dim * out_dim);
        for _ in 0..out_dim {
            let row = lines.next().ok_or_else(|| format_err("missing weight row"))?;
            let values = parse_floats(row)?;
            if values.len() != in_dim {
                return Err(format_err(format!(
                    "weight row has {} values, expected {in_dim}",
                    values.len()
                )));
            }
            weights.extend(values);
        }
        let bias_line = lines.next().ok_or_else(|| format_err("missing bias row"))?;
        let bias = parse_floats(bias_line)?;
        if bias.len() != out_dim {
            return Err(format_err(format!(
                "bias row has {} values, expected {out_dim}",
                bias.len()
            )));
        }
        layers.push(Layer {
            weight: Matrix::from_vec(out_dim, in_dim, weights)?,
            bias,
            activation,
        });
    }
    if lines.next().is_some() {
        return Err(format_err("trailing content after last layer"));
    }
    DenseNet::from_layers(layers)
}

fn parse_floats(line: &str) -> Result<Vec<f64>> {
    line.split_whitespace()
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|_| format_err(format!("bad float '{tok}'")))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn save_load_roundtrip_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let net = DenseNet::new(
            &[5, 4, 6],
            &[Activation::Tanh, Activation::GroupedSoftmax(vec![2, 4])],
            &mut rng,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.txt");
        save_net(&path, &net).unwrap();
        let loaded = load_net(&path).unwrap();
        assert_eq!(net.params(), loaded.params());
        assert_eq!(net.layers().len(), loaded.layers().len());
        for (a, b) in net.layers().iter().zip(loaded.layers()) {
            assert_eq!(a.activation, b.activation);
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        assert!(parse_net("garbage").is_err());
        assert!(parse_net("densenet v1\nlayers 1\nlayer 2 1 relu\n1.0\n0.0").is_err());
        assert!(parse_net("densenet v1\nlayers 1\nlayer 2 1 nosuch\n1.0 2.0\n0.0").is_err());
    }
}

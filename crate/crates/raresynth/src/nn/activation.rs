//! Layer activations, including the per-field grouped softmax used by
//! generator output heads and two-way classifier heads.

use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
    /// Softmax applied independently to consecutive slices of the given
    /// widths. The widths must sum to the layer output dimension and every
    /// group's output sums to 1.
    GroupedSoftmax(Vec<usize>),
}

impl Activation {
    pub fn validate(&self, out_dim: usize) -> Result<()> {
        if let Activation::GroupedSoftmax(groups) = self {
            if groups.is_empty() || groups.iter().any(|&g| g == 0) {
                return Err(Error::InvalidConfig(
                    "softmax groups must be non-empty with positive widths".into(),
                ));
            }
            let total: usize = groups.iter().sum();
            if total != out_dim {
                return Err(Error::DimensionMismatch(format!(
                    "softmax group widths sum to {total}, layer output is {out_dim}"
                )));
            }
        }
        Ok(())
    }

    pub fn is_elementwise(&self) -> bool {
        !matches!(self, Activation::GroupedSoftmax(_))
    }

    /// Applies the activation to one row of pre-activations in place.
    pub fn apply_row(&self, z: &mut [f64]) {
        match self {
            Activation::Relu => {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            Activation::Tanh => {
                for v in z.iter_mut() {
                    *v = v.tanh();
                }
            }
            Activation::Sigmoid => {
                for v in z.iter_mut() {
                    *v = 1.0 / (1.0 + (-*v).exp());
                }
            }
            Activation::Identity => {}
            Activation::GroupedSoftmax(groups) => {
                let mut start = 0;
                for &g in groups {
                    softmax_in_place(&mut z[start..start + g]);
                    start += g;
                }
            }
        }
    }

    /// Computes `dL/dz` for one row from the post-activation values `y` and
    /// the upstream gradient `dL/dy`.
    pub fn backprop_row(&self, y: &[f64], upstream: &[f64], dz: &mut [f64]) {
        match self {
            Activation::Relu => {
                for ((d, &yv), &u) in dz.iter_mut().zip(y).zip(upstream) {
                    *d = if yv > 0.0 { u } else { 0.0 };
                }
            }
            Activation::Tanh => {
                for ((d, &yv), &u) in dz.iter_mut().zip(y).zip(upstream) {
                    *d = u * (1.0 - yv * yv);
                }
            }
            Activation::Sigmoid => {
                for ((d, &yv), &u) in dz.iter_mut().zip(y).zip(upstream) {
                    *d = u * yv * (1.0 - yv);
                }
            }
            Activation::Identity => dz.copy_from_slice(upstream),
            Activation::GroupedSoftmax(groups) => {
                let mut start = 0;
                for &g in groups {
                    let ys = &y[start..start + g];
                    let us = &upstream[start..start + g];
                    let dot: f64 = ys.iter().zip(us).map(|(&a, &b)| a * b).sum();
                    for ((d, &yv), &u) in dz[start..start + g].iter_mut().zip(ys).zip(us) {
                        *d = yv * (u - dot);
                    }
                    start += g;
                }
            }
        }
    }

    /// First derivative `sigma'(z)` expressed through the output `y`.
    /// Only defined for elementwise activations.
    pub fn grad_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Identity => 1.0,
            Activation::GroupedSoftmax(_) => {
                panic!("grad_from_output is elementwise-only")
            }
        }
    }

    /// Second derivative `sigma''(z)` expressed through the output `y`.
    /// Only defined for elementwise activations.
    pub fn second_from_output(&self, y: f64) -> f64 {
        match self {
            Activation::Relu | Activation::Identity => 0.0,
            Activation::Tanh => -2.0 * y * (1.0 - y * y),
            Activation::Sigmoid => y * (1.0 - y) * (1.0 - 2.0 * y),
            Activation::GroupedSoftmax(_) => {
                panic!("second_from_output is elementwise-only")
            }
        }
    }

    /// Compact textual form used by the checkpoint format.
    pub fn to_spec_string(&self) -> String {
        match self {
            Activation::Relu => "relu".to_string(),
            Activation::Tanh => "tanh".to_string(),
            Activation::Sigmoid => "sigmoid".to_string(),
            Activation::Identity => "identity".to_string(),
            Activation::GroupedSoftmax(groups) => {
                let widths: Vec<String> = groups.iter().map(|g| g.to_string()).collect();
                format!("softmax:{}", widths.join(","))
            }
        }
    }

    pub fn from_spec_string(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" => Ok(Activation::Identity),
            other => {
                if let Some(widths) = other.strip_prefix("softmax:") {
                    let groups = widths
                        .split(',')
                        .map(|w| {
                            w.parse::<usize>().map_err(|_| {
                                Error::CheckpointFormat {
                                    path: String::new(),
                                    what: format!("bad softmax group width '{w}'"),
                                }
                            })
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Ok(Activation::GroupedSoftmax(groups))
                } else {
                    Err(Error::CheckpointFormat {
                        path: String::new(),
                        what: format!("unknown activation '{other}'"),
                    })
                }
            }
        }
    }
}

/// Numerically stable softmax over one slice.
pub fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

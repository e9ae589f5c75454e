//! Minimal dense-network engine: batched MLP forward/backward with exact
//! gradients, Adam, weight clipping, and a text checkpoint format.
//!
//! Everything is `f64` and single-threaded. Nets are plain values; forward
//! and backward are pure functions of (net, input), so repeated calls give
//! bit-identical results.

mod activation;
mod adam;
mod checkpoint;
mod matrix;
mod net;

pub use activation::{softmax_in_place, Activation};
pub use adam::{AdamConfig, AdamState};
pub use checkpoint::{load_net, save_net};
pub use matrix::Matrix;
pub use net::{DenseNet, ForwardCache, Gradients};

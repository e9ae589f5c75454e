//! Fixed-architecture dense networks with exact reverse-mode gradients.

use rand::Rng;

use super::activation::Activation;
use super::matrix::Matrix;
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct Layer {
    /// Row-major, shape (out_dim, in_dim).
    pub(crate) weight: Matrix,
    pub(crate) bias: Vec<f64>,
    pub(crate) activation: Activation,
}

impl Layer {
    pub fn in_dim(&self) -> usize {
        self.weight.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weight.rows()
    }
}

/// A multilayer perceptron: alternating affine transforms and activations.
#[derive(Debug, Clone)]
pub struct DenseNet {
    layers: Vec<Layer>,
}

/// Post-activation values captured by [`DenseNet::forward`] and consumed by
/// [`DenseNet::backward`]. The cache is only valid for the net and input it
/// was produced from; shape mismatches are rejected.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input: Matrix,
    post: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.post.last().expect("cache from at least one layer")
    }

    pub fn batch_size(&self) -> usize {
        self.input.rows()
    }
}

/// Per-layer parameter gradients shaped like the net's parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub(crate) layers: Vec<(Matrix, Vec<f64>)>,
}

impl Gradients {
    pub fn zeros_like(net: &DenseNet) -> Self {
        Gradients {
            layers: net
                .layers
                .iter()
                .map(|l| (Matrix::zeros(l.out_dim(), l.in_dim()), vec![0.0; l.out_dim()]))
                .collect(),
        }
    }

    pub fn add(&mut self, other: &Gradients) {
        assert_eq!(self.layers.len(), other.layers.len());
        for ((w, b), (ow, ob)) in self.layers.iter_mut().zip(&other.layers) {
            for (x, &y) in w.data_mut().iter_mut().zip(ow.data()) {
                *x += y;
            }
            for (x, &y) in b.iter_mut().zip(ob) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for (w, b) in self.layers.iter_mut() {
            for x in w.data_mut() {
                *x *= factor;
            }
            for x in b.iter_mut() {
                *x *= factor;
            }
        }
    }

    /// Flattens to the same order used by [`DenseNet::params`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w.data());
            out.extend_from_slice(b);
        }
        out
    }
}

impl DenseNet {
    /// Builds a net with the given layer sizes and one activation per layer.
    /// Weights are initialized uniformly in
    /// `[-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))]`, biases zero.
    pub fn new<R: Rng + ?Sized>(
        sizes: &[usize],
        activations: &[Activation],
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 {
            return Err(Error::InvalidConfig(
                "a net needs at least an input and an output size".into(),
            ));
        }
        if activations.len() != sizes.len() - 1 {
            return Err(Error::InvalidConfig(format!(
                "{} layer sizes require {} activations, got {}",
                sizes.len(),
                sizes.len() - 1,
                activations.len()
            )));
        }
        if sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidConfig("layer sizes must be positive".into()));
        }
        let mut layers = Vec::with_capacity(activations.len());
        for (i, act) in activations.iter().enumerate() {
            let (fan_in, fan_out) = (sizes[i], sizes[i + 1]);
            act.validate(fan_out)?;
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.random_range(-limit..limit))
                .collect();
            layers.push(Layer {
                weight: Matrix::from_vec(fan_out, fan_in, data)?,
                bias: vec![0.0; fan_out],
                activation: act.clone(),
            });
        }
        Ok(DenseNet { layers })
    }

    pub(crate) fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidConfig("a net needs at least one layer".into()));
        }
        for w in layers.windows(2) {
            if w[0].out_dim() != w[1].in_dim() {
                return Err(Error::DimensionMismatch(format!(
                    "layer output {} does not feed layer input {}",
                    w[0].out_dim(),
                    w[1].in_dim()
                )));
            }
        }
        for l in &layers {
            l.activation.validate(l.out_dim())?;
        }
        Ok(DenseNet { layers })
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Runs the net on a batch (one sample per row) and returns the output
    /// together with the cache needed for [`DenseNet::backward`].
    pub fn forward(&self, input: &Matrix) -> Result<ForwardCache> {
        if input.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch(format!(
                "input width {} != net input {}",
                input.cols(),
                self.input_dim()
            )));
        }
        let mut post = Vec::with_capacity(self.layers.len());
        let mut current = input;
        for layer in &self.layers {
            let mut z = current.mul_transpose(&layer.weight);
            z.add_row_vector(&layer.bias);
            for r in 0..z.rows() {
                layer.activation.apply_row(z.row_mut(r));
            }
            post.push(z);
            current = post.last().unwrap();
        }
        Ok(ForwardCache {
            input: input.clone(),
            post,
        })
    }

    /// Output only, when the cache is not needed.
    pub fn infer(&self, input: &Matrix) -> Result<Matrix> {
        let mut cache = self.forward(input)?;
        Ok(cache.post.pop().expect("at least one layer"))
    }

    /// Exact reverse-mode gradients. `grad_output` is `dL/dy` for the batch
    /// output `y`; returns parameter gradients (summed over the batch) and
    /// the gradient with respect to the input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &Matrix) -> Result<(Gradients, Matrix)> {
        self.check_cache(cache)?;
        let last = cache.post.last().unwrap();
        if grad_output.rows() != last.rows() || grad_output.cols() != last.cols() {
            return Err(Error::DimensionMismatch(format!(
                "grad_output is {}x{}, expected {}x{}",
                grad_output.rows(),
                grad_output.cols(),
                last.rows(),
                last.cols()
            )));
        }

        let mut grads = Vec::with_capacity(self.layers.len());
        let mut upstream = grad_output.clone();
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let y = &cache.post[idx];
            let mut dz = Matrix::zeros(y.rows(), y.cols());
            for r in 0..y.rows() {
                let mut row = vec![0.0; y.cols()];
                layer.activation.backprop_row(y.row(r), upstream.row(r), &mut row);
                dz.row_mut(r).copy_from_slice(&row);
            }
            let layer_input = if idx == 0 { &cache.input } else { &cache.post[idx - 1] };
            let dw = dz.transpose_mul(layer_input);
            let db = dz.column_sums();
            upstream = dz.mul(&layer.weight);
            grads.push((dw, db));
        }
        grads.reverse();
        Ok((Gradients { layers: grads }, upstream))
    }

    fn check_cache(&self, cache: &ForwardCache) -> Result<()> {
        if cache.post.len() != self.layers.len() || cache.input.cols() != self.input_dim() {
            return Err(Error::DimensionMismatch(
                "cache does not match this net".into(),
            ));
        }
        for (m, l) in cache.post.iter().zip(&self.layers) {
            if m.cols() != l.out_dim() || m.rows() != cache.input.rows() {
                return Err(Error::DimensionMismatch(
                    "cache does not match this net".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn param_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weight.data().len() + l.bias.len())
            .sum()
    }

    /// Flattened parameters: per layer, weight entries row-major then biases.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(l.weight.data());
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(Error::DimensionMismatch(format!(
                "parameter vector length {} != {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut offset = 0;
        for l in &mut self.layers {
            let w = l.weight.data_mut();
            w.copy_from_slice(&flat[offset..offset + w.len()]);
            offset += w.len();
            let blen = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + blen]);
            offset += blen;
        }
        Ok(())
    }

    /// Clamps every weight and bias into `[-c, c]`. Idempotent.
    pub fn clip_weights(&mut self, c: f64) {
        assert!(c > 0.0, "clip constant must be positive");
        for l in &mut self.layers {
            for v in l.weight.data_mut() {
                *v = v.clamp(-c, c);
            }
            for v in l.bias.iter_mut() {
                *v = v.clamp(-c, c);
            }
        }
    }

    /// Directional derivative of the scalar output along input direction
    /// `direction`, plus its gradient with respect to the parameters.
    ///
    /// For a net `D` with one output this computes
    /// `h = grad_x D(x) . direction` by a forward tangent pass, then
    /// backpropagates through that pass, which is what the gradient-penalty
    /// term needs. Requires elementwise activations and a single output.
    pub fn input_jvp_grad(&self, input: &[f64], direction: &[f64]) -> Result<(f64, Gradients)> {
        if self.output_dim() != 1 {
            return Err(Error::InvalidConfig(
                "input_jvp_grad needs a scalar output".into(),
            ));
        }
        if self.layers.iter().any(|l| !l.activation.is_elementwise()) {
            return Err(Error::InvalidConfig(
                "input_jvp_grad supports elementwise activations only".into(),
            ));
        }
        if input.len() != self.input_dim() || direction.len() != self.input_dim() {
            return Err(Error::DimensionMismatch(
                "input/direction width must match net input".into(),
            ));
        }

        // Forward pass with tangents: a = sigma(z), adot = sigma'(z) * zdot.
        let n = self.layers.len();
        let mut a: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut adot: Vec<Vec<f64>> = Vec::with_capacity(n);
        let mut cur = input.to_vec();
        let mut cur_dot = direction.to_vec();
        for layer in &self.layers {
            let out = layer.out_dim();
            let mut z = vec![0.0; out];
            let mut zdot = vec![0.0; out];
            for o in 0..out {
                let row = layer.weight.row(o);
                let mut s = layer.bias[o];
                let mut sd = 0.0;
                for ((&w, &x), &xd) in row.iter().zip(&cur).zip(&cur_dot) {
                    s += w * x;
                    sd += w * xd;
                }
                z[o] = s;
                zdot[o] = sd;
            }
            let mut y = z.clone();
            layer.activation.apply_row(&mut y);
            let ydot: Vec<f64> = y
                .iter()
                .zip(&zdot)
                .map(|(&yv, &zd)| layer.activation.grad_from_output(yv) * zd)
                .collect();
            cur = y.clone();
            cur_dot = ydot.clone();
            a.push(y);
            adot.push(ydot);
        }
        let h = cur_dot[0];

        // Reverse pass over the tangent program. bar_a / bar_adot are the
        // adjoints of the primal and tangent streams; the product rule on
        // adot = sigma'(z) * zdot introduces the second derivative.
        let mut grads: Vec<(Matrix, Vec<f64>)> = Vec::with_capacity(n);
        let mut bar_a = vec![0.0; 1];
        let mut bar_adot = vec![1.0; 1];
        for (idx, layer) in self.layers.iter().enumerate().rev() {
            let out = layer.out_dim();
            let y = &a[idx];
            let ydot = &adot[idx];
            let (prev_a, prev_adot): (&[f64], &[f64]) = if idx == 0 {
                (input, direction)
            } else {
                (&a[idx - 1], &adot[idx - 1])
            };
            let mut bar_z = vec![0.0; out];
            let mut bar_zdot = vec![0.0; out];
            for o in 0..out {
                let g1 = layer.activation.grad_from_output(y[o]);
                // zdot reconstructed from ydot = g1 * zdot (g1 may be 0 for
                // relu where zdot's adjoint is 0 anyway).
                let zdot_o = if g1 != 0.0 { ydot[o] / g1 } else { 0.0 };
                let g2 = layer.activation.second_from_output(y[o]);
                bar_zdot[o] = g1 * bar_adot[o];
                bar_z[o] = g1 * bar_a[o] + g2 * zdot_o * bar_adot[o];
            }
            let in_dim = layer.in_dim();
            let mut dw = Matrix::zeros(out, in_dim);
            let mut db = vec![0.0; out];
            let mut bar_prev_a = vec![0.0; in_dim];
            let mut bar_prev_adot = vec![0.0; in_dim];
            for o in 0..out {
                let wrow = layer.weight.row(o);
                let dwrow = dw.row_mut(o);
                for i in 0..in_dim {
                    dwrow[i] = bar_z[o] * prev_a[i] + bar_zdot[o] * prev_adot[i];
                    bar_prev_a[i] += wrow[i] * bar_z[o];
                    bar_prev_adot[i] += wrow[i] * bar_zdot[o];
                }
                db[o] = bar_z[o];
            }
            grads.push((dw, db));
            bar_a = bar_prev_a;
            bar_adot = bar_prev_adot;
        }
        grads.reverse();
        Ok((h, Gradients { layers: grads }))
    }
}


//! The three networks and their shared-trunk wiring.
//!
//! The generator maps `latent ++ condition-one-hot` to per-field probability
//! blocks. The critic and classifier share every hidden layer (the trunk)
//! and differ only in their linear heads: a scalar critic head (sigmoid for
//! the log loss, identity for the critic-difference loss) and a two-way
//! softmax classifier head.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::loss::LossFamily;
use crate::nn::{Activation, DenseNet, ForwardCache, Gradients, Matrix};
use crate::oracle::Label;
use crate::schema::PacketSchema;
use crate::Result;

/// Condition one-hot width: rare, common.
pub const CONDITION_WIDTH: usize = 2;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ModelShape {
    pub latent_dim: usize,
    pub hidden_dim: usize,
    pub family: LossFamily,
    /// Gumbel-softmax temperature; `None` means the generator net ends in a
    /// plain grouped softmax.
    pub gumbel_temperature: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct GanModels {
    pub generator: DenseNet,
    pub trunk: DenseNet,
    pub d_head: DenseNet,
    pub c_head: DenseNet,
    pub shape: ModelShape,
    group_widths: Vec<usize>,
}

/// Generator forward result: the net cache plus the per-field probability
/// blocks actually fed to the critic.
pub struct GenOutput {
    pub cache: ForwardCache,
    pub probs: Matrix,
}

/// One critic/classifier pass over a batch.
pub struct CriticOutput {
    pub trunk: ForwardCache,
    pub d: ForwardCache,
    pub c: ForwardCache,
}

impl CriticOutput {
    pub fn d_values(&self) -> Vec<f64> {
        self.d.output().data().to_vec()
    }

    pub fn c_probs(&self, row: usize) -> [f64; 2] {
        let r = self.c.output().row(row);
        [r[0], r[1]]
    }

    /// Surrogate label: argmax of the classifier's two-way output.
    pub fn surrogate_label(&self, row: usize) -> Label {
        let p = self.c_probs(row);
        if p[0] >= p[1] {
            Label::Rare
        } else {
            Label::Common
        }
    }

    /// Max-class probability, the confidence used by selection policies.
    pub fn confidence(&self, row: usize) -> f64 {
        let p = self.c_probs(row);
        p[0].max(p[1])
    }
}

impl GanModels {
    pub fn build<R: Rng + ?Sized>(
        schema: &PacketSchema,
        shape: ModelShape,
        rng: &mut R,
    ) -> Result<Self> {
        let enc = schema.encoded_width();
        let groups = schema.group_widths();
        let gen_out_act = if shape.gumbel_temperature.is_some() {
            Activation::Identity
        } else {
            Activation::GroupedSoftmax(groups.clone())
        };
        let generator = DenseNet::new(
            &[
                shape.latent_dim + CONDITION_WIDTH,
                shape.hidden_dim,
                shape.hidden_dim,
                enc,
            ],
            &[Activation::Relu, Activation::Relu, gen_out_act],
            rng,
        )?;
        let trunk = DenseNet::new(
            &[enc, shape.hidden_dim, shape.hidden_dim],
            &[Activation::Relu, Activation::Relu],
            rng,
        )?;
        let d_act = match shape.family {
            LossFamily::Js => Activation::Sigmoid,
            LossFamily::Wasserstein => Activation::Identity,
        };
        let d_head = DenseNet::new(&[shape.hidden_dim, 1], &[d_act], rng)?;
        let c_head = DenseNet::new(
            &[shape.hidden_dim, CONDITION_WIDTH],
            &[Activation::GroupedSoftmax(vec![CONDITION_WIDTH])],
            rng,
        )?;
        Ok(GanModels {
            generator,
            trunk,
            d_head,
            c_head,
            shape,
            group_widths: groups,
        })
    }

    pub fn from_parts(
        generator: DenseNet,
        trunk: DenseNet,
        d_head: DenseNet,
        c_head: DenseNet,
        shape: ModelShape,
        schema: &PacketSchema,
    ) -> Result<Self> {
        Ok(GanModels {
            generator,
            trunk,
            d_head,
            c_head,
            shape,
            group_widths: schema.group_widths(),
        })
    }

    /// Builds a generator input batch: latent draws and condition one-hots.
    pub fn gen_input<R: Rng + ?Sized>(&self, conditions: &[Label], rng: &mut R) -> Matrix {
        let width = self.shape.latent_dim + CONDITION_WIDTH;
        let mut input = Matrix::zeros(conditions.len(), width);
        for (r, &cond) in conditions.iter().enumerate() {
            let row = input.row_mut(r);
            for v in row.iter_mut().take(self.shape.latent_dim) {
                *v = StandardNormal.sample(rng);
            }
            row[self.shape.latent_dim + cond.class_index()] = 1.0;
        }
        input
    }

    /// Generator forward pass. In gumbel mode the net emits logits and the
    /// probabilities come from a softmax over noised, temperature-scaled
    /// logits; otherwise the net's grouped-softmax output is used directly.
    pub fn gen_forward<R: Rng + ?Sized>(&self, input: &Matrix, rng: &mut R) -> Result<GenOutput> {
        let cache = self.generator.forward(input)?;
        let probs = match self.shape.gumbel_temperature {
            None => cache.output().clone(),
            Some(tau) => {
                let logits = cache.output();
                let mut scaled = Matrix::zeros(logits.rows(), logits.cols());
                for r in 0..logits.rows() {
                    for (c, &z) in logits.row(r).iter().enumerate() {
                        let u: f64 = rng.random_range(f64::EPSILON..1.0);
                        let gumbel = -(-u.ln()).ln();
                        scaled.set(r, c, (z + gumbel) / tau);
                    }
                }
                let act = Activation::GroupedSoftmax(self.group_widths.clone());
                for r in 0..scaled.rows() {
                    act.apply_row(scaled.row_mut(r));
                }
                scaled
            }
        };
        Ok(GenOutput { cache, probs })
    }

    /// Backpropagates `dL/dprobs` through the softmax step (when external)
    /// and the generator net, returning parameter gradients.
    pub fn gen_backward(&self, out: &GenOutput, grad_probs: &Matrix) -> Result<Gradients> {
        let grad_for_net = match self.shape.gumbel_temperature {
            None => grad_probs.clone(),
            Some(tau) => {
                // dL/dlogits = softmax-jacobian(probs) * upstream / tau.
                let act = Activation::GroupedSoftmax(self.group_widths.clone());
                let mut grad = Matrix::zeros(grad_probs.rows(), grad_probs.cols());
                for r in 0..grad_probs.rows() {
                    let mut dz = vec![0.0; grad_probs.cols()];
                    act.backprop_row(out.probs.row(r), grad_probs.row(r), &mut dz);
                    for (c, v) in dz.iter().enumerate() {
                        grad.set(r, c, v / tau);
                    }
                }
                grad
            }
        };
        let (grads, _) = self.generator.backward(&out.cache, &grad_for_net)?;
        Ok(grads)
    }

    /// Trunk plus both heads on a batch.
    pub fn critic_forward(&self, input: &Matrix) -> Result<CriticOutput> {
        let trunk = self.trunk.forward(input)?;
        let d = self.d_head.forward(trunk.output())?;
        let c = self.c_head.forward(trunk.output())?;
        Ok(CriticOutput { trunk, d, c })
    }

    /// Backpropagates head gradients through the shared trunk. Returns
    /// (trunk, d_head, c_head) parameter gradients and the gradient with
    /// respect to the critic input (needed by generator updates).
    pub fn critic_backward(
        &self,
        out: &CriticOutput,
        d_grad: &Matrix,
        c_grad: &Matrix,
    ) -> Result<(Gradients, Gradients, Gradients, Matrix)> {
        let (gd, hidden_d) = self.d_head.backward(&out.d, d_grad)?;
        let (gc, hidden_c) = self.c_head.backward(&out.c, c_grad)?;
        let mut hidden = hidden_d;
        for (h, &x) in hidden.data_mut().iter_mut().zip(hidden_c.data()) {
            *h += x;
        }
        let (gt, input_grad) = self.trunk.backward(&out.trunk, &hidden)?;
        Ok((gt, gd, gc, input_grad))
    }

    /// Critic-side parameters (trunk, then d head, then c head) flattened
    /// into one vector for the optimizer.
    pub fn critic_params(&self) -> Vec<f64> {
        let mut p = self.trunk.params();
        p.extend(self.d_head.params());
        p.extend(self.c_head.params());
        p
    }

    pub fn critic_param_count(&self) -> usize {
        self.trunk.param_count() + self.d_head.param_count() + self.c_head.param_count()
    }

    pub fn set_critic_params(&mut self, flat: &[f64]) -> Result<()> {
        let t = self.trunk.param_count();
        let d = self.d_head.param_count();
        self.trunk.set_params(&flat[..t])?;
        self.d_head.set_params(&flat[t..t + d])?;
        self.c_head.set_params(&flat[t + d..])?;
        Ok(())
    }

    pub fn critic_grads_flat(&self, gt: &Gradients, gd: &Gradients, gc: &Gradients) -> Vec<f64> {
        let mut g = gt.flatten();
        g.extend(gd.flatten());
        g.extend(gc.flatten());
        g
    }

    /// Weight clipping on the critic path (trunk and critic head; the
    /// classifier head is not part of the Lipschitz-constrained function).
    pub fn clip_critic(&mut self, c: f64) {
        self.trunk.clip_weights(c);
        self.d_head.clip_weights(c);
    }
}

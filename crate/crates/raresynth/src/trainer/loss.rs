//! GAN and classifier losses with per-class multiplicative weighting.
//!
//! The weighted losses multiply each sample's term by `W(label)` where
//! `W(rare) = w` and `W(common) = (1 - w*alpha)/(1 - alpha)`, and divide the
//! generated-side expectation by the normalization `s`. With `w = 1` and
//! `s = 1` they reduce bit-for-bit to the plain losses.

use serde::{Deserialize, Serialize};

use crate::oracle::Label;
use crate::{Error, Result};

/// Probability floor inside logarithms.
pub const LOG_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFamily {
    /// The log-likelihood ("vanilla") loss: `E_p[log D] + E_phat[log(1-D)]`.
    Js,
    /// The critic difference: `E_p[D] - E_phat[D]`.
    Wasserstein,
}

/// How the critic's Lipschitz bound is enforced for the Wasserstein family.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mechanism", rename_all = "kebab-case")]
pub enum Lipschitz {
    None,
    /// Clamp critic weights into `[-c, c]` after each update.
    Clip { c: f64 },
    /// Add `lambda * (||grad_x D|| - 1)^2` on interpolated samples.
    GradientPenalty { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossConfig {
    pub family: LossFamily,
    /// Rare-class weight; `1` disables weighting, values in `(1, 1/alpha)`
    /// emphasize the rare class.
    pub weight: f64,
    /// Normalization constant on the generated-side expectation. Training
    /// keeps `s = 1`; the exact formula is used by the equivalence checks.
    pub normalization: f64,
    pub lipschitz: Lipschitz,
    /// Critic/classifier updates per generator update.
    pub n_critic: usize,
}

impl LossConfig {
    pub fn wasserstein(weight: f64) -> Self {
        LossConfig {
            family: LossFamily::Wasserstein,
            weight,
            normalization: 1.0,
            lipschitz: Lipschitz::Clip { c: 0.01 },
            n_critic: 5,
        }
    }

    pub fn js(weight: f64) -> Self {
        LossConfig {
            family: LossFamily::Js,
            weight,
            normalization: 1.0,
            lipschitz: Lipschitz::None,
            n_critic: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.weight < 1.0 {
            return Err(Error::InvalidConfig(format!(
                "loss weight {} must be >= 1",
                self.weight
            )));
        }
        if !(self.normalization > 0.0) {
            return Err(Error::InvalidConfig("normalization must be positive".into()));
        }
        if self.n_critic == 0 {
            return Err(Error::InvalidConfig("n_critic must be positive".into()));
        }
        if let Lipschitz::Clip { c } = self.lipschitz {
            if !(c > 0.0) {
                return Err(Error::InvalidConfig("clip constant must be positive".into()));
            }
        }
        Ok(())
    }
}

/// Maximum-likelihood estimate of the rare fraction: rare count over total.
pub fn estimate_alpha(labels: &[Label]) -> Result<f64> {
    if labels.is_empty() {
        return Err(Error::InvalidConfig(
            "alpha estimate needs a non-empty labeled pool".into(),
        ));
    }
    let rare = labels.iter().filter(|l| l.is_rare()).count();
    Ok(rare as f64 / labels.len() as f64)
}

/// Variance of the fraction estimator from `n` independent draws:
/// `alpha * (1 - alpha) / n`.
pub fn alpha_variance(alpha: f64, n: usize) -> f64 {
    alpha * (1.0 - alpha) / n as f64
}

/// Per-class multiplicative weights at a given rare-fraction estimate.
/// `of(rare) = w`, `of(common) = (1 - w*alpha)/(1 - alpha)`; the mixture
/// identity `alpha*W(rare) + (1-alpha)*W(common) = 1` holds by construction.
#[derive(Debug, Clone, Copy)]
pub struct Weighting {
    w: f64,
    alpha: f64,
}

impl Weighting {
    /// Requires `w = 1` (any `alpha`) or `1 <= w < 1/alpha` so both class
    /// weights stay positive.
    pub fn new(w: f64, alpha: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::InvalidConfig(format!("alpha {alpha} outside [0, 1]")));
        }
        if w < 1.0 {
            return Err(Error::InvalidConfig(format!("weight {w} must be >= 1")));
        }
        if w > 1.0 && (alpha <= 0.0 || w >= 1.0 / alpha) {
            return Err(Error::InvalidConfig(format!(
                "weight {w} with alpha {alpha}: common-class weight would be non-positive"
            )));
        }
        Ok(Weighting { w, alpha })
    }

    pub fn unit() -> Self {
        Weighting { w: 1.0, alpha: 0.0 }
    }

    pub fn weight(&self) -> f64 {
        self.w
    }

    pub fn of(&self, label: Label) -> f64 {
        match label {
            Label::Rare => self.w,
            Label::Common => (1.0 - self.w * self.alpha) / (1.0 - self.alpha),
        }
    }
}

/// `W(label)` under the given weight and rare-fraction estimate.
pub fn compute_weight(label: Label, w: f64, alpha: f64) -> Result<f64> {
    Ok(Weighting::new(w, alpha)?.of(label))
}

/// Loss value plus the exact per-sample gradients `dL/dD_i` needed to
/// backpropagate through the critic outputs.
#[derive(Debug, Clone)]
pub struct GanLoss {
    pub loss: f64,
    pub d_real: Vec<f64>,
    pub d_fake: Vec<f64>,
}

/// One side of the GAN loss with its per-sample gradients.
#[derive(Debug, Clone)]
pub struct GanTerm {
    pub loss: f64,
    pub grads: Vec<f64>,
}

fn check_critic_outputs(family: LossFamily, batch: &[(f64, Label)]) -> Result<()> {
    if batch.is_empty() {
        return Err(Error::InvalidConfig("gan loss needs non-empty batches".into()));
    }
    for &(d, _) in batch {
        if !d.is_finite() {
            return Err(Error::NonFinite("critic output".into()));
        }
        if family == LossFamily::Js && !(0.0 < d && d < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "JS loss needs critic outputs in (0, 1), got {d}"
            )));
        }
    }
    Ok(())
}

/// Real-side term: `mean(W * log D)` (JS) or `mean(W * D)` (Wasserstein).
pub fn gan_real_term(
    family: LossFamily,
    weighting: &Weighting,
    real: &[(f64, Label)],
) -> Result<GanTerm> {
    check_critic_outputs(family, real)?;
    let n = real.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(real.len());
    for &(d, label) in real {
        let w = weighting.of(label);
        match family {
            LossFamily::Js => {
                loss += w * d.max(LOG_CLAMP).ln() / n;
                grads.push(if d > LOG_CLAMP { w / (n * d) } else { 0.0 });
            }
            LossFamily::Wasserstein => {
                loss += w * d / n;
                grads.push(w / n);
            }
        }
    }
    Ok(GanTerm { loss, grads })
}

/// Generated-side term: `(1/s) * mean(W * log(1 - D))` (JS) or
/// `-(1/s) * mean(W * D)` (Wasserstein).
pub fn gan_fake_term(
    family: LossFamily,
    normalization: f64,
    weighting: &Weighting,
    fake: &[(f64, Label)],
) -> Result<GanTerm> {
    check_critic_outputs(family, fake)?;
    let s = normalization;
    let m = fake.len() as f64;
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(fake.len());
    for &(d, label) in fake {
        let w = weighting.of(label);
        match family {
            LossFamily::Js => {
                loss += w * (1.0 - d).max(LOG_CLAMP).ln() / (s * m);
                grads.push(if 1.0 - d > LOG_CLAMP {
                    -w / (s * m * (1.0 - d))
                } else {
                    0.0
                });
            }
            LossFamily::Wasserstein => {
                loss -= w * d / (s * m);
                grads.push(-w / (s * m));
            }
        }
    }
    Ok(GanTerm { loss, grads })
}

/// Weighted GAN loss over critic outputs with per-sample labels.
///
/// JS family: `mean(W * log D_real) + (1/s) * mean(W * log(1 - D_fake))`;
/// Wasserstein family: `mean(W * D_real) - (1/s) * mean(W * D_fake)`.
pub fn gan_loss(
    family: LossFamily,
    normalization: f64,
    weighting: &Weighting,
    real: &[(f64, Label)],
    fake: &[(f64, Label)],
) -> Result<GanLoss> {
    let real_term = gan_real_term(family, weighting, real)?;
    let fake_term = gan_fake_term(family, normalization, weighting, fake)?;
    Ok(GanLoss {
        loss: real_term.loss + fake_term.loss,
        d_real: real_term.grads,
        d_fake: fake_term.grads,
    })
}

/// Classifier loss value plus per-sample gradients with respect to the
/// two-way probability outputs.
#[derive(Debug, Clone)]
pub struct ClassificationLoss {
    pub loss: f64,
    /// One gradient pair per real sample, aligned with the input order.
    pub grad_real: Vec<[f64; 2]>,
    pub grad_fake: Vec<[f64; 2]>,
}

/// Cross-entropy on real labeled samples plus generated samples against
/// their condition labels: `-mean(log C(x, c))` per side. Either side may be
/// empty; probabilities are clamped at `LOG_CLAMP` inside the log.
pub fn classification_loss(
    real: &[([f64; 2], Label)],
    fake: &[([f64; 2], Label)],
) -> Result<ClassificationLoss> {
    let mut loss = 0.0;
    let mut grad_real = Vec::with_capacity(real.len());
    let mut grad_fake = Vec::with_capacity(fake.len());
    for (batch, grads) in [(real, &mut grad_real), (fake, &mut grad_fake)] {
        let n = batch.len() as f64;
        for &(probs, label) in batch {
            if probs.iter().any(|p| !p.is_finite()) {
                return Err(Error::NonFinite("classifier output".into()));
            }
            let idx = label.class_index();
            let p = probs[idx];
            loss -= p.max(LOG_CLAMP).ln() / n;
            let mut g = [0.0, 0.0];
            // Gradient freezes below the clamp so loss and gradient agree.
            if p > LOG_CLAMP {
                g[idx] = -1.0 / (n * p);
            }
            grads.push(g);
        }
    }
    Ok(ClassificationLoss {
        loss,
        grad_real,
        grad_fake,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_estimate_is_fraction() {
        let mut labels = vec![Label::Rare; 8];
        labels.extend(vec![Label::Common; 992]);
        assert_eq!(estimate_alpha(&labels).unwrap(), 0.008);
        assert_eq!(estimate_alpha(&vec![Label::Common; 500]).unwrap(), 0.0);
        assert!(estimate_alpha(&[]).is_err());
    }

    #[test]
    fn alpha_variance_matches_monte_carlo() {
        let alpha = 0.01;
        let n = 10_000;
        let expected = alpha_variance(alpha, n);
        assert!((expected - 9.9e-7).abs() < 1e-12);
        // Monte Carlo resampling of the estimator.
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let trials = 4000;
        let estimates: Vec<f64> = (0..trials)
            .map(|_| {
                let rare = (0..n).filter(|_| rng.random::<f64>() < alpha).count();
                rare as f64 / n as f64
            })
            .collect();
        let mean: f64 = estimates.iter().sum::<f64>() / trials as f64;
        let var: f64 =
            estimates.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (trials - 1) as f64;
        assert!(
            (var - expected).abs() / expected < 0.15,
            "mc var {var} vs formula {expected}"
        );
    }

    #[test]
    fn unit_weight_collapses_to_one() {
        let w = Weighting::new(1.0, 0.3).unwrap();
        assert_eq!(w.of(Label::Rare), 1.0);
        assert_eq!(w.of(Label::Common), 1.0);
    }

    #[test]
    fn paper_default_weights() {
        let w = Weighting::new(3.0, 0.00776).unwrap();
        assert_eq!(w.of(Label::Rare), 3.0);
        let common = w.of(Label::Common);
        assert!((common - 0.984358).abs() < 1e-6, "common weight {common}");
    }

    #[test]
    fn weight_mixture_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..500 {
            let alpha = rng.random_range(0.001..0.5);
            let w = rng.random_range(1.0..1.0 / alpha - 1e-9);
            let weighting = Weighting::new(w, alpha).unwrap();
            let mix = alpha * weighting.of(Label::Rare) + (1.0 - alpha) * weighting.of(Label::Common);
            assert!((mix - 1.0).abs() < 1e-12, "mixture {mix}");
        }
    }

    #[test]
    fn invalid_weights_are_rejected() {
        assert!(Weighting::new(0.5, 0.1).is_err());
        // w >= 1/alpha would make the common weight non-positive.
        assert!(Weighting::new(10.0, 0.1).is_err());
        assert!(Weighting::new(11.0, 0.1).is_err());
        // w = 1 is fine with any alpha.
        assert!(Weighting::new(1.0, 0.0).is_ok());
        assert!(compute_weight(Label::Rare, 3.0, 0.00776).is_ok());
    }

    #[test]
    fn wasserstein_unweighted_example() {
        let real = [(1.0, Label::Common), (3.0, Label::Common)];
        let fake = [(0.0, Label::Common), (2.0, Label::Common)];
        let out = gan_loss(
            LossFamily::Wasserstein,
            1.0,
            &Weighting::unit(),
            &real,
            &fake,
        )
        .unwrap();
        assert_eq!(out.loss, 1.0);
        assert_eq!(out.d_real, vec![0.5, 0.5]);
        assert_eq!(out.d_fake, vec![-0.5, -0.5]);
    }

    #[test]
    fn js_at_half_is_minus_two_log_two() {
        let real = [(0.5, Label::Common)];
        let fake = [(0.5, Label::Rare)];
        let out = gan_loss(LossFamily::Js, 1.0, &Weighting::unit(), &real, &fake).unwrap();
        assert!((out.loss - (-1.3862943611198906)).abs() < 1e-15);
    }

    #[test]
    fn js_rejects_out_of_range_critic_outputs() {
        let bad = [(1.5, Label::Common)];
        let ok = [(0.5, Label::Common)];
        assert!(gan_loss(LossFamily::Js, 1.0, &Weighting::unit(), &bad, &ok).is_err());
        assert!(gan_loss(LossFamily::Js, 1.0, &Weighting::unit(), &ok, &bad).is_err());
        let nan = [(f64::NAN, Label::Common)];
        assert!(gan_loss(LossFamily::Wasserstein, 1.0, &Weighting::unit(), &nan, &ok).is_err());
    }

    #[test]
    fn weighted_reduces_bit_identically_at_unit_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.random_range(1..20);
            let m = rng.random_range(1..20);
            let real: Vec<(f64, Label)> = (0..n)
                .map(|_| {
                    let label = if rng.random_bool(0.3) { Label::Rare } else { Label::Common };
                    (rng.random_range(0.01..0.99), label)
                })
                .collect();
            let fake: Vec<(f64, Label)> = (0..m)
                .map(|_| {
                    let label = if rng.random_bool(0.3) { Label::Rare } else { Label::Common };
                    (rng.random_range(0.01..0.99), label)
                })
                .collect();
            for family in [LossFamily::Js, LossFamily::Wasserstein] {
                let weighted = gan_loss(family, 1.0, &Weighting::new(1.0, 0.123).unwrap(), &real, &fake)
                    .unwrap();
                // Plain, unweighted reference computed directly.
                let nf = real.len() as f64;
                let mf = fake.len() as f64;
                let reference = match family {
                    LossFamily::Js => {
                        real.iter().map(|&(d, _)| d.max(LOG_CLAMP).ln() / nf).sum::<f64>()
                            + fake
                                .iter()
                                .map(|&(d, _)| (1.0 - d).max(LOG_CLAMP).ln() / mf)
                                .sum::<f64>()
                    }
                    LossFamily::Wasserstein => {
                        real.iter().map(|&(d, _)| d / nf).sum::<f64>()
                            - fake.iter().map(|&(d, _)| d / mf).sum::<f64>()
                    }
                };
                assert_eq!(weighted.loss, reference, "family {family:?}");
            }
        }
    }

    #[test]
    fn classification_loss_examples() {
        // Perfect classifier: zero loss.
        let real = [([1.0, 0.0], Label::Rare), ([0.0, 1.0], Label::Common)];
        let fake = [([1.0, 0.0], Label::Rare)];
        let out = classification_loss(&real, &fake).unwrap();
        assert_eq!(out.loss, 0.0);

        // Uniform classifier on both sides: 2 log 2.
        let real = [([0.5, 0.5], Label::Rare)];
        let fake = [([0.5, 0.5], Label::Common)];
        let out = classification_loss(&real, &fake).unwrap();
        assert!((out.loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);

        // One real rare sample at C(x, rare) = 0.25 and no fakes.
        let real = [([0.25, 0.75], Label::Rare)];
        let out = classification_loss(&real, &[]).unwrap();
        assert!((out.loss - 1.3862943611198906).abs() < 1e-15);
        assert_eq!(out.grad_real[0][0], -4.0);
        assert_eq!(out.grad_real[0][1], 0.0);
    }

    #[test]
    fn loss_config_validation() {
        assert!(LossConfig::wasserstein(3.0).validate().is_ok());
        let mut bad = LossConfig::js(0.5);
        assert!(bad.validate().is_err());
        bad = LossConfig::js(1.0);
        bad.n_critic = 0;
        assert!(bad.validate().is_err());
        bad = LossConfig::wasserstein(1.0);
        bad.lipschitz = Lipschitz::Clip { c: 0.0 };
        assert!(bad.validate().is_err());
    }
}

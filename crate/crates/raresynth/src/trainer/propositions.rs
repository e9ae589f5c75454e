//! Brute-force numerical checks of the two optimization claims behind the
//! training procedure, on small finite supports where every expectation is
//! an exact sum.
//!
//! 1. Weighted-loss equivalence: the class-weighted GAN losses with the
//!    exact normalization `s = w*ah + (1-w*a)*(1-ah)/(1-a)` equal the plain
//!    losses evaluated on the reweighted pair `(q, qhat)`.
//! 2. Rare-class recovery: minimizing GAN distance to the true mixture plus
//!    the classification loss against a *biased* labeled distribution still
//!    recovers the rare-class distribution exactly, provided rare and
//!    common supports are disjoint.

use rand::Rng;

use super::loss::Weighting;
use crate::oracle::Label;
use crate::{Error, Result};

/// A mixture `p = alpha * p_rare + (1 - alpha) * p_common` over a finite
/// support `0..m` with disjoint rare/common supports.
#[derive(Debug, Clone)]
pub struct FiniteSupportInstance {
    pub p_rare: Vec<f64>,
    pub p_common: Vec<f64>,
    pub alpha: f64,
}

impl FiniteSupportInstance {
    pub fn new(p_rare: Vec<f64>, p_common: Vec<f64>, alpha: f64) -> Result<Self> {
        let inst = FiniteSupportInstance {
            p_rare,
            p_common,
            alpha,
        };
        inst.validate()?;
        Ok(inst)
    }

    pub fn support_size(&self) -> usize {
        self.p_rare.len()
    }

    /// Whether support point `x` belongs to the rare class.
    pub fn is_rare(&self, x: usize) -> bool {
        self.p_rare[x] > 0.0
    }

    pub fn mixture(&self, x: usize) -> f64 {
        self.alpha * self.p_rare[x] + (1.0 - self.alpha) * self.p_common[x]
    }

    fn validate(&self) -> Result<()> {
        if self.p_rare.len() != self.p_common.len() || self.p_rare.is_empty() {
            return Err(Error::InvalidConfig(
                "rare and common distributions need the same non-empty support".into(),
            ));
        }
        if !(0.0 < self.alpha && self.alpha < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "alpha {} outside (0, 1)",
                self.alpha
            )));
        }
        for dist in [&self.p_rare, &self.p_common] {
            if dist.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                return Err(Error::InvalidConfig("probabilities outside [0, 1]".into()));
            }
            let sum: f64 = dist.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(Error::InvalidConfig(format!("distribution sums to {sum}")));
            }
        }
        for (x, (&r, &c)) in self.p_rare.iter().zip(&self.p_common).enumerate() {
            if r > 0.0 && c > 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "rare and common supports overlap at point {x}"
                )));
            }
        }
        Ok(())
    }

    /// Random instance with disjoint supports; `max_support` caps the
    /// support size (at least 2 so both classes are non-empty).
    pub fn random<R: Rng + ?Sized>(rng: &mut R, max_support: usize) -> Self {
        let m = rng.random_range(2..=max_support.max(2));
        let m_rare = rng.random_range(1..m);
        let mut p_rare = vec![0.0; m];
        let mut p_common = vec![0.0; m];
        fill_random_simplex(&mut p_rare[..m_rare], rng);
        fill_random_simplex(&mut p_common[m_rare..], rng);
        let alpha = rng.random_range(0.05..0.5);
        FiniteSupportInstance {
            p_rare,
            p_common,
            alpha,
        }
    }
}

fn fill_random_simplex<R: Rng + ?Sized>(slot: &mut [f64], rng: &mut R) {
    let mut sum = 0.0;
    for v in slot.iter_mut() {
        *v = rng.random_range(0.05..1.0);
        sum += *v;
    }
    for v in slot.iter_mut() {
        *v /= sum;
    }
}

/// Absolute gaps between the weighted losses and the plain losses on the
/// reweighted mixtures, plus the exact normalization used.
#[derive(Debug, Clone, Copy)]
pub struct EquivalenceCheck {
    pub js_error: f64,
    pub wasserstein_error: f64,
    pub s: f64,
}

/// Exact-expectation comparison of the weighted losses against the plain
/// losses on `(q, qhat)` for one critic `d_values`, one generated
/// distribution `p_hat`, and one rare weight `w`.
///
/// For the JS family `d_values` must lie in `(0, 1)`.
pub fn weighted_loss_equivalence(
    inst: &FiniteSupportInstance,
    d_values: &[f64],
    p_hat: &[f64],
    w: f64,
) -> Result<EquivalenceCheck> {
    let m = inst.support_size();
    if d_values.len() != m || p_hat.len() != m {
        return Err(Error::DimensionMismatch(
            "critic values and p_hat must cover the support".into(),
        ));
    }
    let alpha = inst.alpha;
    if !(w >= 1.0 && w < 1.0 / alpha) {
        return Err(Error::InvalidConfig(format!(
            "weight {w} outside [1, 1/alpha) for alpha {alpha}"
        )));
    }
    if d_values.iter().any(|&d| !(0.0 < d && d < 1.0)) {
        return Err(Error::InvalidConfig(
            "critic values must be in (0, 1) for the JS comparison".into(),
        ));
    }

    // Weighted side: the per-point weights of the training loss with the
    // exact normalization s.
    let weighting = Weighting::new(w, alpha)?;
    let label_of = |x: usize| if inst.is_rare(x) { Label::Rare } else { Label::Common };
    let alpha_hat: f64 = (0..m).map(|x| if inst.is_rare(x) { p_hat[x] } else { 0.0 }).sum();
    let s = w * alpha_hat + (1.0 - w * alpha) * (1.0 - alpha_hat) / (1.0 - alpha);

    let mut js_weighted = 0.0;
    let mut w_weighted = 0.0;
    for x in 0..m {
        let wx = weighting.of(label_of(x));
        let p = inst.mixture(x);
        js_weighted += p * wx * d_values[x].ln() + p_hat[x] * wx * (1.0 - d_values[x]).ln() / s;
        w_weighted += p * wx * d_values[x] - p_hat[x] * wx * d_values[x] / s;
    }

    // Oracle side: build q and qhat literally from the restricted and
    // renormalized pieces, then evaluate the plain losses.
    let q: Vec<f64> = (0..m)
        .map(|x| w * alpha * inst.p_rare[x] + (1.0 - w * alpha) * inst.p_common[x])
        .collect();
    let rare_coeff = w * alpha_hat / s;
    let common_coeff = (1.0 - w * alpha) * (1.0 - alpha_hat) / (s * (1.0 - alpha));
    let q_hat: Vec<f64> = (0..m)
        .map(|x| {
            if inst.is_rare(x) {
                if alpha_hat > 0.0 {
                    rare_coeff * (p_hat[x] / alpha_hat)
                } else {
                    0.0
                }
            } else if alpha_hat < 1.0 {
                common_coeff * (p_hat[x] / (1.0 - alpha_hat))
            } else {
                0.0
            }
        })
        .collect();

    let mut js_plain = 0.0;
    let mut w_plain = 0.0;
    for x in 0..m {
        js_plain += q[x] * d_values[x].ln() + q_hat[x] * (1.0 - d_values[x]).ln();
        w_plain += q[x] * d_values[x] - q_hat[x] * d_values[x];
    }

    Ok(EquivalenceCheck {
        js_error: (js_weighted - js_plain).abs(),
        wasserstein_error: (w_weighted - w_plain).abs(),
        s,
    })
}

/// One candidate generated pair for the recovery check. Each distribution
/// ranges over the full support, so a candidate may leak rare mass onto
/// common points (and vice versa).
#[derive(Debug, Clone)]
pub struct CandidatePair {
    pub name: String,
    pub p_hat_rare: Vec<f64>,
    pub p_hat_common: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct RecoveryCheck {
    /// Combined objective per candidate, aligned with the input order.
    pub objectives: Vec<f64>,
    /// Indices achieving the minimum (within 1e-12).
    pub argmin: Vec<usize>,
    /// Whether every argmin candidate has `p_hat_rare == p_rare` exactly.
    pub rare_part_recovered: bool,
}

/// Evaluates `d_TV(p_hat, p) + min_C classification_loss` exhaustively over
/// a candidate family, where the classification loss is taken against a
/// (possibly biased) labeled sample distribution `labeled_bias` that carries
/// the *true* labels. Not a training path: this is the independent
/// enumeration oracle.
pub fn rare_recovery_check(
    inst: &FiniteSupportInstance,
    candidates: &[CandidatePair],
    labeled_bias: &[f64],
) -> Result<RecoveryCheck> {
    let m = inst.support_size();
    if labeled_bias.len() != m {
        return Err(Error::DimensionMismatch(
            "labeled bias must cover the support".into(),
        ));
    }
    let bias_sum: f64 = labeled_bias.iter().sum();
    if (bias_sum - 1.0).abs() > 1e-9 || labeled_bias.iter().any(|&p| p < 0.0) {
        return Err(Error::InvalidConfig(
            "labeled bias must be a distribution".into(),
        ));
    }
    if labeled_bias.iter().any(|&p| p == 0.0) {
        // The recovery claim requires the labeled support to cover the
        // whole sample space.
        return Err(Error::InvalidConfig(
            "labeled bias must have full support".into(),
        ));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("candidate family is empty".into()));
    }

    let mut objectives = Vec::with_capacity(candidates.len());
    for cand in candidates {
        if cand.p_hat_rare.len() != m || cand.p_hat_common.len() != m {
            return Err(Error::DimensionMismatch(format!(
                "candidate '{}' support mismatch",
                cand.name
            )));
        }
        // Generated mixture with conditions drawn from the true label
        // distribution (rare with probability alpha).
        let p_hat: Vec<f64> = (0..m)
            .map(|x| inst.alpha * cand.p_hat_rare[x] + (1.0 - inst.alpha) * cand.p_hat_common[x])
            .collect();
        let tv: f64 = (0..m)
            .map(|x| (p_hat[x] - inst.mixture(x)).abs())
            .sum::<f64>()
            / 2.0;

        // Optimal classifier in closed form: per point, C(x, rare) matches
        // the rare share of the combined labeled + generated mass.
        let mut cls = 0.0;
        for x in 0..m {
            let true_rare = inst.is_rare(x);
            let mass_rare =
                if true_rare { labeled_bias[x] } else { 0.0 } + inst.alpha * cand.p_hat_rare[x];
            let mass_common = if true_rare { 0.0 } else { labeled_bias[x] }
                + (1.0 - inst.alpha) * cand.p_hat_common[x];
            let total = mass_rare + mass_common;
            if total == 0.0 {
                continue;
            }
            // -sum m_y * ln(m_y / total), with 0 ln 0 = 0.
            for mass in [mass_rare, mass_common] {
                if mass > 0.0 {
                    cls -= mass * (mass / total).ln();
                }
            }
        }
        objectives.push(tv + cls);
    }

    let min = objectives.iter().cloned().fold(f64::INFINITY, f64::min);
    let argmin: Vec<usize> = objectives
        .iter()
        .enumerate()
        .filter(|(_, &o)| o - min <= 1e-12)
        .map(|(i, _)| i)
        .collect();
    let rare_part_recovered = argmin
        .iter()
        .all(|&i| candidates[i].p_hat_rare == inst.p_rare);

    Ok(RecoveryCheck {
        objectives,
        argmin,
        rare_part_recovered,
    })
}

/// The true pair plus three corrupted variants, the default family for
/// [`rare_recovery_check`].
pub fn default_candidate_family(inst: &FiniteSupportInstance) -> Vec<CandidatePair> {
    let m = inst.support_size();
    let rare_points: Vec<usize> = (0..m).filter(|&x| inst.is_rare(x)).collect();
    let common_points: Vec<usize> = (0..m).filter(|&x| !inst.is_rare(x)).collect();

    let mut family = vec![CandidatePair {
        name: "truth".into(),
        p_hat_rare: inst.p_rare.clone(),
        p_hat_common: inst.p_common.clone(),
    }];

    // Wrong shape inside the rare support (or a within-support spike when
    // the rare class has a single point, which collapses to truth and is
    // replaced by a leak).
    if rare_points.len() >= 2 {
        let mut p = inst.p_rare.clone();
        let moved = p[rare_points[0]] * 0.5;
        p[rare_points[0]] -= moved;
        p[rare_points[1]] += moved;
        family.push(CandidatePair {
            name: "rare-shape".into(),
            p_hat_rare: p,
            p_hat_common: inst.p_common.clone(),
        });
    } else {
        let mut p = vec![0.0; m];
        p[common_points[0]] = 1.0;
        family.push(CandidatePair {
            name: "rare-displaced".into(),
            p_hat_rare: p,
            p_hat_common: inst.p_common.clone(),
        });
    }

    // Rare mass leaking onto a common point.
    let mut leak = inst.p_rare.iter().map(|&p| p * 0.8).collect::<Vec<_>>();
    leak[common_points[0]] += 0.2;
    family.push(CandidatePair {
        name: "rare-leak".into(),
        p_hat_rare: leak,
        p_hat_common: inst.p_common.clone(),
    });

    // Wrong shape in the common class with a perfect rare part.
    if common_points.len() >= 2 {
        let mut p = inst.p_common.clone();
        let moved = p[common_points[0]] * 0.5;
        p[common_points[0]] -= moved;
        p[common_points[1]] += moved;
        family.push(CandidatePair {
            name: "common-shape".into(),
            p_hat_rare: inst.p_rare.clone(),
            p_hat_common: p,
        });
    } else {
        let mut p = vec![0.0; m];
        p[rare_points[0]] = 1.0;
        family.push(CandidatePair {
            name: "common-displaced".into(),
            p_hat_rare: inst.p_rare.clone(),
            p_hat_common: p,
        });
    }

    family
}

#[derive(Debug, Clone)]
pub struct PropositionsReport {
    pub equivalence_trials: usize,
    pub max_js_error: f64,
    pub max_wasserstein_error: f64,
    pub recovery_biases_tested: usize,
    pub rare_part_recovered: bool,
}

/// Runs both checks on one instance: `trials` random (critic, p_hat, w)
/// equivalence trials, and the default candidate family under several
/// labeled-set biases including strongly rare-oversampled ones.
pub fn verify_propositions<R: Rng + ?Sized>(
    inst: &FiniteSupportInstance,
    trials: usize,
    rng: &mut R,
) -> Result<PropositionsReport> {
    inst.validate()?;
    let m = inst.support_size();

    let mut max_js = 0.0f64;
    let mut max_w = 0.0f64;
    for _ in 0..trials {
        let d_values: Vec<f64> = (0..m).map(|_| rng.random_range(0.01..0.99)).collect();
        let mut p_hat = vec![0.0; m];
        fill_random_simplex(&mut p_hat, rng);
        let w = rng.random_range(1.0..(1.0 / inst.alpha) * 0.999);
        let check = weighted_loss_equivalence(inst, &d_values, &p_hat, w)?;
        max_js = max_js.max(check.js_error);
        max_w = max_w.max(check.wasserstein_error);
    }

    let candidates = default_candidate_family(inst);
    let uniform = vec![1.0 / m as f64; m];
    let mut rare_heavy = vec![0.0; m];
    let rare_count = (0..m).filter(|&x| inst.is_rare(x)).count();
    for x in 0..m {
        rare_heavy[x] = if inst.is_rare(x) {
            0.7 / rare_count as f64
        } else {
            0.3 / (m - rare_count) as f64
        };
    }
    let mut common_heavy = vec![0.0; m];
    for x in 0..m {
        common_heavy[x] = if inst.is_rare(x) {
            0.05 / rare_count as f64
        } else {
            0.95 / (m - rare_count) as f64
        };
    }
    let biases = [uniform, rare_heavy, common_heavy];
    let mut recovered = true;
    for bias in &biases {
        let check = rare_recovery_check(inst, &candidates, bias)?;
        recovered &= check.rare_part_recovered;
    }

    Ok(PropositionsReport {
        equivalence_trials: trials,
        max_js_error: max_js,
        max_wasserstein_error: max_w,
        recovery_biases_tested: biases.len(),
        rare_part_recovered: recovered,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn four_point() -> FiniteSupportInstance {
        FiniteSupportInstance::new(
            vec![0.6, 0.4, 0.0, 0.0],
            vec![0.0, 0.0, 0.3, 0.7],
            0.25,
        )
        .unwrap()
    }

    #[test]
    fn overlapping_supports_are_rejected() {
        let err = FiniteSupportInstance::new(
            vec![0.5, 0.5, 0.0],
            vec![0.0, 0.2, 0.8],
            0.25,
        );
        assert!(err.is_err());
    }

    #[test]
    fn unit_weight_makes_q_equal_p() {
        // With w = 1: q = p and qhat = phat, so both gaps are zero by
        // construction regardless of the critic.
        let inst = four_point();
        let check = weighted_loss_equivalence(
            &inst,
            &[0.3, 0.6, 0.2, 0.9],
            &[0.1, 0.2, 0.3, 0.4],
            1.0,
        )
        .unwrap();
        assert!(check.js_error < 1e-12);
        assert!(check.wasserstein_error < 1e-12);
        assert!((check.s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn four_point_equivalence_with_weight_two() {
        let inst = four_point();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let d: Vec<f64> = (0..4).map(|_| rng.random_range(0.01..0.99)).collect();
            let mut p_hat = vec![0.0; 4];
            fill_random_simplex(&mut p_hat, &mut rng);
            let check = weighted_loss_equivalence(&inst, &d, &p_hat, 2.0).unwrap();
            assert!(check.js_error <= 1e-9, "js gap {}", check.js_error);
            assert!(
                check.wasserstein_error <= 1e-9,
                "w gap {}",
                check.wasserstein_error
            );
        }
    }

    #[test]
    fn equivalence_needs_exact_s() {
        // Same computation with s forced to 1 must generally break unless
        // alpha_hat happens to equal alpha, confirming the check is not
        // vacuous.
        let inst = four_point();
        let d = [0.2, 0.4, 0.6, 0.8];
        let p_hat = [0.7, 0.1, 0.1, 0.1]; // alpha_hat = 0.8 != alpha
        let w = 2.0;
        let weighting = Weighting::new(w, inst.alpha).unwrap();
        let mut lhs = 0.0;
        for x in 0..4 {
            let label = if inst.is_rare(x) { Label::Rare } else { Label::Common };
            let wx = weighting.of(label);
            lhs += inst.mixture(x) * wx * d[x] - p_hat[x] * wx * d[x]; // s = 1
        }
        let exact = weighted_loss_equivalence(&inst, &d, &p_hat, w).unwrap();
        assert!(exact.wasserstein_error <= 1e-12);
        assert!((exact.s - 1.0).abs() > 0.05, "s should differ from 1");
        // The s = 1 value differs from the q/qhat evaluation.
        let alpha_hat = 0.8;
        let s = w * alpha_hat + (1.0 - w * inst.alpha) * (1.0 - alpha_hat) / (1.0 - inst.alpha);
        let mut rhs = 0.0;
        for x in 0..4 {
            let q = w * inst.alpha * inst.p_rare[x] + (1.0 - w * inst.alpha) * inst.p_common[x];
            let q_hat = if inst.is_rare(x) {
                w * alpha_hat / s * (p_hat[x] / alpha_hat)
            } else {
                (1.0 - w * inst.alpha) * (1.0 - alpha_hat) / (s * (1.0 - inst.alpha))
                    * (p_hat[x] / (1.0 - alpha_hat))
            };
            rhs += q * d[x] - q_hat * d[x];
        }
        assert!((lhs - rhs).abs() > 1e-3);
    }

    #[test]
    fn recovery_prefers_the_true_pair_under_bias() {
        let inst = four_point();
        let candidates = default_candidate_family(&inst);
        assert_eq!(candidates.len(), 4);
        for bias in [
            vec![0.25; 4],
            vec![0.45, 0.35, 0.1, 0.1],
            vec![0.05, 0.05, 0.45, 0.45],
        ] {
            let check = rare_recovery_check(&inst, &candidates, &bias).unwrap();
            assert_eq!(check.argmin, vec![0], "bias {bias:?}");
            assert!(check.rare_part_recovered);
            assert!(check.objectives[0].abs() < 1e-12);
            for &o in &check.objectives[1..] {
                assert!(o > 1e-6, "corrupted candidate objective {o}");
            }
        }
    }

    #[test]
    fn recovery_rejects_partial_bias_support() {
        let inst = four_point();
        let candidates = default_candidate_family(&inst);
        let err = rare_recovery_check(&inst, &candidates, &[0.5, 0.5, 0.0, 0.0]);
        assert!(err.is_err());
    }

    #[test]
    fn verify_propositions_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..20 {
            let inst = FiniteSupportInstance::random(&mut rng, 16);
            let report = verify_propositions(&inst, 10, &mut rng).unwrap();
            assert!(report.max_js_error <= 1e-9);
            assert!(report.max_wasserstein_error <= 1e-9);
            assert!(report.rare_part_recovered);
        }
    }
}

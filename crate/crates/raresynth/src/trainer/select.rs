//! Which candidates get their labels bought.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionPolicy {
    /// Label the candidates whose max-class probability is smallest.
    LeastConfident,
    /// Label the candidates the classifier is most sure about (the
    /// comparison policy from certainty-seeking active learning).
    MostConfident,
    /// Uniform without replacement.
    Random,
}

/// Picks `k` candidate indices by the given policy. `confidences` holds each
/// candidate's max-class probability; ties break by candidate order.
pub fn select_for_labeling<R: Rng + ?Sized>(
    confidences: &[f64],
    k: usize,
    policy: SelectionPolicy,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if k > confidences.len() {
        return Err(Error::InvalidConfig(format!(
            "cannot select {k} of {} candidates",
            confidences.len()
        )));
    }
    match policy {
        SelectionPolicy::Random => Ok(rand::seq::index::sample(rng, confidences.len(), k).into_vec()),
        SelectionPolicy::LeastConfident | SelectionPolicy::MostConfident => {
            let mut order: Vec<usize> = (0..confidences.len()).collect();
            order.sort_by(|&a, &b| {
                let cmp = confidences[a]
                    .partial_cmp(&confidences[b])
                    .expect("finite confidences");
                let cmp = if policy == SelectionPolicy::MostConfident {
                    cmp.reverse()
                } else {
                    cmp
                };
                cmp.then(a.cmp(&b))
            });
            order.truncate(k);
            Ok(order)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn least_confident_picks_the_smallest_max_prob() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let got = select_for_labeling(&[0.9, 0.5, 0.7], 1, SelectionPolicy::LeastConfident, &mut rng)
            .unwrap();
        assert_eq!(got, vec![1]);
        let got = select_for_labeling(&[0.9, 0.5, 0.7], 1, SelectionPolicy::MostConfident, &mut rng)
            .unwrap();
        assert_eq!(got, vec![0]);
    }

    #[test]
    fn selecting_all_returns_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for policy in [
            SelectionPolicy::LeastConfident,
            SelectionPolicy::MostConfident,
            SelectionPolicy::Random,
        ] {
            let mut got = select_for_labeling(&[0.6, 0.8, 0.7], 3, policy, &mut rng).unwrap();
            got.sort_unstable();
            assert_eq!(got, vec![0, 1, 2]);
        }
    }

    #[test]
    fn selection_matches_full_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let confidences: Vec<f64> = (0..200).map(|_| rng.random_range(0.5..1.0)).collect();
        let k = 50;
        let got =
            select_for_labeling(&confidences, k, SelectionPolicy::LeastConfident, &mut rng).unwrap();
        // Brute force: annotate, sort the whole list, take k.
        let mut annotated: Vec<(f64, usize)> =
            confidences.iter().cloned().zip(0..).collect();
        annotated.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let expected: Vec<usize> = annotated[..k].iter().map(|&(_, i)| i).collect();
        assert_eq!(got, expected);
    }

    #[test]
    fn ties_break_by_candidate_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let got = select_for_labeling(
            &[0.7, 0.6, 0.6, 0.9],
            2,
            SelectionPolicy::LeastConfident,
            &mut rng,
        )
        .unwrap();
        assert_eq!(got, vec![1, 2]);
    }

    #[test]
    fn oversized_k_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(select_for_labeling(&[0.5], 2, SelectionPolicy::Random, &mut rng).is_err());
    }

    #[test]
    fn random_policy_is_seeded_and_without_replacement() {
        let confidences = vec![0.5; 100];
        let mut a = ChaCha8Rng::seed_from_u64(5);
        let mut b = ChaCha8Rng::seed_from_u64(5);
        let got_a =
            select_for_labeling(&confidences, 30, SelectionPolicy::Random, &mut a).unwrap();
        let got_b =
            select_for_labeling(&confidences, 30, SelectionPolicy::Random, &mut b).unwrap();
        assert_eq!(got_a, got_b);
        let mut dedup = got_a.clone();
        dedup.sort_unstable();
        dedup.dedup();
        assert_eq!(dedup.len(), 30);
    }

    #[test]
    fn confidence_margin_and_entropy_orderings_coincide_for_two_classes() {
        // For a two-way classifier with max-class probability p >= 0.5 the
        // least-confidence, smallest-margin, and highest-entropy orderings
        // select identical sets.
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let n = rng.random_range(5..60);
            let k = rng.random_range(1..=n);
            let p: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..1.0)).collect();
            let margins: Vec<f64> = p.iter().map(|&v| v - (1.0 - v)).collect();
            let entropies: Vec<f64> = p
                .iter()
                .map(|&v| {
                    if v <= 0.0 || v >= 1.0 {
                        0.0
                    } else {
                        -(v * v.ln() + (1.0 - v) * (1.0 - v).ln())
                    }
                })
                .collect();
            let by_conf =
                select_for_labeling(&p, k, SelectionPolicy::LeastConfident, &mut rng).unwrap();
            let by_margin =
                select_for_labeling(&margins, k, SelectionPolicy::LeastConfident, &mut rng).unwrap();
            // Highest entropy = most uncertain, so flip with MostConfident.
            let by_entropy =
                select_for_labeling(&entropies, k, SelectionPolicy::MostConfident, &mut rng)
                    .unwrap();
            let set = |mut v: Vec<usize>| {
                v.sort_unstable();
                v
            };
            assert_eq!(set(by_conf.clone()), set(by_margin));
            assert_eq!(set(by_conf), set(by_entropy));
        }
    }
}

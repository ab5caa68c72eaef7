//! Aggregation and error-probability functions `f_S(q)`.
//!
//! Both models are monotone (raising any quality never raises the error) and
//! bounded-smooth with a linear smoothness function `h`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Label, WorkerSet};

/// Largest pool for which subset enumeration is allowed.
pub const BRUTE_FORCE_CAP: usize = 20;

/// Default Hoeffding slack, valid when every quality is at least 2/3.
pub const DEFAULT_EPSILON: f64 = 1.0 / 6.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("error probability of an empty set is undefined")]
    EmptySet,
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("pool of {size} workers exceeds the brute-force cap of {cap}")]
    PoolTooLarge { size: usize, cap: usize },
    #[error("unknown error model {0:?} (expected worst_case or hoeffding)")]
    UnknownModel(String),
}

/// Majority vote over `±1` labels; ties go to [`Label::Negative`].
pub fn aggregate_majority(labels: &[Label]) -> Result<Label, ModelError> {
    if labels.is_empty() {
        return Err(ModelError::EmptySet);
    }
    let sum: i64 = labels.iter().map(|l| l.sign()).sum();
    Ok(if sum > 0 {
        Label::Positive
    } else {
        Label::Negative
    })
}

#[derive(Copy, Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ErrorModel {
    /// Probability of the most likely erroneous vote pattern, keeping only the
    /// `⌊(s+1)/2⌋` weakest workers: `∏ (1 - q_(i))`.
    WorstCase,
    /// Hoeffding-type bound `exp(-ε Σ (2q_i - 1))`.
    Hoeffding { epsilon: f64 },
}

impl ErrorModel {
    pub fn hoeffding() -> Self {
        ErrorModel::Hoeffding {
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ErrorModel::WorstCase => "worst_case",
            ErrorModel::Hoeffding { .. } => "hoeffding",
        }
    }

    /// `f_S(q)` for the workers in `subset`.
    pub fn evaluate(&self, subset: &WorkerSet, qualities: &[f64]) -> Result<f64, ModelError> {
        if subset.is_empty() {
            return Err(ModelError::EmptySet);
        }
        Ok(self.evaluate_iter(subset.iter().map(|id| qualities[id.index()])))
    }

    /// `f` over an explicit, non-empty sequence of member qualities.
    pub fn evaluate_iter<I: Iterator<Item = f64>>(&self, qualities: I) -> f64 {
        match *self {
            ErrorModel::WorstCase => {
                // Subsets up to the brute-force cap stay on the stack.
                let mut buf = [0.0f64; BRUTE_FORCE_CAP];
                let mut len = 0;
                let mut spill = Vec::new();
                for q in qualities {
                    if len < BRUTE_FORCE_CAP {
                        buf[len] = q;
                        len += 1;
                    } else {
                        if spill.is_empty() {
                            spill.extend_from_slice(&buf);
                        }
                        spill.push(q);
                    }
                }
                let qs: &mut [f64] = if spill.is_empty() {
                    &mut buf[..len]
                } else {
                    &mut spill
                };
                debug_assert!(!qs.is_empty());
                qs.sort_unstable_by(f64::total_cmp);
                let kept = qs.len().div_ceil(2);
                qs[..kept].iter().map(|q| 1.0 - q).product()
            }
            ErrorModel::Hoeffding { epsilon } => {
                let weight: f64 = qualities.map(|q| 2.0 * q - 1.0).sum();
                (-weight * epsilon).exp()
            }
        }
    }

    /// `f_S(q) < α`; the empty set never satisfies the constraint.
    pub fn satisfies(&self, subset: &WorkerSet, qualities: &[f64], alpha: f64) -> bool {
        !subset.is_empty()
            && self.evaluate_iter(subset.iter().map(|id| qualities[id.index()])) < alpha
    }

    /// Linear smoothness bound `h(δ)` for a pool of `pool_size` workers.
    pub fn smoothness_h(&self, delta: f64, pool_size: usize) -> Result<f64, ModelError> {
        if !(delta > 0.0) {
            return Err(ModelError::NonPositiveArgument(delta));
        }
        Ok(self.lipschitz(pool_size) * delta)
    }

    pub fn smoothness_h_inv(&self, big_delta: f64, pool_size: usize) -> Result<f64, ModelError> {
        if !(big_delta > 0.0) {
            return Err(ModelError::NonPositiveArgument(big_delta));
        }
        Ok(big_delta / self.lipschitz(pool_size))
    }

    fn lipschitz(&self, pool_size: usize) -> f64 {
        let n = pool_size as f64;
        match *self {
            // At most n factors in [0,1], each moving by at most δ.
            ErrorModel::WorstCase => n,
            // Exponent is 2ε-Lipschitz per coordinate; exp is 1-Lipschitz on (-∞, 0].
            ErrorModel::Hoeffding { epsilon } => 2.0 * epsilon * n,
        }
    }

    /// Knapsack demand `M` such that `f_S(q) ≤ α ⇔ Σ (2q_i - 1) ≥ M`.
    /// Only the Hoeffding model has this form.
    pub fn knapsack_demand(&self, alpha: f64) -> Option<f64> {
        match *self {
            ErrorModel::WorstCase => None,
            ErrorModel::Hoeffding { epsilon } => Some((1.0 / alpha).ln() / epsilon),
        }
    }
}

impl fmt::Display for ErrorModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ErrorModel::WorstCase => f.write_str("worst_case"),
            ErrorModel::Hoeffding { epsilon } => write!(f, "hoeffding(epsilon={epsilon})"),
        }
    }
}

impl FromStr for ErrorModel {
    type Err = ModelError;

    /// `worst_case`, `hoeffding` or `hoeffding:<epsilon>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.split_once(':') {
            None if s == "worst_case" => Ok(ErrorModel::WorstCase),
            None if s == "hoeffding" => Ok(ErrorModel::hoeffding()),
            Some(("hoeffding", eps)) => match eps.parse::<f64>() {
                Ok(epsilon) if epsilon > 0.0 => Ok(ErrorModel::Hoeffding { epsilon }),
                _ => Err(ModelError::UnknownModel(s.to_string())),
            },
            _ => Err(ModelError::UnknownModel(s.to_string())),
        }
    }
}

/// Exact error probability of the majority vote for independent workers,
/// with ties resolved to negative. A diagnostic: the constraint itself is
/// always stated through an [`ErrorModel`].
pub fn majority_error_probability<I: IntoIterator<Item = f64>>(
    qualities: I,
    prior_positive: f64,
) -> f64 {
    // dist[k] = P(k correct votes so far).
    let mut dist = vec![1.0];
    for q in qualities {
        let mut next = vec![0.0; dist.len() + 1];
        for (k, p) in dist.iter().enumerate() {
            next[k] += p * (1.0 - q);
            next[k + 1] += p * q;
        }
        dist = next;
    }
    let s = dist.len() - 1;
    let at_most_half: f64 = dist.iter().take(s / 2 + 1).sum();
    let below_half: f64 = dist.iter().take(s.div_ceil(2)).sum();
    prior_positive * at_most_half + (1.0 - prior_positive) * below_half
}

/// Distance of the closest subset error probability from the threshold.
#[derive(Clone, Debug, PartialEq)]
pub struct DeltaSeparation {
    pub delta: f64,
    pub closest: WorkerSet,
}

/// Gaps at or below this are rounding noise and reported as zero.
pub const DELTA_TIE_TOLERANCE: f64 = 1e-12;

/// `Δ = min over non-empty S of |f_S(q) - α|`, by enumeration.
pub fn compute_delta_separation(
    model: &ErrorModel,
    qualities: &[f64],
    alpha: f64,
) -> Result<DeltaSeparation, ModelError> {
    let n = qualities.len();
    if n > BRUTE_FORCE_CAP {
        return Err(ModelError::PoolTooLarge {
            size: n,
            cap: BRUTE_FORCE_CAP,
        });
    }
    if n == 0 {
        return Err(ModelError::EmptySet);
    }
    let mut best = (f64::INFINITY, 0u32);
    for mask in 1u32..(1 << n) {
        let f = model.evaluate_iter(members(mask, n).map(|i| qualities[i]));
        let gap = (f - alpha).abs();
        if gap < best.0 {
            best = (gap, mask);
        }
    }
    Ok(DeltaSeparation {
        delta: if best.0 <= DELTA_TIE_TOLERANCE {
            0.0
        } else {
            best.0
        },
        closest: WorkerSet::from_indices(members(best.1, n)),
    })
}

pub(crate) fn members(mask: u32, n: usize) -> impl Iterator<Item = usize> {
    (0..n).filter(move |i| mask & (1 << i) != 0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use Label::{Negative as N, Positive as P};

    fn all(n: usize) -> WorkerSet {
        WorkerSet::full(n)
    }

    #[test]
    fn majority_vote() {
        assert_eq!(aggregate_majority(&[P, P, N]).unwrap(), P);
        assert_eq!(aggregate_majority(&[N, N, N]).unwrap(), N);
        assert_eq!(aggregate_majority(&[P, N]).unwrap(), N);
        assert_eq!(aggregate_majority(&[]), Err(ModelError::EmptySet));
    }

    #[test]
    fn worst_case_hand_values() {
        let m = ErrorModel::WorstCase;
        assert!((m.evaluate(&all(1), &[0.8]).unwrap() - 0.2).abs() < 1e-12);
        let v = m.evaluate(&all(3), &[0.9, 0.6, 0.7]).unwrap();
        assert!((v - 0.12).abs() < 1e-12);
        assert_eq!(m.evaluate(&all(3), &[1.0, 1.0, 1.0]).unwrap(), 0.0);
        assert_eq!(
            m.evaluate(&WorkerSet::new(), &[0.9]),
            Err(ModelError::EmptySet)
        );
    }

    #[test]
    fn hoeffding_hand_values() {
        let m = ErrorModel::hoeffding();
        assert_eq!(m.evaluate(&all(1), &[0.5]).unwrap(), 1.0);
        let v = m.evaluate(&all(1), &[2.0 / 3.0]).unwrap();
        assert!((v - (-1.0f64 / 18.0).exp()).abs() < 1e-12);
        assert!((v - 0.9460).abs() < 1e-4);
        let v = m.evaluate(&all(3), &[2.0 / 3.0; 3]).unwrap();
        assert!((v - (-1.0f64 / 6.0).exp()).abs() < 1e-12);
        assert!((v - 0.8465).abs() < 1e-4);
    }

    #[test]
    fn smoothness_examples() {
        let wc = ErrorModel::WorstCase;
        assert!((wc.smoothness_h(0.05, 4).unwrap() - 0.20).abs() < 1e-12);
        let hf = ErrorModel::hoeffding();
        assert!((hf.smoothness_h_inv(0.1, 3).unwrap() - 0.1).abs() < 1e-12);
        assert!(matches!(
            wc.smoothness_h(0.0, 4),
            Err(ModelError::NonPositiveArgument(_))
        ));
        assert!(hf.smoothness_h_inv(-1.0, 3).is_err());
    }

    #[test]
    fn worst_case_smoothness_holds_on_random_pairs() {
        // Oracle: largest observed |f(q) - f(q')| over random pairs at a fixed gap.
        let n = 4;
        let delta = 0.05;
        let h = ErrorModel::WorstCase.smoothness_h(delta, n).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut worst: f64 = 0.0;
        for _ in 0..100_000 {
            let q: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..=1.0)).collect();
            let qp: Vec<f64> = q
                .iter()
                .map(|x| (x + rng.random_range(-delta..=delta)).clamp(0.5, 1.0))
                .collect();
            let mask = rng.random_range(1u32..16);
            let s = WorkerSet::from_indices(members(mask, n));
            let m = ErrorModel::WorstCase;
            let gap = (m.evaluate(&s, &q).unwrap() - m.evaluate(&s, &qp).unwrap()).abs();
            worst = worst.max(gap);
        }
        assert!(worst <= h, "observed {worst} > h = {h}");
    }

    #[test]
    fn delta_separation_brute_force_example() {
        let d = compute_delta_separation(&ErrorModel::WorstCase, &[0.8, 0.9], 0.15).unwrap();
        assert!((d.delta - 0.05).abs() < 1e-12);
    }

    #[test]
    fn delta_separation_one_sided_and_boundary() {
        let q = [0.8, 0.9];
        let d = compute_delta_separation(&ErrorModel::WorstCase, &q, 0.01).unwrap();
        assert!((d.delta - (0.1 - 0.01)).abs() < 1e-12);
        assert_eq!(d.closest, WorkerSet::from_indices([1]));
        // f_{w2} = 0.1 exactly hits the threshold.
        let q = [0.75, 0.5];
        let d = compute_delta_separation(&ErrorModel::WorstCase, &q, 0.25).unwrap();
        assert_eq!(d.delta, 0.0);
    }

    #[test]
    fn delta_separation_rejects_large_pools() {
        let q = vec![0.7; 21];
        assert!(matches!(
            compute_delta_separation(&ErrorModel::WorstCase, &q, 0.1),
            Err(ModelError::PoolTooLarge { size: 21, .. })
        ));
    }

    #[test]
    fn knapsack_demand_matches_six_log() {
        let m = ErrorModel::hoeffding();
        let demand = m.knapsack_demand(0.1).unwrap();
        assert!((demand - 6.0 * 10f64.ln()).abs() < 1e-12);
        assert_eq!(ErrorModel::WorstCase.knapsack_demand(0.1), None);
    }

    #[test]
    fn parse_model_names() {
        assert_eq!(
            "worst_case".parse::<ErrorModel>().unwrap(),
            ErrorModel::WorstCase
        );
        assert_eq!(
            "hoeffding".parse::<ErrorModel>().unwrap(),
            ErrorModel::hoeffding()
        );
        assert_eq!(
            "hoeffding:0.25".parse::<ErrorModel>().unwrap(),
            ErrorModel::Hoeffding { epsilon: 0.25 }
        );
        assert!("majority".parse::<ErrorModel>().is_err());
        assert!("hoeffding:-1".parse::<ErrorModel>().is_err());
    }

    #[test]
    fn majority_error_matches_enumeration() {
        let q = [0.9, 0.6, 0.7, 0.8];
        for prior in [0.5, 0.3] {
            let mut expected = 0.0;
            for truth in [P, N] {
                let p_truth = if truth == P { prior } else { 1.0 - prior };
                for mask in 0u32..16 {
                    let mut p = p_truth;
                    let mut votes = Vec::new();
                    for (i, qi) in q.iter().enumerate() {
                        if mask & (1 << i) != 0 {
                            p *= qi;
                            votes.push(truth);
                        } else {
                            p *= 1.0 - qi;
                            votes.push(truth.flipped());
                        }
                    }
                    if aggregate_majority(&votes).unwrap() != truth {
                        expected += p;
                    }
                }
            }
            let got = majority_error_probability(q, prior);
            assert!((got - expected).abs() < 1e-12, "{got} vs {expected}");
        }
        assert!((majority_error_probability([0.8], 0.5) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn satisfies_is_strict() {
        let m = ErrorModel::WorstCase;
        let s = WorkerSet::from_indices([0]);
        assert!(!m.satisfies(&s, &[0.75], 0.25));
        assert!(m.satisfies(&s, &[0.76], 0.25));
        assert!(!m.satisfies(&WorkerSet::new(), &[0.99], 0.5));
    }
}

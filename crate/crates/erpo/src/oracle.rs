//! Independent brute-force ground truth: exact enumeration, exact
//! distributions and expectations, finite-difference gradients.
//!
//! Nothing here shares a code path with the engine or the algorithm presets:
//! sequence probabilities are recomputed from raw logits with a separate
//! softmax routine, sums run in probability space with compensated summation
//! (reverse iteration order) for small spaces and in log space above, and no
//! oracle function accepts a random number generator.

use serde::{Deserialize, Serialize};

use crate::engine::VariationalDistribution;
use crate::error::{ErpoError, Result};
use crate::logmath::LogWeight;
use crate::policy::{Gradient, Policy};
use crate::rewards::RewardSpec;
use crate::types::{Example, Sequence, Vocab};

/// All `V^L` sequences of a fixed length in lexicographic order.
#[derive(Clone, Debug)]
pub struct EnumeratedSpace {
    pub vocab: Vocab,
    pub len: usize,
    pub sequences: Vec<Sequence>,
}

pub const DEFAULT_BUDGET: u64 = 1_000_000;

/// Full lexicographic enumeration, guarded by a budget on `V^L`.
pub fn enumerate_space(vocab: Vocab, len: usize, budget: u64) -> Result<EnumeratedSpace> {
    let count = (vocab.size() as u128).pow(len as u32);
    if count > budget as u128 {
        return Err(ErpoError::BudgetExceeded {
            requested: count,
            budget,
        });
    }
    let mut sequences = Vec::with_capacity(count as usize);
    if len == 0 {
        sequences.push(Sequence::empty());
    } else {
        let mut digits = vec![0usize; len];
        loop {
            sequences.push(Sequence::new(digits.clone()));
            let mut carried = false;
            for d in digits.iter_mut().rev() {
                *d += 1;
                if *d < vocab.size() {
                    carried = true;
                    break;
                }
                *d = 0;
            }
            if !carried {
                break;
            }
        }
    }
    Ok(EnumeratedSpace {
        vocab,
        len,
        sequences,
    })
}

impl EnumeratedSpace {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    /// Lexicographic rank of a sequence in this space.
    pub fn rank(&self, y: &Sequence) -> usize {
        let mut idx = 0usize;
        for &t in y.iter() {
            idx = idx * self.vocab.size() + t;
        }
        idx
    }
}

/// Kahan compensated sum.
fn kahan_sum<I: Iterator<Item = f64>>(values: I) -> f64 {
    let mut sum = 0.0;
    let mut c = 0.0;
    for v in values {
        let y = v - c;
        let t = sum + y;
        c = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Oracle-side softmax of a logit row, in probability space.
fn row_probs(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = row.iter().map(|&x| (x - max).exp()).collect();
    let z = kahan_sum(exps.iter().rev().cloned());
    exps.iter().map(|&e| e / z).collect()
}

/// Oracle-side sequence probability: product of per-step conditional
/// probabilities recomputed from raw logits.
pub fn seq_prob(policy: &Policy, y: &[usize]) -> f64 {
    let mut p = 1.0;
    for t in 0..y.len() {
        let row = policy.context_row(&y[..t]);
        let v = policy.vocab().size();
        let logits = &policy.logits()[row * v..(row + 1) * v];
        p *= row_probs(logits)[y[t]];
    }
    p
}

fn seq_log_prob(policy: &Policy, y: &[usize]) -> f64 {
    let mut lp = 0.0;
    for t in 0..y.len() {
        let row = policy.context_row(&y[..t]);
        let v = policy.vocab().size();
        let logits = &policy.logits()[row * v..(row + 1) * v];
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let z = kahan_sum(logits.iter().rev().map(|&x| (x - max).exp()));
        lp += logits[y[t]] - max - z.ln();
    }
    lp
}

/// Spaces at or below this size use direct probability-space evaluation;
/// larger spaces switch to log space.
const PROB_SPACE_LIMIT: usize = 10_000;

/// Independent re-derivation of the closed-form E-step: direct evaluation of
/// `exp((alpha log p + R) / (alpha + beta))` per sequence, normalized with a
/// different summation order than the engine's implementation.
pub fn oracle_q(
    policy: &Policy,
    reward: &RewardSpec,
    alpha: f64,
    beta: f64,
    y_star: &Example,
    space: &EnumeratedSpace,
) -> Result<VariationalDistribution> {
    assert!(alpha + beta > 0.0, "alpha + beta must be positive");
    let reference = y_star.target.as_slice();
    let scale = 1.0 / (alpha + beta);
    let n = space.len();
    if n <= PROB_SPACE_LIMIT {
        let weights: Vec<f64> = space
            .sequences
            .iter()
            .map(|y| {
                let lp = seq_log_prob(policy, y.as_slice());
                let r = reward.total(y.as_slice(), reference).value();
                ((alpha * lp + r) * scale).exp()
            })
            .collect();
        let z = kahan_sum(weights.iter().rev().cloned());
        if z == 0.0 {
            return Err(ErpoError::EmptySupport);
        }
        let log_q = weights
            .iter()
            .map(|&w| LogWeight::new((w / z).ln()))
            .collect();
        Ok(VariationalDistribution {
            support: space.sequences.clone(),
            log_q,
        })
    } else {
        let logs: Vec<f64> = space
            .sequences
            .iter()
            .map(|y| {
                let lp = seq_log_prob(policy, y.as_slice());
                let r = reward.total(y.as_slice(), reference).value();
                (alpha * lp + r) * scale
            })
            .collect();
        let max = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(ErpoError::EmptySupport);
        }
        let z = kahan_sum(logs.iter().rev().map(|&l| (l - max).exp()));
        let log_z = max + z.ln();
        let log_q = logs
            .iter()
            .map(|&l| {
                if l == f64::NEG_INFINITY {
                    LogWeight::NEG_INFINITY
                } else {
                    LogWeight::new(l - log_z)
                }
            })
            .collect();
        Ok(VariationalDistribution {
            support: space.sequences.clone(),
            log_q,
        })
    }
}

/// Which exact distribution weights an expectation.
pub enum DistributionRef<'a> {
    Policy(&'a Policy),
    Variational(&'a VariationalDistribution),
}

/// Exact expectation `E[f(y)]` over the enumerated space under the given
/// distribution, with compensated summation. Never samples.
pub fn oracle_expected<F>(dist: DistributionRef<'_>, f: F, space: &EnumeratedSpace) -> f64
where
    F: Fn(&Sequence) -> f64,
{
    match dist {
        DistributionRef::Policy(policy) => kahan_sum(
            space
                .sequences
                .iter()
                .map(|y| seq_prob(policy, y.as_slice()) * f(y)),
        ),
        DistributionRef::Variational(q) => {
            assert_eq!(q.support.len(), space.len(), "support/space mismatch");
            kahan_sum(
                q.support
                    .iter()
                    .zip(&q.log_q)
                    .filter(|(_, lq)| lq.is_finite())
                    .map(|(y, lq)| lq.exp() * f(y)),
            )
        }
    }
}

/// Central finite differences of a scalar function of the policy, one entry
/// per logit.
pub fn finite_diff_grad<F>(f: F, policy: &Policy, h: f64) -> Gradient
where
    F: Fn(&Policy) -> f64,
{
    assert!(h > 0.0, "step size must be positive");
    let mut grad = Gradient::zeros_like(policy);
    let mut work = policy.clone();
    let n = policy.logits().len();
    let mut values = vec![0.0; n];
    for i in 0..n {
        let orig = policy.logits()[i];
        work.logits_mut()[i] = orig + h;
        let plus = f(&work);
        work.logits_mut()[i] = orig - h;
        let minus = f(&work);
        work.logits_mut()[i] = orig;
        values[i] = (plus - minus) / (2.0 * h);
    }
    grad.copy_from(&values);
    grad
}

/// One verification record: what was checked, at what tolerance, how far off
/// the worst instance was.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OracleReport {
    pub check: String,
    pub instances: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_deviation: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl OracleReport {
    pub fn new(check: &str, instances: usize, seed: u64, tolerance: f64, max_deviation: f64) -> Self {
        OracleReport {
            check: check.to_string(),
            instances,
            seed,
            tolerance,
            max_deviation,
            passed: max_deviation <= tolerance,
            note: None,
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = Some(note.into());
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{exact_q, ErpoConfig};
    use crate::policy::{init_policy, PolicyInit};
    use crate::rng::SplitRng;
    use approx::assert_abs_diff_eq;

    fn random_policy(v: usize, k: usize, len: usize, seed: u64) -> Policy {
        let mut rng = SplitRng::seed_from_u64(seed);
        init_policy(
            Vocab::new(v).unwrap(),
            k,
            len,
            PolicyInit::Gaussian { sigma: 1.0 },
            &mut rng,
        )
    }

    fn uniform_policy(v: usize, len: usize) -> Policy {
        let mut rng = SplitRng::seed_from_u64(0);
        init_policy(Vocab::new(v).unwrap(), 1, len, PolicyInit::Uniform, &mut rng)
    }

    fn example(tokens: &[usize]) -> Example {
        Example::new(Sequence::new(tokens.to_vec())).unwrap()
    }

    #[test]
    fn enumeration_counts_and_order() {
        let s = enumerate_space(Vocab::new(2).unwrap(), 3, DEFAULT_BUDGET).unwrap();
        assert_eq!(s.len(), 8);
        assert_eq!(s.sequences[0].as_slice(), [0, 0, 0]);
        assert_eq!(s.sequences[7].as_slice(), [1, 1, 1]);

        let single = enumerate_space(Vocab::new(1).unwrap(), 5, DEFAULT_BUDGET).unwrap();
        assert_eq!(single.len(), 1);

        let s34 = enumerate_space(Vocab::new(3).unwrap(), 4, DEFAULT_BUDGET).unwrap();
        assert_eq!(s34.len(), 81);
    }

    #[test]
    fn enumeration_budget_enforced() {
        assert!(matches!(
            enumerate_space(Vocab::new(10).unwrap(), 7, 1_000_000),
            Err(ErpoError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn rank_is_lexicographic_index() {
        let s = enumerate_space(Vocab::new(3).unwrap(), 3, DEFAULT_BUDGET).unwrap();
        for (i, y) in s.sequences.iter().enumerate() {
            assert_eq!(s.rank(y), i);
        }
    }

    #[test]
    fn oracle_q_agrees_with_engine_on_random_instances() {
        for seed in 0..100 {
            let v = 2 + (seed % 3) as usize; // V in 2..=4
            let l = 2 + (seed % 2) as usize;
            let policy = random_policy(v, 1, l, 1000 + seed);
            let y_star = example(&vec![0usize; l]);
            let (alpha, beta) = match seed % 4 {
                0 => (0.0, 1.0),
                1 => (1.0, 0.0),
                2 => (0.5, 0.5),
                _ => (2.0, 0.7),
            };
            let config = ErpoConfig::new(RewardSpec::Hamming, alpha, beta);
            let engine_q = exact_q(&policy, &config, &y_star).unwrap();
            let space = enumerate_space(policy.vocab(), l, DEFAULT_BUDGET).unwrap();
            let oq = oracle_q(&policy, &RewardSpec::Hamming, alpha, beta, &y_star, &space).unwrap();
            for (a, b) in engine_q.log_q.iter().zip(&oq.log_q) {
                assert!((a.exp() - b.exp()).abs() < 1e-10, "seed {seed}");
            }
        }
    }

    #[test]
    fn oracle_q_hand_enumerated_hamming_instance() {
        // V=2, L=2, uniform policy, alpha=0, beta=1, y*=[0,0]:
        // q is proportional to (e^1, e^0.5, e^0.5, e^0), so
        // q(y*) = e / (e + 2 sqrt(e) + 1).
        let policy = uniform_policy(2, 2);
        let y_star = example(&[0, 0]);
        let space = enumerate_space(policy.vocab(), 2, DEFAULT_BUDGET).unwrap();
        let q = oracle_q(&policy, &RewardSpec::Hamming, 0.0, 1.0, &y_star, &space).unwrap();
        let e = 1.0f64.exp();
        let expected = e / (e + 2.0 * e.sqrt() + 1.0);
        assert_abs_diff_eq!(q.prob(0), expected, epsilon = 1e-12);
        assert_abs_diff_eq!(q.prob(0), 0.38745561900026, epsilon = 1e-12);
    }

    #[test]
    fn oracle_q_matches_tempered_power_law() {
        // q(y) proportional to p(y)^(alpha/(alpha+beta)) * exp(R/(alpha+beta)),
        // so a constant reward cancels and beta = 0 recovers p * e^R / Z.
        let policy = random_policy(2, 1, 3, 77);
        let y_star = example(&[0, 0, 0]);
        let space = enumerate_space(policy.vocab(), 3, DEFAULT_BUDGET).unwrap();
        for (alpha, beta) in [(1.0, 1.0), (1.0, 0.0), (3.0, 0.5)] {
            let q =
                oracle_q(&policy, &RewardSpec::Hamming, alpha, beta, &y_star, &space).unwrap();
            let temper = alpha / (alpha + beta);
            let mut weights: Vec<f64> = space
                .sequences
                .iter()
                .map(|y| {
                    let p = seq_prob(&policy, y.as_slice());
                    let r = RewardSpec::Hamming.total(y.as_slice(), &[0, 0, 0]).value();
                    p.powf(temper) * (r / (alpha + beta)).exp()
                })
                .collect();
            let z: f64 = weights.iter().sum();
            for w in weights.iter_mut() {
                *w /= z;
            }
            for (i, w) in weights.iter().enumerate() {
                assert_abs_diff_eq!(q.prob(i), *w, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn expected_of_one_is_one() {
        let policy = random_policy(3, 1, 3, 21);
        let space = enumerate_space(policy.vocab(), 3, DEFAULT_BUDGET).unwrap();
        let total = oracle_expected(DistributionRef::Policy(&policy), |_| 1.0, &space);
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn expected_hamming_under_uniform_policy() {
        let policy = uniform_policy(2, 2);
        let space = enumerate_space(policy.vocab(), 2, DEFAULT_BUDGET).unwrap();
        let y_star = [0usize, 1];
        let mean = oracle_expected(
            DistributionRef::Policy(&policy),
            |y| RewardSpec::Hamming.total(y.as_slice(), &y_star).value(),
            &space,
        );
        assert_abs_diff_eq!(mean, 0.5, epsilon = 1e-12);
    }

    #[test]
    fn entropy_of_uniform_is_l_log_v() {
        let policy = uniform_policy(3, 4);
        let space = enumerate_space(policy.vocab(), 4, DEFAULT_BUDGET).unwrap();
        let h = oracle_expected(
            DistributionRef::Policy(&policy),
            |y| -seq_log_prob(&policy, y.as_slice()),
            &space,
        );
        assert_abs_diff_eq!(h, 4.0 * 3.0f64.ln(), epsilon = 1e-10);
    }

    #[test]
    fn finite_diff_matches_analytic_log_prob_gradient() {
        let policy = random_policy(3, 1, 3, 33);
        let y = [1usize, 0, 2];
        let analytic = policy.grad_log_prob(&y).unwrap();
        let fd = finite_diff_grad(
            |p| p.log_prob_seq(&y).unwrap().value(),
            &policy,
            1e-5,
        );
        for (a, b) in analytic.values().iter().zip(fd.values()) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn finite_diff_of_constant_is_zero() {
        let policy = random_policy(2, 1, 2, 34);
        let fd = finite_diff_grad(|_| 42.0, &policy, 1e-5);
        assert!(fd.max_abs() < 1e-9);
    }

    #[test]
    fn report_serializes_to_json() {
        let r = OracleReport::new("demo", 10, 7, 1e-6, 5e-7);
        assert!(r.passed);
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"check\":\"demo\""));
    }
}

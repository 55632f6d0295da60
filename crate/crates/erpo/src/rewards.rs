//! Reward functions with whole-sequence and token-incremental forms.
//!
//! Every reward kind evaluates both on full sequences and on prefixes; the
//! per-token increment is the difference of consecutive prefix values, so the
//! increments always telescope back to the prefix value at full length. The
//! prefix value of the empty sequence is 0 for every kind.
//!
//! Extended-real conventions: `-inf + finite = -inf`, `-inf - (-inf) := -inf`,
//! and a finite value appearing after a `-inf` prefix is a contract violation
//! ("reward resurrection").

use serde::{Deserialize, Serialize};

use crate::error::{ErpoError, Result};
use crate::logmath::LogWeight;
use crate::types::{Example, Sequence, TokenId};

/// A reward function `R(y|y*)`, serializable as a config value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RewardSpec {
    /// 1 when `y = y*`, `-inf` otherwise.
    Delta,
    /// Position-match fraction with a length-gap penalty.
    Hamming,
    /// Smoothed clipped n-gram precision with a brevity factor.
    NgramMatch { n: usize },
    /// Log-likelihood of `y` under per-token unigram replacement noise.
    UnigramNoise { gamma: f64, u: Vec<f64> },
    /// 1 when exactly one token differs (equal lengths), `-inf` otherwise.
    SingleTokenRelaxedDelta,
    /// `lambda * R_comm + (1 - lambda) * R_delta`, with `0 * -inf := 0`.
    Interpolated { lambda: f64, comm: Box<RewardSpec> },
}

impl RewardSpec {
    /// Validates kind parameters against a vocabulary size.
    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        match self {
            RewardSpec::Delta | RewardSpec::Hamming | RewardSpec::SingleTokenRelaxedDelta => Ok(()),
            RewardSpec::NgramMatch { n } => {
                if *n < 1 {
                    return Err(ErpoError::InvalidConfig("ngram order must be >= 1".into()));
                }
                Ok(())
            }
            RewardSpec::UnigramNoise { gamma, u } => {
                if !(0.0..=1.0).contains(gamma) {
                    return Err(ErpoError::InvalidConfig(format!(
                        "gamma must lie in [0,1], got {gamma}"
                    )));
                }
                if u.len() != vocab_size {
                    return Err(ErpoError::InvalidConfig(format!(
                        "unigram distribution has {} entries for vocab of size {vocab_size}",
                        u.len()
                    )));
                }
                if u.iter().any(|&p| p < 0.0 || !p.is_finite()) {
                    return Err(ErpoError::InvalidConfig(
                        "unigram distribution entries must be finite and >= 0".into(),
                    ));
                }
                let total: f64 = u.iter().sum();
                if (total - 1.0).abs() > 1e-12 {
                    return Err(ErpoError::InvalidConfig(format!(
                        "unigram distribution sums to {total}, expected 1"
                    )));
                }
                Ok(())
            }
            RewardSpec::Interpolated { lambda, comm } => {
                if !(0.0..=1.0).contains(lambda) {
                    return Err(ErpoError::InvalidConfig(format!(
                        "lambda must lie in [0,1], got {lambda}"
                    )));
                }
                comm.validate(vocab_size)
            }
        }
    }

    /// Whole-sequence reward `R(y|y*)`.
    pub fn total(&self, y: &[TokenId], y_star: &[TokenId]) -> LogWeight {
        match self {
            RewardSpec::Delta => delta_reward(y, y_star),
            RewardSpec::Hamming => hamming_reward(y, y_star),
            RewardSpec::NgramMatch { n } => ngram_match_reward(y, y_star, *n),
            RewardSpec::UnigramNoise { gamma, u } => unigram_noise_reward(y, y_star, *gamma, u),
            RewardSpec::SingleTokenRelaxedDelta => single_token_relaxed_delta(y, y_star),
            RewardSpec::Interpolated { lambda, comm } => {
                let delta = delta_prefix_value(y, y_star);
                comm.total(y, y_star)
                    .scale(*lambda)
                    .add_weighted(delta, 1.0 - *lambda)
            }
        }
    }

    /// Prefix reward `R(y_{1:t}|y*)`, the function whose consecutive
    /// differences define the per-token increments. The empty prefix maps
    /// to 0 for every kind.
    pub fn prefix(&self, prefix: &[TokenId], y_star: &[TokenId]) -> LogWeight {
        match self {
            RewardSpec::Delta => delta_prefix_value(prefix, y_star),
            RewardSpec::Hamming => hamming_prefix_value(prefix, y_star),
            RewardSpec::NgramMatch { n } => ngram_match_reward(prefix, y_star, *n),
            RewardSpec::UnigramNoise { gamma, u } => {
                unigram_noise_prefix_value(prefix, y_star, *gamma, u)
            }
            RewardSpec::SingleTokenRelaxedDelta => single_token_prefix_value(prefix, y_star),
            RewardSpec::Interpolated { lambda, comm } => {
                let delta = delta_prefix_value(prefix, y_star);
                comm.prefix(prefix, y_star)
                    .scale(*lambda)
                    .add_weighted(delta, 1.0 - *lambda)
            }
        }
    }
}

impl LogWeight {
    /// `self + factor * other` under the `0 * -inf := 0` convention.
    fn add_weighted(self, other: LogWeight, factor: f64) -> LogWeight {
        self + other.scale(factor)
    }
}

/// Positions where `y` and `y*` disagree. Defined only for equal lengths.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenDiff {
    positions: Vec<usize>,
}

impl TokenDiff {
    pub fn new(y: &[TokenId], y_star: &[TokenId]) -> Result<Self> {
        if y.len() != y_star.len() {
            return Err(ErpoError::LengthMismatch {
                got: y.len(),
                expected: y_star.len(),
            });
        }
        Ok(TokenDiff {
            positions: y
                .iter()
                .zip(y_star)
                .enumerate()
                .filter(|(_, (a, b))| a != b)
                .map(|(i, _)| i)
                .collect(),
        })
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn size(&self) -> usize {
        self.positions.len()
    }
}

/// 1 if `y = y*` elementwise (including equal length), `-inf` otherwise.
pub fn delta_reward(y: &[TokenId], y_star: &[TokenId]) -> LogWeight {
    if y == y_star {
        LogWeight::new(1.0)
    } else {
        LogWeight::NEG_INFINITY
    }
}

/// Token-level delta reward: `t/T*` when the prefix equals `y*_{1:t}`,
/// `-inf` otherwise (including prefixes longer than `y*`).
pub fn delta_prefix_reward(prefix: &[TokenId], y_star: &Example) -> LogWeight {
    delta_prefix_value(prefix, y_star.target.as_slice())
}

fn delta_prefix_value(prefix: &[TokenId], y_star: &[TokenId]) -> LogWeight {
    if y_star.is_empty() {
        return if prefix.is_empty() {
            LogWeight::ZERO
        } else {
            LogWeight::NEG_INFINITY
        };
    }
    let t = prefix.len();
    if t <= y_star.len() && prefix == &y_star[..t] {
        LogWeight::new(t as f64 / y_star.len() as f64)
    } else {
        LogWeight::NEG_INFINITY
    }
}

/// Match fraction for equal lengths; for unequal lengths, match fraction on
/// the overlap minus the length-gap fraction, both over `max(T, T*)`. Always
/// finite, never below -1.
pub fn hamming_reward(y: &[TokenId], y_star: &[TokenId]) -> LogWeight {
    let (t, t_star) = (y.len(), y_star.len());
    if t == t_star {
        if t == 0 {
            return LogWeight::new(1.0); // empty equals empty
        }
        let matches = y.iter().zip(y_star).filter(|(a, b)| a == b).count();
        return LogWeight::new(matches as f64 / t_star as f64);
    }
    let longest = t.max(t_star) as f64;
    let overlap = t.min(t_star);
    let matches = y[..overlap]
        .iter()
        .zip(&y_star[..overlap])
        .filter(|(a, b)| a == b)
        .count();
    let gap = (t as isize - t_star as isize).unsigned_abs() as f64;
    LogWeight::new(((matches as f64 - gap) / longest).max(-1.0))
}

/// Prefix form of the hamming reward: matches against `y*_{1:t}` scaled by
/// the full `T*` while `t <= T*`, with the overlength penalty applied once
/// the prefix outgrows `y*`. Coincides with `hamming_reward` at `t = T*`.
fn hamming_prefix_value(prefix: &[TokenId], y_star: &[TokenId]) -> LogWeight {
    let (t, t_star) = (prefix.len(), y_star.len());
    if t.max(t_star) == 0 {
        return LogWeight::ZERO;
    }
    let overlap = t.min(t_star);
    let matches = prefix[..overlap]
        .iter()
        .zip(&y_star[..overlap])
        .filter(|(a, b)| a == b)
        .count() as f64;
    let over = t.saturating_sub(t_star) as f64;
    LogWeight::new(((matches - over) / t.max(t_star) as f64).max(-1.0))
}

/// Geometric mean over k = 1..=n of clipped k-gram precision against `y*`,
/// with zero precisions smoothed to `1/(2T)`, times a brevity factor
/// `min(1, T/T*)`. Orders longer than `y` are skipped.
pub fn ngram_match_reward(y: &[TokenId], y_star: &[TokenId], n: usize) -> LogWeight {
    assert!(n >= 1, "ngram order must be >= 1");
    let t = y.len();
    let t_star = y_star.len();
    assert!(t_star > 0, "reference must be non-empty");
    let brevity = 1.0f64.min(t as f64 / t_star as f64);
    if t == 0 {
        return LogWeight::new(0.0);
    }
    let max_order = n.min(t);
    let mut log_sum = 0.0;
    for k in 1..=max_order {
        let p = clipped_precision(y, y_star, k);
        let p = if p == 0.0 { 1.0 / (2.0 * t as f64) } else { p };
        log_sum += p.ln();
    }
    let geo = (log_sum / max_order as f64).exp();
    LogWeight::new(geo * brevity)
}

fn clipped_precision(y: &[TokenId], y_star: &[TokenId], k: usize) -> f64 {
    use std::collections::HashMap;
    let total = y.len() + 1 - k;
    let mut ref_counts: HashMap<&[TokenId], usize> = HashMap::new();
    if y_star.len() >= k {
        for g in y_star.windows(k) {
            *ref_counts.entry(g).or_insert(0) += 1;
        }
    }
    let mut cand_counts: HashMap<&[TokenId], usize> = HashMap::new();
    for g in y.windows(k) {
        *cand_counts.entry(g).or_insert(0) += 1;
    }
    let clipped: usize = cand_counts
        .iter()
        .map(|(g, &c)| c.min(*ref_counts.get(g).unwrap_or(&0)))
        .sum();
    clipped as f64 / total as f64
}

/// `log(gamma^|D| (1-gamma)^(T-|D|) prod_{t in D} u(y_t))` for equal lengths,
/// `-inf` otherwise, where `D` is the set of differing positions.
pub fn unigram_noise_reward(y: &[TokenId], y_star: &[TokenId], gamma: f64, u: &[f64]) -> LogWeight {
    if y.len() != y_star.len() {
        return LogWeight::NEG_INFINITY;
    }
    unigram_noise_prefix_value(y, y_star, gamma, u)
}

/// Partial sum of per-position noise log-likelihoods over the first `t`
/// positions; `-inf` once the prefix outgrows `y*`. Equals the whole-sequence
/// value at `t = T*`.
fn unigram_noise_prefix_value(
    prefix: &[TokenId],
    y_star: &[TokenId],
    gamma: f64,
    u: &[f64],
) -> LogWeight {
    if prefix.len() > y_star.len() {
        return LogWeight::NEG_INFINITY;
    }
    let mut acc = LogWeight::ZERO;
    for (&tok, &reference) in prefix.iter().zip(y_star) {
        // ln(0) = -inf is a legal weight here (forbidden replacement).
        let term = if tok == reference {
            (1.0 - gamma).ln()
        } else {
            (gamma * u[tok]).ln()
        };
        acc = acc + LogWeight::new(term);
    }
    acc
}

/// 1 when lengths match and exactly one position differs; `-inf` otherwise,
/// including `y = y*`.
pub fn single_token_relaxed_delta(y: &[TokenId], y_star: &[TokenId]) -> LogWeight {
    if y.len() != y_star.len() {
        return LogWeight::NEG_INFINITY;
    }
    let diffs = y.iter().zip(y_star).filter(|(a, b)| a != b).count();
    if diffs == 1 {
        LogWeight::new(1.0)
    } else {
        LogWeight::NEG_INFINITY
    }
}

/// Prefix form of the single-token relaxation: 0 while the prefix still
/// matches `y*` (a deviation may yet come), 1 once exactly one deviation has
/// occurred, `-inf` for two or more deviations, for overlength prefixes, and
/// for the full-length exact match (where the whole-sequence reward is -inf).
fn single_token_prefix_value(prefix: &[TokenId], y_star: &[TokenId]) -> LogWeight {
    let t = prefix.len();
    let t_star = y_star.len();
    if t > t_star {
        return LogWeight::NEG_INFINITY;
    }
    let diffs = prefix.iter().zip(y_star).filter(|(a, b)| a != b).count();
    match diffs {
        0 if t < t_star => LogWeight::new(0.0),
        0 => LogWeight::NEG_INFINITY,
        1 => LogWeight::new(1.0),
        _ => LogWeight::NEG_INFINITY,
    }
}

/// Per-token reward increment `R(y_{1:t}|y*) - R(y_{1:t-1}|y*)` with the
/// `-inf - (-inf) := -inf` convention. A finite extension of a `-inf` prefix
/// violates the telescoping decomposition and is reported as an error.
pub fn incremental_reward(
    prefix: &[TokenId],
    token: TokenId,
    y_star: &Example,
    spec: &RewardSpec,
) -> Result<LogWeight> {
    let reference = y_star.target.as_slice();
    let before = spec.prefix(prefix, reference);
    let mut extended = Vec::with_capacity(prefix.len() + 1);
    extended.extend_from_slice(prefix);
    extended.push(token);
    let after = spec.prefix(&extended, reference);
    match (before.is_finite(), after.is_finite()) {
        (_, false) => Ok(LogWeight::NEG_INFINITY),
        (true, true) => Ok(LogWeight::new(after.value() - before.value())),
        (false, true) => Err(ErpoError::RewardResurrection {
            extended: after.value(),
        }),
    }
}

/// Exact comparison of the reward-induced law of unigram noising against the
/// law of the procedural noiser, enumerated over all sequences of length
/// `T*`. The two differ at matching positions by the probability that a
/// replacement draw reproduces the original token.
#[derive(Clone, Debug)]
pub struct NoisingDiagnostic {
    pub support: Vec<Sequence>,
    /// Normalized `exp(R(y|y*))` with the unigram-noise reward.
    pub law_reward: Vec<f64>,
    /// `prod_t [(1-gamma) 1(y_t = y*_t) + gamma u(y_t)]`.
    pub law_procedural: Vec<f64>,
    pub total_variation: f64,
}

pub fn unigram_noising_diagnostic(
    y_star: &[TokenId],
    gamma: f64,
    u: &[f64],
) -> Result<NoisingDiagnostic> {
    let v = u.len();
    let t = y_star.len();
    let count = (v as u128).pow(t as u32);
    if count > 1_000_000 {
        return Err(ErpoError::BudgetExceeded {
            requested: count,
            budget: 1_000_000,
        });
    }
    let mut support = Vec::with_capacity(count as usize);
    let mut reward_weights = Vec::with_capacity(count as usize);
    let mut procedural = Vec::with_capacity(count as usize);
    let mut y = vec![0usize; t];
    loop {
        support.push(Sequence::new(y.clone()));
        reward_weights.push(unigram_noise_reward(&y, y_star, gamma, u).exp());
        let p: f64 = y
            .iter()
            .zip(y_star)
            .map(|(&tok, &reference)| {
                let keep = if tok == reference { 1.0 - gamma } else { 0.0 };
                keep + gamma * u[tok]
            })
            .product();
        procedural.push(p);
        if !next_lexicographic(&mut y, v) {
            break;
        }
    }
    let z: f64 = reward_weights.iter().sum();
    let law_reward: Vec<f64> = reward_weights.iter().map(|w| w / z).collect();
    let total_variation = crate::stats::total_variation(&law_reward, &procedural);
    Ok(NoisingDiagnostic {
        support,
        law_reward,
        law_procedural: procedural,
        total_variation,
    })
}

/// Advances `digits` to the next sequence in lexicographic order; false once
/// exhausted.
pub(crate) fn next_lexicographic(digits: &mut [usize], base: usize) -> bool {
    for d in digits.iter_mut().rev() {
        *d += 1;
        if *d < base {
            return true;
        }
        *d = 0;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn example(tokens: &[TokenId]) -> Example {
        Example::new(Sequence::new(tokens.to_vec())).unwrap()
    }

    #[test]
    fn delta_match_and_mismatch() {
        assert_eq!(delta_reward(&[2, 5, 1], &[2, 5, 1]).value(), 1.0);
        assert!(delta_reward(&[2, 5], &[2, 5, 1]).is_neg_infinity());
        assert!(delta_reward(&[2, 5, 3], &[2, 5, 1]).is_neg_infinity());
    }

    #[test]
    fn delta_prefix_fraction() {
        let y_star = example(&[1, 2, 3, 4]);
        assert_eq!(delta_prefix_reward(&[1, 2], &y_star).value(), 0.5);
        assert_eq!(delta_prefix_reward(&[], &y_star).value(), 0.0);
        assert!(delta_prefix_reward(&[1, 9], &y_star).is_neg_infinity());
        assert!(delta_prefix_reward(&[1, 2, 3, 4, 1], &y_star).is_neg_infinity());
    }

    #[test]
    fn hamming_basic_cases() {
        assert_eq!(hamming_reward(&[1, 2, 3], &[1, 2, 3]).value(), 1.0);
        assert_eq!(hamming_reward(&[1, 2, 9, 4], &[1, 2, 3, 4]).value(), 0.75);
        assert_eq!(hamming_reward(&[], &[1, 2, 3, 4]).value(), -1.0);
    }

    #[test]
    fn hamming_length_mismatch_penalty() {
        // Overlap matches 2, gap 1, max length 3.
        assert_abs_diff_eq!(
            hamming_reward(&[1, 2], &[1, 2, 3]).value(),
            (2.0 - 1.0) / 3.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ngram_examples() {
        assert_abs_diff_eq!(
            ngram_match_reward(&[1, 2, 3], &[1, 2, 3], 2).value(),
            1.0,
            epsilon = 1e-15
        );
        // y = [a,a], y* = [a,b]: clipped unigram precision 1/2.
        assert_abs_diff_eq!(
            ngram_match_reward(&[0, 0], &[0, 1], 1).value(),
            0.5,
            epsilon = 1e-15
        );
        // y = [a], y* = [a,b]: precision 1, brevity 1/2.
        assert_abs_diff_eq!(
            ngram_match_reward(&[0], &[0, 1], 1).value(),
            0.5,
            epsilon = 1e-15
        );
    }

    #[test]
    fn ngram_order_above_length_skips_orders() {
        // n = 4 against a length-2 sequence only uses orders 1..=2.
        let r = ngram_match_reward(&[0, 1], &[0, 1], 4).value();
        assert_abs_diff_eq!(r, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn unigram_noise_values() {
        let u = vec![0.25; 4];
        assert!(unigram_noise_reward(&[0, 1, 2], &[0, 1], 0.5, &u).is_neg_infinity());
        assert_abs_diff_eq!(
            unigram_noise_reward(&[0, 1], &[0, 1], 0.5, &u).value(),
            0.25f64.ln(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            unigram_noise_reward(&[0, 2], &[0, 1], 0.5, &u).value(),
            0.0625f64.ln(),
            epsilon = 1e-15
        );
    }

    #[test]
    fn single_token_relaxation() {
        assert_eq!(single_token_relaxed_delta(&[1, 9, 3], &[1, 2, 3]).value(), 1.0);
        assert!(single_token_relaxed_delta(&[1, 2, 3], &[1, 2, 3]).is_neg_infinity());
        assert!(single_token_relaxed_delta(&[9, 9, 3], &[1, 2, 3]).is_neg_infinity());
    }

    #[test]
    fn incremental_delta_increments() {
        let y_star = example(&[1, 2, 3]);
        let spec = RewardSpec::Delta;
        let inc = incremental_reward(&[1], 2, &y_star, &spec).unwrap();
        assert_abs_diff_eq!(inc.value(), 1.0 / 3.0, epsilon = 1e-15);
        let bad = incremental_reward(&[1], 9, &y_star, &spec).unwrap();
        assert!(bad.is_neg_infinity());
    }

    #[test]
    fn incremental_hamming_match_is_one_over_t_star() {
        let y_star = example(&[1, 2, 3, 4]);
        let spec = RewardSpec::Hamming;
        // Even off a mismatched prefix, a matching token adds 1/T*.
        let inc = incremental_reward(&[9], 2, &y_star, &spec).unwrap();
        assert_abs_diff_eq!(inc.value(), 0.25, epsilon = 1e-15);
    }

    #[test]
    fn incremental_dead_prefix_stays_dead() {
        let y_star = example(&[1, 2, 3]);
        let spec = RewardSpec::Delta;
        // Prefix already off y*: every extension stays -inf, no resurrection.
        let inc = incremental_reward(&[9], 2, &y_star, &spec).unwrap();
        assert!(inc.is_neg_infinity());
    }

    #[test]
    fn telescoping_small_enumeration() {
        // sum_t dR = prefix value at full length, for every kind, V=3, T=3.
        let y_star = example(&[0, 1, 2]);
        let u = vec![0.5, 0.25, 0.25];
        let specs = vec![
            RewardSpec::Delta,
            RewardSpec::Hamming,
            RewardSpec::NgramMatch { n: 2 },
            RewardSpec::UnigramNoise { gamma: 0.3, u },
            RewardSpec::SingleTokenRelaxedDelta,
            RewardSpec::Interpolated {
                lambda: 0.5,
                comm: Box::new(RewardSpec::Hamming),
            },
        ];
        let mut y = vec![0usize; 3];
        loop {
            for spec in &specs {
                let mut sum = LogWeight::ZERO;
                for t in 0..3 {
                    let inc = incremental_reward(&y[..t], y[t], &y_star, spec).unwrap();
                    sum = sum + inc;
                }
                let full = spec.prefix(&y, y_star.target.as_slice());
                if full.is_finite() {
                    assert_abs_diff_eq!(sum.value(), full.value(), epsilon = 1e-10);
                } else {
                    assert!(sum.is_neg_infinity());
                }
            }
            if !next_lexicographic(&mut y, 3) {
                break;
            }
        }
    }

    #[test]
    fn unigram_noise_permutation_consistent() {
        let u = vec![0.1, 0.2, 0.3, 0.4];
        let y = [0, 1, 2, 3];
        let y_star = [0, 2, 2, 1];
        let base = unigram_noise_reward(&y, &y_star, 0.4, &u).value();
        // Joint position permutation (reverse) leaves the value unchanged.
        let y_rev: Vec<_> = y.iter().rev().copied().collect();
        let ys_rev: Vec<_> = y_star.iter().rev().copied().collect();
        assert_abs_diff_eq!(
            unigram_noise_reward(&y_rev, &ys_rev, 0.4, &u).value(),
            base,
            epsilon = 1e-15
        );
    }

    #[test]
    fn maximum_only_at_reference() {
        let y_star = [0, 1, 0];
        let best_h = hamming_reward(&y_star, &y_star).value();
        let best_n = ngram_match_reward(&y_star, &y_star, 2).value();
        let mut y = vec![0usize; 3];
        loop {
            if y.as_slice() != y_star {
                assert!(hamming_reward(&y, &y_star).value() < best_h);
                assert!(ngram_match_reward(&y, &y_star, 2).value() < best_n);
            }
            if !next_lexicographic(&mut y, 2) {
                break;
            }
        }
    }

    #[test]
    fn noising_diagnostic_tv_is_small() {
        let u = vec![0.5, 0.3, 0.2];
        let d = unigram_noising_diagnostic(&[0, 1], 0.3, &u).unwrap();
        assert_eq!(d.support.len(), 9);
        let sum_r: f64 = d.law_reward.iter().sum();
        let sum_p: f64 = d.law_procedural.iter().sum();
        assert_abs_diff_eq!(sum_r, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(sum_p, 1.0, epsilon = 1e-12);
        // Bound: gamma * max_t u(y*_t) * T.
        let bound = 0.3 * 0.5 * 2.0;
        assert!(d.total_variation <= bound + 0.01, "tv = {}", d.total_variation);
        assert!(d.total_variation > 0.0);
    }

    #[test]
    fn reward_spec_validation() {
        assert!(RewardSpec::UnigramNoise {
            gamma: 1.5,
            u: vec![0.5, 0.5]
        }
        .validate(2)
        .is_err());
        assert!(RewardSpec::UnigramNoise {
            gamma: 0.5,
            u: vec![0.6, 0.6]
        }
        .validate(2)
        .is_err());
        assert!(RewardSpec::NgramMatch { n: 0 }.validate(2).is_err());
        assert!(RewardSpec::Interpolated {
            lambda: 0.5,
            comm: Box::new(RewardSpec::Hamming)
        }
        .validate(2)
        .is_ok());
    }

    #[test]
    fn reward_spec_serde_round_trip() {
        let spec = RewardSpec::UnigramNoise {
            gamma: 0.25,
            u: vec![0.5, 0.5],
        };
        let json = serde_json::to_string(&spec).unwrap();
        let back: RewardSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(spec, back);
    }
}

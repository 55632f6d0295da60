//! Log-space arithmetic on extended reals.
//!
//! All probability math in this crate stays in log space end to end;
//! probabilities materialize only at API boundaries. `-inf` is the native
//! floating-point negative infinity (a zero-probability / forbidden-outcome
//! marker), and no operation may produce `+inf` or NaN from valid inputs.

use crate::error::{ErpoError, Result};
use crate::rng::SplitRng;
use rand::Rng;

/// An extended-real weight: finite or `-inf`, never `+inf` or NaN.
///
/// Carrier for log-probabilities, rewards, and unnormalized log-q weights.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct LogWeight(f64);

impl LogWeight {
    pub const NEG_INFINITY: LogWeight = LogWeight(f64::NEG_INFINITY);
    pub const ZERO: LogWeight = LogWeight(0.0);

    /// Wraps a value, asserting the extended-real invariant.
    pub fn new(value: f64) -> LogWeight {
        assert!(
            !value.is_nan() && value != f64::INFINITY,
            "LogWeight must be finite or -inf, got {value}"
        );
        LogWeight(value)
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn is_finite(self) -> bool {
        self.0.is_finite()
    }

    pub fn is_neg_infinity(self) -> bool {
        self.0 == f64::NEG_INFINITY
    }

    /// `exp` of the weight; `-inf` maps to exactly 0.
    pub fn exp(self) -> f64 {
        self.0.exp()
    }

    pub fn max(self, other: LogWeight) -> LogWeight {
        if self.0 >= other.0 {
            self
        } else {
            other
        }
    }

    /// Scales the weight by a finite non-negative factor, with `0 * -inf := -inf`
    /// only when the factor is positive; a zero factor yields 0.
    pub fn scale(self, factor: f64) -> LogWeight {
        assert!(factor.is_finite() && factor >= 0.0, "scale factor {factor}");
        if factor == 0.0 {
            LogWeight(0.0)
        } else {
            LogWeight::new(self.0 * factor)
        }
    }
}

/// Extended-real addition: `-inf` absorbs.
impl std::ops::Add for LogWeight {
    type Output = LogWeight;
    fn add(self, rhs: LogWeight) -> LogWeight {
        if self.is_neg_infinity() || rhs.is_neg_infinity() {
            LogWeight::NEG_INFINITY
        } else {
            LogWeight::new(self.0 + rhs.0)
        }
    }
}

impl std::iter::Sum for LogWeight {
    fn sum<I: Iterator<Item = LogWeight>>(iter: I) -> LogWeight {
        iter.fold(LogWeight::ZERO, |a, b| a + b)
    }
}

impl From<LogWeight> for f64 {
    fn from(w: LogWeight) -> f64 {
        w.0
    }
}

/// `log(sum_i exp(v_i))` with max-subtraction; `-inf` iff every input is `-inf`.
pub fn log_sum_exp(values: &[LogWeight]) -> Result<LogWeight> {
    if values.is_empty() {
        return Err(ErpoError::ContractViolation(
            "log_sum_exp of empty input".into(),
        ));
    }
    let max = values
        .iter()
        .copied()
        .fold(LogWeight::NEG_INFINITY, LogWeight::max);
    if max.is_neg_infinity() {
        return Ok(LogWeight::NEG_INFINITY);
    }
    let m = max.value();
    let sum: f64 = values.iter().map(|v| (v.value() - m).exp()).sum();
    Ok(LogWeight::new(m + sum.ln()))
}

/// Draws index `i` with probability `exp(w_i - log_sum_exp(w))`.
///
/// Deterministic given the RNG state. Entries at `-inf` are never selected.
pub fn sample_categorical(log_weights: &[LogWeight], rng: &mut SplitRng) -> Result<usize> {
    let norm = log_sum_exp(log_weights)?;
    if norm.is_neg_infinity() {
        return Err(ErpoError::DegenerateDistribution);
    }
    let z = norm.value();
    let u: f64 = rng.gen::<f64>();
    let mut cum = 0.0;
    let mut last_finite = None;
    for (i, w) in log_weights.iter().enumerate() {
        if w.is_neg_infinity() {
            continue;
        }
        last_finite = Some(i);
        cum += (w.value() - z).exp();
        if u < cum {
            return Ok(i);
        }
    }
    // Rounding slop can leave cum slightly below 1; fall back to the last
    // finite-weight index.
    Ok(last_finite.expect("at least one finite weight"))
}

/// Normalizes log weights in place to a log-probability vector.
pub fn normalize_log(log_weights: &mut [LogWeight]) -> Result<()> {
    let norm = log_sum_exp(log_weights)?;
    if norm.is_neg_infinity() {
        return Err(ErpoError::EmptySupport);
    }
    let z = norm.value();
    for w in log_weights.iter_mut() {
        if !w.is_neg_infinity() {
            *w = LogWeight::new(w.value() - z);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn lse_two_equal_weights_is_ln_two() {
        let v = [LogWeight::new(0.0), LogWeight::new(0.0)];
        assert_abs_diff_eq!(
            log_sum_exp(&v).unwrap().value(),
            std::f64::consts::LN_2,
            epsilon = 1e-15
        );
    }

    #[test]
    fn lse_ignores_neg_infinity() {
        let v = [LogWeight::NEG_INFINITY, LogWeight::new(0.0)];
        assert_eq!(log_sum_exp(&v).unwrap().value(), 0.0);
    }

    #[test]
    fn lse_matches_direct_summation() {
        // Direct-summation oracle: ln(e^1 + e^2 + e^3).
        let direct = (1.0f64.exp() + 2.0f64.exp() + 3.0f64.exp()).ln();
        let v = [LogWeight::new(1.0), LogWeight::new(2.0), LogWeight::new(3.0)];
        let got = log_sum_exp(&v).unwrap().value();
        assert_abs_diff_eq!(got, direct, epsilon = 1e-12);
        assert_abs_diff_eq!(got, 3.40760596444438, epsilon = 1e-12);
    }

    #[test]
    fn lse_all_neg_infinity() {
        let v = [LogWeight::NEG_INFINITY, LogWeight::NEG_INFINITY];
        assert!(log_sum_exp(&v).unwrap().is_neg_infinity());
    }

    #[test]
    fn lse_empty_is_contract_violation() {
        assert!(log_sum_exp(&[]).is_err());
    }

    #[test]
    fn lse_large_magnitudes_do_not_overflow() {
        let v = [LogWeight::new(1000.0), LogWeight::new(999.0)];
        let got = log_sum_exp(&v).unwrap().value();
        assert!(got.is_finite());
        assert_abs_diff_eq!(got, 1000.0 + (1.0 + (-1.0f64).exp()).ln(), epsilon = 1e-12);
    }

    #[test]
    fn sample_single_finite_weight_always_chosen() {
        let mut rng = SplitRng::seed_from_u64(7);
        let w = [LogWeight::new(0.0), LogWeight::NEG_INFINITY];
        for _ in 0..100 {
            assert_eq!(sample_categorical(&w, &mut rng).unwrap(), 0);
        }
    }

    #[test]
    fn sample_all_neg_infinity_is_degenerate() {
        let mut rng = SplitRng::seed_from_u64(7);
        let w = [LogWeight::NEG_INFINITY; 3];
        assert!(matches!(
            sample_categorical(&w, &mut rng),
            Err(ErpoError::DegenerateDistribution)
        ));
    }

    #[test]
    fn sample_fair_coin_concentration() {
        // Binomial concentration: frequency of index 0 within 0.5 +/- 0.01 at n=1e5.
        let mut rng = SplitRng::seed_from_u64(42);
        let w = [LogWeight::new(0.0), LogWeight::new(0.0)];
        let n = 100_000;
        let mut zeros = 0u64;
        for _ in 0..n {
            if sample_categorical(&w, &mut rng).unwrap() == 0 {
                zeros += 1;
            }
        }
        let freq = zeros as f64 / n as f64;
        assert!((freq - 0.5).abs() < 0.01, "freq = {freq}");
    }

    #[test]
    fn sample_deterministic_under_seed() {
        let w = [LogWeight::new(0.0), LogWeight::new(1.0), LogWeight::new(2.0)];
        let draw = |seed: u64| {
            let mut rng = SplitRng::seed_from_u64(seed);
            (0..50)
                .map(|_| sample_categorical(&w, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(draw(123), draw(123));
    }

    #[test]
    #[should_panic(expected = "LogWeight must be finite or -inf")]
    fn logweight_rejects_nan() {
        let _ = LogWeight::new(f64::NAN);
    }
}

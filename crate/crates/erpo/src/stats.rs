//! Small statistics helpers shared by tests, the verification suites, and
//! report aggregation.

use statrs::distribution::{ChiSquared, ContinuousCDF};

/// Pearson chi-square goodness-of-fit statistic for observed counts against
/// expected cell probabilities. Cells with zero expected probability must
/// have zero observed count (asserted).
pub fn chi_square_statistic(observed: &[u64], expected_probs: &[f64]) -> f64 {
    assert_eq!(observed.len(), expected_probs.len());
    let n: u64 = observed.iter().sum();
    let mut stat = 0.0;
    for (&o, &p) in observed.iter().zip(expected_probs) {
        if p == 0.0 {
            assert_eq!(o, 0, "observed count in zero-probability cell");
            continue;
        }
        let e = n as f64 * p;
        let d = o as f64 - e;
        stat += d * d / e;
    }
    stat
}

/// Goodness-of-fit test at significance `alpha`: returns `(statistic,
/// critical_value, passes)` where `passes` means "not rejected", i.e.
/// p-value > alpha. Degrees of freedom = (cells with positive expected
/// probability) - 1.
pub fn chi_square_fit(observed: &[u64], expected_probs: &[f64], alpha: f64) -> (f64, f64, bool) {
    let stat = chi_square_statistic(observed, expected_probs);
    let df = expected_probs.iter().filter(|&&p| p > 0.0).count() as f64 - 1.0;
    assert!(df >= 1.0, "need at least two cells with mass");
    let critical = ChiSquared::new(df).unwrap().inverse_cdf(1.0 - alpha);
    (stat, critical, stat < critical)
}

/// Total-variation distance between two probability vectors on the same
/// indexed support: `0.5 * sum |p_i - q_i|`.
pub fn total_variation(p: &[f64], q: &[f64]) -> f64 {
    assert_eq!(p.len(), q.len());
    0.5 * p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum::<f64>()
}

/// Sample mean.
pub fn mean(xs: &[f64]) -> f64 {
    assert!(!xs.is_empty());
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n-1 denominator); 0 for fewer than two points.
pub fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0);
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn chi_square_accepts_exact_fit() {
        let observed = [250u64, 250, 250, 250];
        let probs = [0.25; 4];
        let (stat, crit, pass) = chi_square_fit(&observed, &probs, 0.001);
        assert_eq!(stat, 0.0);
        assert!(crit > 0.0);
        assert!(pass);
    }

    #[test]
    fn chi_square_rejects_gross_misfit() {
        let observed = [1000u64, 0, 0, 0];
        let probs = [0.25; 4];
        let (_, _, pass) = chi_square_fit(&observed, &probs, 0.001);
        assert!(!pass);
    }

    #[test]
    fn tv_of_identical_is_zero() {
        let p = [0.2, 0.3, 0.5];
        assert_eq!(total_variation(&p, &p), 0.0);
    }

    #[test]
    fn tv_of_disjoint_is_one() {
        assert_abs_diff_eq!(
            total_variation(&[1.0, 0.0], &[0.0, 1.0]),
            1.0,
            epsilon = 1e-15
        );
    }

    #[test]
    fn std_of_constant_is_zero() {
        assert_eq!(sample_std(&[3.0, 3.0, 3.0]), 0.0);
        assert_eq!(sample_std(&[3.0]), 0.0);
    }
}

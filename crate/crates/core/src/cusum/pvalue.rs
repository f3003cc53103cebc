//! Tail probabilities for sup-CUSUM statistics.

use std::f64::consts::PI;

use super::null::NullDistribution;
use super::Variant;
use crate::error::{Error, Result};

const MAX_TERMS: usize = 100;

/// `P(sup_{0<=x<=1} |B(x)| > x)` for a standard Brownian bridge `B`.
///
/// Uses the alternating series `2 sum (-1)^(j+1) exp(-2 j^2 x^2)` for
/// `x >= 1` and the dual theta-function series for the CDF below that, where
/// the alternating series converges slowly. Positive arguments never return
/// exactly zero.
pub fn standard_pvalue(x: f64) -> f64 {
    if x.is_nan() || x <= 0.0 {
        return 1.0;
    }
    let p = if x < 1.0 {
        let mut cdf = 0.0;
        for j in 1..=MAX_TERMS {
            let odd = (2 * j - 1) as f64;
            let term = (-(odd * odd) * PI * PI / (8.0 * x * x)).exp();
            cdf += term;
            if term < 1e-17 * cdf {
                break;
            }
        }
        1.0 - (2.0 * PI).sqrt() / x * cdf
    } else {
        let mut sum = 0.0;
        for j in 1..=MAX_TERMS {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * x * x).exp();
            sum += if j % 2 == 1 { term } else { -term };
            if term < 1e-12 && term <= 1e-17 * sum.abs() {
                break;
            }
        }
        2.0 * sum
    };
    p.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Empirical upper-tail p-value `(1 + #{samples >= x}) / (R + 1)` against a
/// simulated weighted null whose trim fraction must match `trim_fraction`.
pub fn weighted_pvalue(sup_stat: f64, null: &NullDistribution, trim_fraction: f64) -> Result<f64> {
    if null.variant() != Variant::Weighted {
        return Err(Error::invalid("weighted p-value requires a weighted null distribution"));
    }
    if (null.trim_fraction() - trim_fraction).abs() > 5e-7 {
        return Err(Error::invalid(format!(
            "null distribution trimmed at {} but statistic trimmed at {trim_fraction}",
            null.trim_fraction()
        )));
    }
    Ok(null.upper_tail(sup_stat))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Alternating series summed far past convergence, no switching.
    fn kolmogorov_oracle(x: f64) -> f64 {
        let mut s = 0.0;
        for j in (1..=400).rev() {
            let jf = j as f64;
            let term = (-2.0 * jf * jf * x * x).exp();
            s += if j % 2 == 1 { term } else { -term };
        }
        2.0 * s
    }

    #[test]
    fn zero_gives_one() {
        assert_eq!(standard_pvalue(0.0), 1.0);
    }

    #[test]
    fn five_percent_point() {
        let p = standard_pvalue(1.358);
        assert!((p - 0.0503).abs() < 5e-4, "{p}");
        assert!((p - kolmogorov_oracle(1.358)).abs() < 1e-12);
    }

    #[test]
    fn agrees_with_series_oracle_across_branch_point() {
        for i in 0..80 {
            let x = 0.4 + i as f64 * 0.02;
            assert!((standard_pvalue(x) - kolmogorov_oracle(x)).abs() < 1e-10, "x={x}");
        }
    }

    #[test]
    fn far_tail_is_tiny_but_positive() {
        let p = standard_pvalue(7.07);
        assert!(p > 0.0 && p < 1e-40);
        assert!(standard_pvalue(1e3) > 0.0);
        assert!(standard_pvalue(f64::INFINITY) > 0.0);
    }

    #[test]
    fn strictly_decreasing() {
        let mut prev = standard_pvalue(0.3);
        for i in 1..470 {
            let p = standard_pvalue(0.3 + i as f64 * 0.01);
            assert!(p < prev, "not decreasing at {}", 0.3 + i as f64 * 0.01);
            prev = p;
        }
    }
}

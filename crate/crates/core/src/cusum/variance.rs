//! Variance estimators for CUSUM normalisation.

/// Split-sample variance at split `z` (1-based, `1 <= z <= n-1`): the pooled
/// sum of squares of `y[..z]` and `y[z..]` about their own means, over `n`.
pub fn split_variance(y: &[f64], z: usize) -> f64 {
    let n = y.len();
    assert!(z >= 1 && z < n, "split index {z} outside 1..{n}");
    (sum_squares(&y[..z]) + sum_squares(&y[z..])) / n as f64
}

fn sum_squares(seg: &[f64]) -> f64 {
    let mean = seg.iter().sum::<f64>() / seg.len() as f64;
    seg.iter().map(|v| (v - mean) * (v - mean)).sum()
}

/// Split-sample variances for every `z` in `1..n`, returned so that
/// `out[z - 1]` belongs to split `z`. Runs forward and backward Welford
/// passes, which keep constant segments at exactly zero.
pub fn split_variances(y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n < 2 {
        return Vec::new();
    }
    let mut forward = vec![0.0; n];
    let (mut mean, mut m2) = (0.0, 0.0);
    for (i, &v) in y.iter().enumerate() {
        let delta = v - mean;
        mean += delta / (i + 1) as f64;
        m2 += delta * (v - mean);
        forward[i] = m2;
    }
    let mut backward = vec![0.0; n];
    let (mut mean, mut m2) = (0.0, 0.0);
    for (c, i) in (0..n).rev().enumerate() {
        let v = y[i];
        let delta = v - mean;
        mean += delta / (c + 1) as f64;
        m2 += delta * (v - mean);
        backward[i] = m2;
    }
    let nf = n as f64;
    (1..n).map(|z| (forward[z - 1] + backward[z]) / nf).collect()
}

/// Bartlett-kernel long-run variance with an AR(1) plug-in bandwidth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HacEstimate {
    pub variance: f64,
    pub bandwidth: f64,
    pub lag1_autocorrelation: f64,
    /// Set for constant input, in which case `variance` is zero.
    pub degenerate: bool,
}

const RHO_CLIP: f64 = 0.97;
const HAC_FLOOR: f64 = 1e-8;

/// Long-run variance `g0 + 2 sum_{h<=S} (1 - h/(S+1)) g_h` with bandwidth
/// `S = 1.1447 (a n)^(1/3)` and `a = 4 rho^2 / ((1-rho)^2 (1+rho)^2)`.
///
/// Autocovariances use the full-sample mean and divisor `n`. The result is
/// floored at `1e-8` times the sample variance.
pub fn hac_variance(y: &[f64]) -> HacEstimate {
    let n = y.len();
    if n < 2 || y.iter().all(|&v| v == y[0]) {
        return HacEstimate {
            variance: 0.0,
            bandwidth: 0.0,
            lag1_autocorrelation: 0.0,
            degenerate: true,
        };
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let e: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let autocov = |h: usize| e[h..].iter().zip(&e[..n - h]).map(|(a, b)| a * b).sum::<f64>() / nf;
    let gamma0 = autocov(0);
    let rho = (autocov(1) / gamma0).clamp(-RHO_CLIP, RHO_CLIP);
    let alpha = 4.0 * rho * rho / ((1.0 - rho).powi(2) * (1.0 + rho).powi(2));
    let bandwidth = 1.1447 * (alpha * nf).cbrt();
    let max_lag = (bandwidth.floor() as usize).min(n - 1);
    let mut variance = gamma0;
    for h in 1..=max_lag {
        variance += 2.0 * (1.0 - h as f64 / (bandwidth + 1.0)) * autocov(h);
    }
    HacEstimate {
        variance: variance.max(HAC_FLOOR * gamma0),
        bandwidth,
        lag1_autocorrelation: rho,
        degenerate: false,
    }
}

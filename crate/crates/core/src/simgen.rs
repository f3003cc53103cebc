//! Synthetic functional time series on a Fourier basis with an optional
//! mean break, discretised to an equally spaced grid.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::rng;

/// Standard-deviation schedule of the basis coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Setting {
    /// `sigma_g = 1` for `g <= 3`, zero afterwards.
    S1,
    /// `sigma_g = 3^-g`.
    S2,
    /// `sigma_g = 1/g`.
    S3,
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Setting::S1 => "S1",
            Setting::S2 => "S2",
            Setting::S3 => "S3",
        })
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "S1" | "s1" | "1" => Ok(Setting::S1),
            "S2" | "s2" | "2" => Ok(Setting::S2),
            "S3" | "s3" | "3" => Ok(Setting::S3),
            _ => Err(Error::invalid(format!("unknown setting {s:?}"))),
        }
    }
}

pub fn sigma_schedule(setting: Setting, n_basis: usize) -> Vec<f64> {
    (1..=n_basis)
        .map(|g| match setting {
            Setting::S1 => {
                if g <= 3 {
                    1.0
                } else {
                    0.0
                }
            }
            Setting::S2 => 3f64.powi(-(g as i32)),
            Setting::S3 => 1.0 / g as f64,
        })
        .collect()
}

/// Fourier basis on the grid `s_j = j / grid_p`, `j = 1..=grid_p`, as a
/// row-major `grid_p x n_basis` matrix: `v_1 = 1`,
/// `v_{2j} = sqrt(2) sin(2 pi j s)`, `v_{2j+1} = sqrt(2) cos(2 pi j s)`.
pub fn fourier_basis(n_basis: usize, grid_p: usize) -> Result<Vec<f64>> {
    if n_basis == 0 || grid_p < 2 {
        return Err(Error::invalid(format!(
            "basis needs n_basis >= 1 and grid_p >= 2, got {n_basis}, {grid_p}"
        )));
    }
    let mut out = Vec::with_capacity(grid_p * n_basis);
    for j in 1..=grid_p {
        let s = j as f64 / grid_p as f64;
        out.extend((1..=n_basis).map(|g| basis_value(g, s)));
    }
    Ok(out)
}

/// `v_g(s)` for 1-based `g`.
pub fn basis_value(g: usize, s: f64) -> f64 {
    use std::f64::consts::{PI, SQRT_2};
    if g == 1 {
        return 1.0;
    }
    let freq = (g / 2) as f64;
    if g.is_multiple_of(2) {
        SQRT_2 * (2.0 * PI * freq * s).sin()
    } else {
        SQRT_2 * (2.0 * PI * freq * s).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub n: usize,
    pub grid_p: usize,
    pub n_basis: usize,
    pub setting: Setting,
    /// Number of leading basis functions in the break.
    pub m: usize,
    pub snr: f64,
    pub theta: f64,
    pub seed: u64,
    /// Multiplies every coefficient standard deviation.
    pub noise_scale: f64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        Self {
            n: 50,
            grid_p: 101,
            n_basis: 21,
            setting: Setting::S1,
            m: 5,
            snr: 0.0,
            theta: 0.25,
            seed: 0,
            noise_scale: 1.0,
        }
    }
}

impl GeneratorConfig {
    /// `floor(theta n)`.
    pub fn true_z(&self) -> usize {
        (self.theta * self.n as f64 + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 || self.grid_p < 2 || self.n_basis == 0 {
            return Err(Error::invalid("generator needs n >= 2, grid_p >= 2, n_basis >= 1"));
        }
        if self.m == 0 || self.m > self.n_basis {
            return Err(Error::invalid(format!("m = {} must lie in [1, n_basis = {}]", self.m, self.n_basis)));
        }
        if !(self.snr >= 0.0 && self.snr.is_finite()) {
            return Err(Error::invalid(format!("snr {} must be finite and non-negative", self.snr)));
        }
        if !(self.noise_scale >= 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::invalid("noise_scale must be finite and non-negative"));
        }
        if self.snr > 0.0 {
            if !(self.theta > 0.0 && self.theta < 1.0) {
                return Err(Error::invalid(format!("theta {} outside (0, 1)", self.theta)));
            }
            let z = self.true_z();
            if z < 1 || z >= self.n {
                return Err(Error::invalid(format!("change point {z} outside [1, n-1]")));
            }
        }
        Ok(())
    }
}

/// The realised break function.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakSpec {
    pub m: usize,
    /// Squared magnitude `c`.
    pub c: f64,
    pub delta_grid: Vec<f64>,
}

/// `c = snr * trace / (theta (1 - theta) sqrt(n_basis))`.
pub fn break_magnitude(snr: f64, trace: f64, theta: f64, n_basis: usize) -> f64 {
    if snr == 0.0 {
        return 0.0;
    }
    snr * trace / (theta * (1.0 - theta) * (n_basis as f64).sqrt())
}

/// `delta(s) = sqrt(c / m) * sum_{g <= m} v_g(s)` on the grid.
pub fn break_function(c: f64, m: usize, grid_p: usize) -> BreakSpec {
    let amp = (c / m as f64).sqrt();
    let delta_grid = (1..=grid_p)
        .map(|j| {
            let s = j as f64 / grid_p as f64;
            if c == 0.0 {
                0.0
            } else {
                amp * (1..=m).map(|g| basis_value(g, s)).sum::<f64>()
            }
        })
        .collect();
    BreakSpec { m, c, delta_grid }
}

/// A generated dataset with its ground truth.
#[derive(Debug, Clone)]
pub struct Generated {
    pub data: DataMatrix,
    pub true_z: usize,
    /// Trace of the sample covariance of the drawn coefficients.
    pub trace: f64,
    pub breakspec: BreakSpec,
    /// Drawn coefficients, row-major `n x n_basis`.
    pub coefficients: Vec<f64>,
}

/// Sum of the per-basis sample variances (divisor `n - 1`) of the coefficients.
fn coefficient_trace(coef: &[f64], n: usize, d: usize) -> f64 {
    (0..d)
        .map(|g| {
            let col = (0..n).map(|t| coef[t * d + g]);
            let mean = col.clone().sum::<f64>() / n as f64;
            col.map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64
        })
        .sum()
}

/// Draws `A_{t,g} ~ N(0, sigma_g^2)`, forms `eps_t = sum_g A_{t,g} v_g`, and
/// adds the break `delta` to rows `t > floor(theta n)`.
pub fn generate(cfg: &GeneratorConfig) -> Result<Generated> {
    cfg.validate()?;
    let (n, d, p) = (cfg.n, cfg.n_basis, cfg.grid_p);
    let sigma: Vec<f64> = sigma_schedule(cfg.setting, d).iter().map(|s| s * cfg.noise_scale).collect();
    let mut rng = rng::stream(cfg.seed, 0);
    let mut coef = Vec::with_capacity(n * d);
    for _ in 0..n {
        for &s in &sigma {
            let z: f64 = StandardNormal.sample(&mut rng);
            coef.push(s * z);
        }
    }
    let trace = coefficient_trace(&coef, n, d);
    let c = break_magnitude(cfg.snr, trace, cfg.theta, d);
    let breakspec = break_function(c, cfg.m, p);
    let basis = fourier_basis(d, p)?;
    let true_z = if cfg.snr > 0.0 { cfg.true_z() } else { cfg.true_z().clamp(1, n - 1) };
    let mut values = Vec::with_capacity(n * p);
    for t in 0..n {
        let a = &coef[t * d..(t + 1) * d];
        let shifted = t + 1 > true_z;
        for j in 0..p {
            let row = &basis[j * d..(j + 1) * d];
            let eps: f64 = a.iter().zip(row).map(|(x, y)| x * y).sum();
            values.push(if shifted { eps + breakspec.delta_grid[j] } else { eps });
        }
    }
    Ok(Generated {
        data: DataMatrix::new(n, p, values)?,
        true_z,
        trace,
        breakspec,
        coefficients: coef,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedules() {
        let s1 = sigma_schedule(Setting::S1, 21);
        assert_eq!(&s1[..4], &[1.0, 1.0, 1.0, 0.0]);
        assert!(s1[3..].iter().all(|&v| v == 0.0));
        let s2 = sigma_schedule(Setting::S2, 3);
        for (a, b) in s2.iter().zip([1.0 / 3.0, 1.0 / 9.0, 1.0 / 27.0]) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(sigma_schedule(Setting::S3, 4), vec![1.0, 0.5, 1.0 / 3.0, 0.25]);
    }

    #[test]
    fn basis_values_and_orthonormality() {
        let b = fourier_basis(21, 101).unwrap();
        assert!((0..101).all(|j| b[j * 21] == 1.0));
        assert!((basis_value(2, 0.25) - 2f64.sqrt()).abs() < 1e-15);
        for g in 0..21 {
            for h in 0..21 {
                let ip = (0..101).map(|j| b[j * 21 + g] * b[j * 21 + h]).sum::<f64>() / 101.0;
                let target = if g == h { 1.0 } else { 0.0 };
                assert!((ip - target).abs() < 0.02, "({g},{h}) -> {ip}");
            }
        }
        assert!(fourier_basis(0, 10).is_err());
        assert!(fourier_basis(3, 1).is_err());
    }

    #[test]
    fn break_magnitude_hand_value() {
        let c = break_magnitude(0.5, 3.0, 0.25, 21);
        assert!((c - 1.5 / (0.1875 * 21f64.sqrt())).abs() < 1e-12);
        assert!((c - 1.74574).abs() < 1e-5);
    }

    #[test]
    fn break_norm_matches_c() {
        for m in [1, 5, 20] {
            let spec = break_function(2.3, m, 101);
            let norm2 = spec.delta_grid.iter().map(|v| v * v).sum::<f64>() / 101.0;
            assert!((norm2 - 2.3).abs() < 0.02 * 2.3, "m={m}: {norm2}");
        }
        assert!(break_function(0.0, 5, 101).delta_grid.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn null_has_no_break_and_is_deterministic() {
        let cfg = GeneratorConfig { seed: 8, ..Default::default() };
        let a = generate(&cfg).unwrap();
        assert_eq!(a.breakspec.c, 0.0);
        assert_eq!((a.data.n(), a.data.p()), (50, 101));
        assert_eq!(a.data, generate(&cfg).unwrap().data);
        assert_eq!(a.true_z, 12);
    }

    #[test]
    fn theta_validation() {
        let cfg = GeneratorConfig { snr: 0.5, theta: 1.0, ..Default::default() };
        assert!(generate(&cfg).is_err());
        let cfg = GeneratorConfig { snr: 0.5, theta: 0.01, ..Default::default() };
        assert!(generate(&cfg).is_err());
    }

    #[test]
    fn trace_converges_in_setting_one() {
        let cfg = GeneratorConfig { n: 5000, seed: 3, ..Default::default() };
        let g = generate(&cfg).unwrap();
        assert!((g.trace - 3.0).abs() < 0.15, "{}", g.trace);
        // coefficients of the first basis function are serially uncorrelated
        let a1: Vec<f64> = (0..5000).map(|t| g.coefficients[t * 21]).collect();
        let mean = a1.iter().sum::<f64>() / 5000.0;
        let num: f64 = a1.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum();
        let den: f64 = a1.iter().map(|a| (a - mean) * (a - mean)).sum();
        assert!((num / den).abs() < 3.0 / 5000f64.sqrt());
    }

    #[test]
    fn realised_mean_shift_matches_delta() {
        let cfg = GeneratorConfig { n: 5000, snr: 1.0, m: 5, seed: 4, ..Default::default() };
        let g = generate(&cfg).unwrap();
        let z = g.true_z;
        let p = g.data.p();
        let mut diff = vec![0.0; p];
        for t in 0..5000 {
            let w = if t < z { -1.0 / z as f64 } else { 1.0 / (5000 - z) as f64 };
            for (j, d) in diff.iter_mut().enumerate() {
                *d += w * g.data.get(t, j);
            }
        }
        let err: f64 = diff.iter().zip(&g.breakspec.delta_grid).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
        let norm: f64 = g.breakspec.delta_grid.iter().map(|b| b * b).sum();
        assert!((err / norm).sqrt() < 0.05, "relative L2 error {}", (err / norm).sqrt());
    }
}

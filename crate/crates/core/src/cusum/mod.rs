//! Standard and weighted CUSUM profiles and their p-values.

mod null;
mod pvalue;
mod variance;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use null::{
    simulate_null, CacheStatus, NullCache, NullDistribution, NullKey, DEFAULT_INCREMENTS, DEFAULT_NULL_SEED,
    DEFAULT_REPLICATIONS,
};
pub use pvalue::{standard_pvalue, weighted_pvalue};
pub use variance::{hac_variance, split_variance, split_variances, HacEstimate};

use crate::error::{Error, Result};

/// Which CUSUM functional to take.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Unweighted CUSUM, written `cusum` on the command line.
    #[serde(rename = "cusum", alias = "standard")]
    Standard,
    Weighted,
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Variant::Standard => "cusum",
            Variant::Weighted => "weighted",
        })
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cusum" | "standard" => Ok(Variant::Standard),
            "weighted" => Ok(Variant::Weighted),
            _ => Err(Error::invalid(format!("unknown CUSUM variant {s:?}"))),
        }
    }
}

/// How the CUSUM numerator is normalised.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarianceKind {
    /// Split-sample variance, recomputed for every candidate `z`.
    Split,
    /// Bartlett HAC long-run variance of the whole series.
    Hac,
}

impl fmt::Display for VarianceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VarianceKind::Split => "split",
            VarianceKind::Hac => "hac",
        })
    }
}

impl FromStr for VarianceKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "split" => Ok(VarianceKind::Split),
            "hac" => Ok(VarianceKind::Hac),
            _ => Err(Error::invalid(format!("unknown variance estimator {s:?}"))),
        }
    }
}

/// Boundary trimming rule `l = floor(n tau)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum TrimSpec {
    /// `l = 1`.
    None,
    /// `l = floor(n^0.25)`.
    NQuarter,
    /// `l = floor(ln n)`.
    LogN,
    /// `l = floor(n^0.5)`.
    SqrtN,
    Explicit(usize),
}

impl TrimSpec {
    /// Resolved trim `l` for a series of length `n`; requires `1 <= l < n/2`.
    pub fn resolve(self, n: usize) -> Result<usize> {
        let nf = n as f64;
        let ell = match self {
            TrimSpec::None => 1,
            TrimSpec::NQuarter => (nf.powf(0.25) + 1e-9).floor() as usize,
            TrimSpec::LogN => (nf.ln() + 1e-9).floor() as usize,
            TrimSpec::SqrtN => (nf.sqrt() + 1e-9).floor() as usize,
            TrimSpec::Explicit(l) => l,
        };
        if ell < 1 || 2 * ell >= n {
            return Err(Error::invalid(format!("trim {ell} is not in [1, n/2) for n = {n}")));
        }
        Ok(ell)
    }
}

impl fmt::Display for TrimSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TrimSpec::None => f.write_str("1"),
            TrimSpec::NQuarter => f.write_str("n025"),
            TrimSpec::LogN => f.write_str("logn"),
            TrimSpec::SqrtN => f.write_str("sqrtn"),
            TrimSpec::Explicit(l) => write!(f, "{l}"),
        }
    }
}

impl FromStr for TrimSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "none" => Ok(TrimSpec::None),
            "n025" => Ok(TrimSpec::NQuarter),
            "logn" => Ok(TrimSpec::LogN),
            "sqrtn" => Ok(TrimSpec::SqrtN),
            other => other
                .parse::<usize>()
                .map(TrimSpec::Explicit)
                .map_err(|_| Error::invalid(format!("unknown trim rule {s:?} (expected 1, n025, logn, sqrtn or an integer)"))),
        }
    }
}

impl TryFrom<String> for TrimSpec {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<TrimSpec> for String {
    fn from(t: TrimSpec) -> String {
        t.to_string()
    }
}

/// What happened where the variance estimate vanished.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Degeneracy {
    None,
    /// Some candidate had zero variance and a nonzero numerator; its
    /// statistic is `+inf`.
    Certain,
    /// Every candidate had zero variance and zero numerator.
    Flat,
}

/// CUSUM statistics over the candidate window `z_lo..=z_hi`.
#[derive(Debug, Clone, PartialEq)]
pub struct CusumProfile {
    n: usize,
    stats: Vec<f64>,
    z_lo: usize,
    z_hi: usize,
    sup_stat: f64,
    arg_sup: usize,
    variant: Variant,
    variance_kind: VarianceKind,
    degeneracy: Degeneracy,
}

impl CusumProfile {
    /// Length of the series the profile was computed from.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn stats(&self) -> &[f64] {
        &self.stats
    }

    /// Statistic at candidate `z`.
    pub fn stat(&self, z: usize) -> Option<f64> {
        (self.z_lo..=self.z_hi).contains(&z).then(|| self.stats[z - self.z_lo])
    }

    pub fn z_lo(&self) -> usize {
        self.z_lo
    }

    pub fn z_hi(&self) -> usize {
        self.z_hi
    }

    pub fn sup_stat(&self) -> f64 {
        self.sup_stat
    }

    /// Smallest `z` attaining the sup.
    pub fn arg_sup(&self) -> usize {
        self.arg_sup
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn variance_kind(&self) -> VarianceKind {
        self.variance_kind
    }

    pub fn degeneracy(&self) -> Degeneracy {
        self.degeneracy
    }

    /// Trim fraction `l / n` of the window; zero for the standard variant,
    /// whose p-value comes from the untrimmed limit law.
    pub fn trim_fraction(&self) -> f64 {
        match self.variant {
            Variant::Standard => 0.0,
            Variant::Weighted => self.z_lo as f64 / self.n as f64,
        }
    }
}

/// Window `[l, n - l]` of candidate split points. The standard variant always
/// uses `l = 1`.
pub fn candidate_window(n: usize, variant: Variant, trim: TrimSpec) -> Result<(usize, usize)> {
    if n < 4 {
        return Err(Error::invalid(format!("series of length {n} is too short (need n >= 4)")));
    }
    let ell = match variant {
        Variant::Standard => 1,
        Variant::Weighted => trim.resolve(n)?,
    };
    Ok((ell, n - ell))
}

/// Computes the CUSUM profile of `y`.
///
/// With partial sums `S_z`, the standard statistic is
/// `|S_z - (z/n) S_n| / (sqrt(n) sigma_z)` and the weighted one is
/// `sqrt(n / (z (n - z))) |S_z - (z/n) S_n| / sigma_z`.
pub fn cusum_profile(y: &[f64], variant: Variant, variance_kind: VarianceKind, trim: TrimSpec) -> Result<CusumProfile> {
    let n = y.len();
    let (z_lo, z_hi) = candidate_window(n, variant, trim)?;
    if let Some(t) = y.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("non-finite value at t = {}", t + 1)));
    }
    let nf = n as f64;
    let mean = y.iter().sum::<f64>() / nf;
    let mut centered_partial = Vec::with_capacity(n);
    let mut acc = 0.0;
    for v in y {
        acc += v - mean;
        centered_partial.push(acc);
    }

    let split = match variance_kind {
        VarianceKind::Split => Some(split_variances(y)),
        VarianceKind::Hac => None,
    };
    let hac = match variance_kind {
        VarianceKind::Hac => hac_variance(y).variance,
        VarianceKind::Split => 0.0,
    };

    let mut stats = Vec::with_capacity(z_hi - z_lo + 1);
    let mut any_certain = false;
    let mut all_flat = true;
    for z in z_lo..=z_hi {
        let var = match &split {
            Some(s) => s[z - 1],
            None => hac,
        };
        let numerator = centered_partial[z - 1].abs();
        let weight = match variant {
            Variant::Standard => 1.0 / nf.sqrt(),
            Variant::Weighted => (nf / (z as f64 * (n - z) as f64)).sqrt(),
        };
        let stat = if var > 0.0 {
            all_flat = false;
            weight * numerator / var.sqrt()
        } else if y[z - 1] != y[z] {
            // both segments are constant (split) and differ: a certain break
            any_certain = true;
            all_flat = false;
            f64::INFINITY
        } else {
            0.0
        };
        stats.push(stat);
    }

    let (mut arg_sup, mut sup_stat) = (z_lo, stats[0]);
    for (i, &s) in stats.iter().enumerate().skip(1) {
        if s > sup_stat {
            sup_stat = s;
            arg_sup = z_lo + i;
        }
    }
    let degeneracy = if any_certain {
        Degeneracy::Certain
    } else if all_flat {
        Degeneracy::Flat
    } else {
        Degeneracy::None
    };
    Ok(CusumProfile {
        n,
        stats,
        z_lo,
        z_hi,
        sup_stat,
        arg_sup,
        variant,
        variance_kind,
        degeneracy,
    })
}

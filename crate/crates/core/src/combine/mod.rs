//! Multiple-testing adjustment and combination of per-projection p-values.

mod landau;

use std::f64::consts::{FRAC_PI_2, PI};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use landau::stable_upper_tail;

use crate::error::{Error, Result};

/// Location offset of the harmonic-mean calibration law (in addition to
/// `ln k`); the scale is `pi / 2`.
pub const HMP_LOCATION_OFFSET: f64 = 0.874;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Bonferroni.
    Bonf,
    /// Benjamini-Hochberg step-up.
    Bh,
    /// Harmonic mean p-value with stable-law calibration.
    Hmp,
    /// Cauchy combination test.
    Cct,
    /// Harmonic mean p-value used directly as `p_comb`, without calibration.
    #[serde(rename = "hmpraw")]
    HmpRaw,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Bonf, Method::Bh, Method::Hmp, Method::Cct, Method::HmpRaw];

    pub fn combine(self, raw: &[f64]) -> Result<CombinedResult> {
        match self {
            Method::Bonf => bonferroni(raw),
            Method::Bh => benjamini_hochberg(raw),
            Method::Hmp => harmonic_mean_p(raw),
            Method::Cct => cauchy_combination(raw),
            Method::HmpRaw => harmonic_mean_raw(raw),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Bonf => "bonf",
            Method::Bh => "bh",
            Method::Hmp => "hmp",
            Method::Cct => "cct",
            Method::HmpRaw => "hmpraw",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "bonf" => Ok(Method::Bonf),
            "bh" => Ok(Method::Bh),
            "hmp" => Ok(Method::Hmp),
            "cct" => Ok(Method::Cct),
            "hmpraw" => Ok(Method::HmpRaw),
            _ => Err(Error::invalid(format!("unknown combination method {s:?}"))),
        }
    }
}

/// Outcome of combining `k` p-values.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinedResult {
    pub method: Method,
    /// Adjusted p-values in input order; empty for `hmp` and `cct`.
    pub adjusted: Vec<f64>,
    pub p_comb: f64,
    /// Zero-based index of the smallest adjusted p-value (`bonf`, `bh`) or
    /// the smallest raw p-value (`hmp`, `cct`); ties go to the lowest index.
    pub winner: usize,
    /// Harmonic mean for `hmp`, Cauchy statistic for `cct`.
    pub statistic: Option<f64>,
}

fn validate(raw: &[f64]) -> Result<()> {
    if raw.is_empty() {
        return Err(Error::invalid("no p-values to combine"));
    }
    if let Some(i) = raw.iter().position(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid(format!("p-value {} at index {i} is outside [0, 1]", raw[i])));
    }
    Ok(())
}

fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v < values[best] {
            best = i;
        }
    }
    best
}

pub fn bonferroni(raw: &[f64]) -> Result<CombinedResult> {
    validate(raw)?;
    let k = raw.len() as f64;
    let adjusted: Vec<f64> = raw.iter().map(|p| (k * p).min(1.0)).collect();
    let winner = argmin(&adjusted);
    Ok(CombinedResult {
        method: Method::Bonf,
        p_comb: adjusted[winner],
        adjusted,
        winner,
        statistic: None,
    })
}

/// Step-up adjustment `min(1, min_{h >= r} k p_(h) / h)` over the sorted
/// p-values, mapped back to input order.
pub fn benjamini_hochberg(raw: &[f64]) -> Result<CombinedResult> {
    validate(raw)?;
    let k = raw.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| raw[a].total_cmp(&raw[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; k];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(k as f64 * raw[i] / (rank + 1) as f64);
        adjusted[i] = running;
    }
    let winner = argmin(&adjusted);
    Ok(CombinedResult {
        method: Method::Bh,
        p_comb: adjusted[winner],
        adjusted,
        winner,
        statistic: None,
    })
}

/// Harmonic mean `k / sum(1/p)`, calibrated as the upper tail of its
/// reciprocal under a totally skewed stable law with location
/// `ln k + 0.874` and scale `pi/2`. A zero p-value yields `p_comb = 0`.
pub fn harmonic_mean_p(raw: &[f64]) -> Result<CombinedResult> {
    let mut r = harmonic_mean_raw(raw)?;
    r.method = Method::Hmp;
    if let Some(hmp) = r.statistic {
        r.p_comb = hmp_calibrate(hmp, raw.len());
    }
    Ok(r)
}

/// Harmonic mean `k / sum(1/p)` reported as is; anti-conservative for
/// large `k` compared with [`harmonic_mean_p`].
pub fn harmonic_mean_raw(raw: &[f64]) -> Result<CombinedResult> {
    validate(raw)?;
    let winner = argmin(raw);
    if raw[winner] == 0.0 {
        return Ok(CombinedResult {
            method: Method::HmpRaw,
            adjusted: Vec::new(),
            p_comb: 0.0,
            winner,
            statistic: Some(0.0),
        });
    }
    let k = raw.len() as f64;
    let hmp = k / raw.iter().map(|p| 1.0 / p).sum::<f64>();
    Ok(CombinedResult {
        method: Method::HmpRaw,
        adjusted: Vec::new(),
        p_comb: hmp.clamp(0.0, 1.0),
        winner,
        statistic: Some(hmp),
    })
}

/// Calibrated p-value of a harmonic mean `hmp` of `k` p-values.
pub fn hmp_calibrate(hmp: f64, k: usize) -> f64 {
    if hmp <= 0.0 {
        return 0.0;
    }
    let location = (k as f64).ln() + HMP_LOCATION_OFFSET;
    landau::upper_tail(1.0 / hmp, location, FRAC_PI_2).clamp(0.0, 1.0)
}

const CCT_CLIP: f64 = 1e-15;

/// `T = mean(tan((0.5 - p) pi))`, `p_comb = 1/2 - atan(T) / pi`, after
/// clipping p-values to `[1e-15, 1 - 1e-15]`.
pub fn cauchy_combination(raw: &[f64]) -> Result<CombinedResult> {
    validate(raw)?;
    let winner = argmin(raw);
    let t = raw
        .iter()
        .map(|&p| {
            let p = p.clamp(CCT_CLIP, 1.0 - CCT_CLIP);
            // tan((0.5 - p) pi) = cot(p pi), evaluated on the near side
            if p <= 0.5 {
                1.0 / (p * PI).tan()
            } else {
                -1.0 / ((1.0 - p) * PI).tan()
            }
        })
        .sum::<f64>()
        / raw.len() as f64;
    let p_comb = if t > 0.0 { (1.0 / t).atan() / PI } else { 0.5 - t.atan() / PI };
    Ok(CombinedResult {
        method: Method::Cct,
        adjusted: Vec::new(),
        p_comb: p_comb.clamp(0.0, 1.0),
        winner,
        statistic: Some(t),
    })
}

//! End-to-end detection: project, test each projection, combine, locate.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::combine::{CombinedResult, Method};
use crate::cusum::{
    self, candidate_window, cusum_profile, CusumProfile, Degeneracy, NullCache, NullKey, TrimSpec, Variant,
    VarianceKind,
};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::projection::{generate_directions, project, ProjectionMatrix};
use crate::rng;

/// Parameters of the simulated weighted-CUSUM null.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NullSettings {
    pub replications: usize,
    pub increments: usize,
    pub seed: u64,
}

impl Default for NullSettings {
    fn default() -> Self {
        Self {
            replications: cusum::DEFAULT_REPLICATIONS,
            increments: cusum::DEFAULT_INCREMENTS,
            seed: cusum::DEFAULT_NULL_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorConfig {
    pub k: usize,
    pub variant: Variant,
    pub variance_kind: VarianceKind,
    /// Only consulted by the weighted variant.
    pub trim: TrimSpec,
    pub method: Method,
    /// Significance level in `(0, 1]`; a level of one rejects every run.
    pub alpha: f64,
    pub seed: u64,
    pub null: NullSettings,
    pub per_projection: bool,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            k: 200,
            variant: Variant::Standard,
            variance_kind: VarianceKind::Split,
            trim: TrimSpec::LogN,
            method: Method::Bonf,
            alpha: 0.05,
            seed: 0,
            null: NullSettings::default(),
            per_projection: false,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::invalid("k must be at least 1"));
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::invalid(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        Ok(())
    }

    pub fn is_significant(&self, p_comb: f64) -> bool {
        self.alpha >= 1.0 || p_comb < self.alpha
    }
}

/// One row of the optional per-projection audit table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionRow {
    pub raw_p: f64,
    pub adjusted_p: Option<f64>,
    pub sup_stat: f64,
    pub arg_sup: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DetectionReport {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub method: Method,
    pub variant: Variant,
    pub p_comb: f64,
    pub significant: bool,
    /// Last time index (1-based) before the estimated change.
    pub z_hat: usize,
    pub theta_hat: f64,
    /// Zero-based index of the projection used for location.
    pub winner: usize,
    /// Every projected series was constant, so nothing was tested.
    pub degenerate: bool,
    pub per_projection: Option<Vec<ProjectionRow>>,
}

/// Profiles and raw p-values of every projection, before combination.
#[derive(Debug, Clone)]
pub struct ProjectionAnalysis {
    n: usize,
    p: usize,
    profiles: Vec<CusumProfile>,
    raw: Vec<f64>,
}

impl ProjectionAnalysis {
    pub fn profiles(&self) -> &[CusumProfile] {
        &self.profiles
    }

    pub fn raw_pvalues(&self) -> &[f64] {
        &self.raw
    }

    fn all_flat(&self) -> bool {
        self.profiles.iter().all(|p| p.degeneracy() == Degeneracy::Flat)
    }

    /// Combines with `method` and locates the change on the winning profile.
    pub fn report(&self, cfg: &DetectorConfig, method: Method) -> Result<DetectionReport> {
        let combined = method.combine(&self.raw)?;
        let winner_profile = &self.profiles[combined.winner];
        let degenerate = self.all_flat();
        let (p_comb, z_hat) = if degenerate {
            (1.0, (winner_profile.z_lo() + winner_profile.z_hi()) / 2)
        } else {
            (combined.p_comb, winner_profile.arg_sup())
        };
        let per_projection = cfg.per_projection.then(|| self.rows(&combined));
        Ok(DetectionReport {
            n: self.n,
            p: self.p,
            k: self.profiles.len(),
            method,
            variant: winner_profile.variant(),
            p_comb,
            significant: cfg.is_significant(p_comb),
            z_hat,
            theta_hat: z_hat as f64 / self.n as f64,
            winner: combined.winner,
            degenerate,
            per_projection,
        })
    }

    fn rows(&self, combined: &CombinedResult) -> Vec<ProjectionRow> {
        self.profiles
            .iter()
            .zip(&self.raw)
            .enumerate()
            .map(|(r, (prof, &raw_p))| ProjectionRow {
                raw_p,
                adjusted_p: combined.adjusted.get(r).copied(),
                sup_stat: prof.sup_stat(),
                arg_sup: prof.arg_sup(),
            })
            .collect()
    }
}

/// Projects `x` on `directions` and tests every projected series.
pub fn analyze(
    x: &DataMatrix,
    cfg: &DetectorConfig,
    directions: &ProjectionMatrix,
    nulls: &NullCache,
) -> Result<ProjectionAnalysis> {
    cfg.validate()?;
    let n = x.n();
    let (z_lo, _) = candidate_window(n, cfg.variant, cfg.trim)?;
    let y = project(x, directions)?;
    let null = match cfg.variant {
        Variant::Standard => None,
        Variant::Weighted => {
            let key = NullKey::new(
                Variant::Weighted,
                z_lo as f64 / n as f64,
                cfg.null.replications,
                cfg.null.increments,
                cfg.null.seed,
            );
            Some(nulls.get(key, false)?.0)
        }
    };
    let mut profiles = Vec::with_capacity(directions.k());
    let mut raw = Vec::with_capacity(directions.k());
    for series in y.iter() {
        let profile = cusum_profile(series, cfg.variant, cfg.variance_kind, cfg.trim)?;
        let p = match &null {
            None => cusum::standard_pvalue(profile.sup_stat()),
            Some(null) => cusum::weighted_pvalue(profile.sup_stat(), null, profile.trim_fraction())?,
        };
        profiles.push(profile);
        raw.push(p);
    }
    Ok(ProjectionAnalysis {
        n,
        p: x.p(),
        profiles,
        raw,
    })
}

/// Runs the detector with directions drawn from `cfg.seed`.
pub fn detect(x: &DataMatrix, cfg: &DetectorConfig) -> Result<DetectionReport> {
    detect_with_cache(x, cfg, NullCache::global())
}

pub fn detect_with_cache(x: &DataMatrix, cfg: &DetectorConfig, nulls: &NullCache) -> Result<DetectionReport> {
    cfg.validate()?;
    let directions = generate_directions(x.p(), cfg.k, cfg.seed)?;
    analyze(x, cfg, &directions, nulls)?.report(cfg, cfg.method)
}

/// Runs the detector on caller-supplied directions; `cfg.k` and `cfg.seed`
/// are ignored.
pub fn detect_with_directions(x: &DataMatrix, cfg: &DetectorConfig, directions: &ProjectionMatrix) -> Result<DetectionReport> {
    analyze(x, cfg, directions, NullCache::global())?.report(cfg, cfg.method)
}

/// One report per method, sharing the same directions and profiles.
pub fn detect_methods(x: &DataMatrix, cfg: &DetectorConfig, methods: &[Method], nulls: &NullCache) -> Result<Vec<DetectionReport>> {
    cfg.validate()?;
    let directions = generate_directions(x.p(), cfg.k, cfg.seed)?;
    let analysis = analyze(x, cfg, &directions, nulls)?;
    methods.iter().map(|&m| analysis.report(cfg, m)).collect()
}

/// Locations from repeated runs and their modal value.
#[derive(Debug, Clone, PartialEq)]
pub struct RepetitionSummary {
    pub locations: Vec<usize>,
    pub significant_mask: Vec<bool>,
    pub mode: usize,
    pub mode_count: usize,
    pub histogram: BTreeMap<usize, usize>,
}

impl RepetitionSummary {
    pub fn from_locations(locations: Vec<usize>, significant_mask: Vec<bool>) -> Result<Self> {
        if locations.is_empty() {
            return Err(Error::invalid("no repetitions"));
        }
        if significant_mask.len() != locations.len() {
            return Err(Error::DimensionMismatch("significance mask length differs from locations".into()));
        }
        let histogram = histogram(&locations);
        let (mode, mode_count) = mode_of(&histogram).expect("non-empty");
        Ok(Self {
            locations,
            significant_mask,
            mode,
            mode_count,
            histogram,
        })
    }

    pub fn repetitions(&self) -> usize {
        self.locations.len()
    }

    /// Histogram and mode over significant repetitions only.
    pub fn significant_only(&self) -> Option<(BTreeMap<usize, usize>, usize, usize)> {
        let kept: Vec<usize> = self
            .locations
            .iter()
            .zip(&self.significant_mask)
            .filter_map(|(&z, &s)| s.then_some(z))
            .collect();
        let h = histogram(&kept);
        let (mode, count) = mode_of(&h)?;
        Some((h, mode, count))
    }
}

fn histogram(locations: &[usize]) -> BTreeMap<usize, usize> {
    let mut h = BTreeMap::new();
    for &z in locations {
        *h.entry(z).or_insert(0) += 1;
    }
    h
}

/// Most frequent location, smallest on ties.
fn mode_of(h: &BTreeMap<usize, usize>) -> Option<(usize, usize)> {
    let mut best: Option<(usize, usize)> = None;
    for (&z, &c) in h {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((z, c));
        }
    }
    best
}

/// Seed used by repetition `rep` of a run seeded with `seed`.
pub fn repetition_seed(seed: u64, rep: usize) -> u64 {
    rng::derive_seed(seed, &[rep as u64])
}

/// Runs [`detect`] `reps` times with per-repetition seeds derived from
/// `cfg.seed` and summarises all locations, significant or not.
pub fn detect_repeated(x: &DataMatrix, cfg: &DetectorConfig, reps: usize) -> Result<RepetitionSummary> {
    detect_repeated_with_cache(x, cfg, reps, NullCache::global())
}

pub fn detect_repeated_with_cache(
    x: &DataMatrix,
    cfg: &DetectorConfig,
    reps: usize,
    nulls: &NullCache,
) -> Result<RepetitionSummary> {
    if reps == 0 {
        return Err(Error::invalid("need at least one repetition"));
    }
    cfg.validate()?;
    let runs: Vec<(usize, bool)> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let cfg = DetectorConfig {
                seed: repetition_seed(cfg.seed, rep),
                per_projection: false,
                ..cfg.clone()
            };
            detect_with_cache(x, &cfg, nulls).map(|r| (r.z_hat, r.significant))
        })
        .collect::<Result<_>>()?;
    let (locations, mask) = runs.into_iter().unzip();
    RepetitionSummary::from_locations(locations, mask)
}

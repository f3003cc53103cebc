//! Simulated null distributions of sup-CUSUM functionals of a Brownian
//! bridge, with an in-memory and on-disk cache.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::Variant;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_REPLICATIONS: usize = 100_000;
pub const DEFAULT_INCREMENTS: usize = 10_000;
pub const DEFAULT_NULL_SEED: u64 = 0x5EED_B41D_6E00;

const HEADER: &str = "variant,trim_fraction,replications,increments,seed";

/// Sorted simulated sup statistics under the null.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDistribution {
    variant: Variant,
    trim_fraction: f64,
    replications: usize,
    increments: usize,
    seed: u64,
    samples: Vec<f64>,
}

/// Parameters identifying one simulated null.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NullKey {
    pub variant: Variant,
    /// Trim fraction in millionths.
    pub trim_micros: u64,
    pub replications: usize,
    pub increments: usize,
    pub seed: u64,
}

impl NullKey {
    pub fn new(variant: Variant, trim_fraction: f64, replications: usize, increments: usize, seed: u64) -> Self {
        Self {
            variant,
            trim_micros: (trim_fraction * 1e6).round() as u64,
            replications,
            increments,
            seed,
        }
    }

    pub fn trim_fraction(&self) -> f64 {
        self.trim_micros as f64 / 1e6
    }

    /// File name used inside a cache directory.
    pub fn file_name(&self) -> String {
        format!(
            "null-{}-trim{:.6}-r{}-i{}-s{}.csv",
            self.variant,
            self.trim_fraction(),
            self.replications,
            self.increments,
            self.seed
        )
    }
}

impl fmt::Display for NullKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} trim={:.6} replications={} increments={} seed={}",
            self.variant,
            self.trim_fraction(),
            self.replications,
            self.increments,
            self.seed
        )
    }
}

/// Simulates `replications` Brownian bridges on an `increments`-step grid
/// and records the sup of `|B(t)|` (standard) or `|B(t)| / sqrt(t(1-t))`
/// (weighted) over grid points with `trim_fraction <= t <= 1 - trim_fraction`.
///
/// Replication `i` draws from stream `i` of `seed`, so the result does not
/// depend on thread scheduling.
pub fn simulate_null(
    variant: Variant,
    trim_fraction: f64,
    replications: usize,
    increments: usize,
    seed: u64,
) -> Result<NullDistribution> {
    if replications < 1000 {
        return Err(Error::invalid(format!("need at least 1000 replications, got {replications}")));
    }
    if increments < 100 {
        return Err(Error::invalid(format!("need at least 100 increments, got {increments}")));
    }
    if !(0.0..0.5).contains(&trim_fraction) {
        return Err(Error::invalid(format!("trim fraction {trim_fraction} outside [0, 1/2)")));
    }
    if variant == Variant::Weighted && trim_fraction == 0.0 {
        return Err(Error::invalid("weighted null needs a positive trim fraction"));
    }
    let m = increments;
    let lo = ((trim_fraction * m as f64) - 1e-9).ceil().max(0.0) as usize;
    let hi = m - lo;
    let step_sd = (1.0 / m as f64).sqrt();
    // 1/sqrt(t(1-t)) on the grid, or ones for the standard functional
    let weights: Vec<f64> = (0..=m)
        .map(|j| match variant {
            Variant::Standard => 1.0,
            Variant::Weighted => {
                let t = j as f64 / m as f64;
                if j == 0 || j == m {
                    0.0
                } else {
                    1.0 / (t * (1.0 - t)).sqrt()
                }
            }
        })
        .collect();

    let mut samples: Vec<f64> = (0..replications)
        .into_par_iter()
        .map_init(
            || vec![0.0; m + 1],
            |walk, i| {
                let mut rng = rng::stream(seed, i as u64);
                let mut w = 0.0;
                walk[0] = 0.0;
                for slot in walk.iter_mut().skip(1) {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    w += step_sd * z;
                    *slot = w;
                }
                let end = walk[m];
                let mut sup = 0.0f64;
                for j in lo..=hi {
                    let t = j as f64 / m as f64;
                    let b = (walk[j] - t * end).abs() * weights[j];
                    sup = sup.max(b);
                }
                sup
            },
        )
        .collect();
    samples.sort_by(f64::total_cmp);
    Ok(NullDistribution {
        variant,
        trim_fraction,
        replications,
        increments,
        seed,
        samples,
    })
}

impl NullDistribution {
    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn trim_fraction(&self) -> f64 {
        self.trim_fraction
    }

    pub fn replications(&self) -> usize {
        self.replications
    }

    pub fn increments(&self) -> usize {
        self.increments
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn key(&self) -> NullKey {
        NullKey::new(self.variant, self.trim_fraction, self.replications, self.increments, self.seed)
    }

    /// `(1 + #{samples >= x}) / (R + 1)`.
    pub fn upper_tail(&self, x: f64) -> f64 {
        let below = self.samples.partition_point(|&s| s < x);
        let at_or_above = self.samples.len() - below;
        (1 + at_or_above) as f64 / (self.samples.len() + 1) as f64
    }

    /// Empirical quantile: smallest sample with ECDF at least `q`.
    pub fn quantile(&self, q: f64) -> f64 {
        let r = self.samples.len();
        let idx = ((q * r as f64).ceil() as usize).clamp(1, r) - 1;
        self.samples[idx]
    }

    /// Writes the cache file: a header line, one metadata line, then one
    /// sorted sample per line in round-trip float notation.
    pub fn write<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{HEADER}")?;
        writeln!(
            w,
            "{},{:.6},{},{},{}",
            self.variant, self.trim_fraction, self.replications, self.increments, self.seed
        )?;
        writeln!(w, "sample")?;
        for s in &self.samples {
            writeln!(w, "{s}")?;
        }
        Ok(())
    }

    pub fn read<R: BufRead>(reader: R) -> Result<Self> {
        let mut lines = reader.lines();
        let mut line = |what: &str| -> Result<String> {
            lines
                .next()
                .ok_or_else(|| Error::Format(format!("null cache: missing {what}")))?
                .map_err(|e| Error::Format(format!("null cache: {e}")))
        };
        if line("header")?.trim() != HEADER {
            return Err(Error::Format("null cache: bad header".into()));
        }
        let meta = line("metadata")?;
        let f: Vec<&str> = meta.trim().split(',').collect();
        if f.len() != 5 {
            return Err(Error::Format("null cache: bad metadata line".into()));
        }
        let bad = |what: &str| Error::Format(format!("null cache: bad {what}"));
        let variant: Variant = f[0].parse()?;
        let trim_fraction: f64 = f[1].parse().map_err(|_| bad("trim_fraction"))?;
        let replications: usize = f[2].parse().map_err(|_| bad("replications"))?;
        let increments: usize = f[3].parse().map_err(|_| bad("increments"))?;
        let seed: u64 = f[4].parse().map_err(|_| bad("seed"))?;
        if line("sample header")?.trim() != "sample" {
            return Err(bad("sample header"));
        }
        let mut samples = Vec::with_capacity(replications);
        for l in lines {
            let l = l.map_err(|e| Error::Format(format!("null cache: {e}")))?;
            if l.trim().is_empty() {
                continue;
            }
            samples.push(l.trim().parse::<f64>().map_err(|_| bad("sample"))?);
        }
        if samples.len() != replications {
            return Err(Error::Format(format!(
                "null cache: {} samples but header says {replications}",
                samples.len()
            )));
        }
        if samples.windows(2).any(|w| w[0] > w[1]) {
            return Err(bad("sample order"));
        }
        Ok(Self {
            variant,
            trim_fraction,
            replications,
            increments,
            seed,
            samples,
        })
    }

    pub fn read_path(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read(BufReader::new(file))
    }

    pub fn write_path(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        self.write(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Where a null distribution came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CacheStatus {
    Memory,
    Disk,
    Simulated,
}

/// Process-wide memo of simulated nulls, optionally backed by a directory.
#[derive(Debug, Default)]
pub struct NullCache {
    dir: Option<PathBuf>,
    memory: Mutex<HashMap<NullKey, Arc<NullDistribution>>>,
}

impl NullCache {
    pub fn new(dir: Option<PathBuf>) -> Self {
        Self {
            dir,
            memory: Mutex::new(HashMap::new()),
        }
    }

    /// Shared in-memory cache with no disk backing.
    pub fn global() -> &'static NullCache {
        static GLOBAL: OnceLock<NullCache> = OnceLock::new();
        GLOBAL.get_or_init(NullCache::default)
    }

    pub fn dir(&self) -> Option<&Path> {
        self.dir.as_deref()
    }

    /// Returns the cached null for `key`, simulating (and persisting, when a
    /// directory is configured) on a miss. `force` skips both cache layers.
    pub fn get(&self, key: NullKey, force: bool) -> Result<(Arc<NullDistribution>, CacheStatus)> {
        if !force {
            if let Some(hit) = self.memory.lock().expect("null cache poisoned").get(&key) {
                return Ok((Arc::clone(hit), CacheStatus::Memory));
            }
            if let Some(dir) = &self.dir {
                let path = dir.join(key.file_name());
                if path.exists() {
                    let null = NullDistribution::read_path(&path)?;
                    if null.key() != key {
                        return Err(Error::Format(format!(
                            "cache file {} does not match {key}",
                            path.display()
                        )));
                    }
                    let null = Arc::new(null);
                    self.memory.lock().expect("null cache poisoned").insert(key, Arc::clone(&null));
                    return Ok((null, CacheStatus::Disk));
                }
            }
        }
        let null = Arc::new(simulate_null(
            key.variant,
            key.trim_fraction(),
            key.replications,
            key.increments,
            key.seed,
        )?);
        if let Some(dir) = &self.dir {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
            null.write_path(&dir.join(key.file_name()))?;
        }
        self.memory.lock().expect("null cache poisoned").insert(key, Arc::clone(&null));
        Ok((null, CacheStatus::Simulated))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_in_seed() {
        let a = simulate_null(Variant::Weighted, 0.1, 1000, 200, 3).unwrap();
        let b = simulate_null(Variant::Weighted, 0.1, 1000, 200, 3).unwrap();
        assert_eq!(a.samples(), b.samples());
        let c = simulate_null(Variant::Weighted, 0.1, 1000, 200, 4).unwrap();
        assert_ne!(a.samples(), c.samples());
    }

    #[test]
    fn argument_validation() {
        assert!(simulate_null(Variant::Weighted, 0.0, 1000, 100, 0).is_err());
        assert!(simulate_null(Variant::Standard, 0.5, 1000, 100, 0).is_err());
        assert!(simulate_null(Variant::Standard, 0.0, 999, 100, 0).is_err());
        assert!(simulate_null(Variant::Standard, 0.0, 1000, 99, 0).is_err());
    }

    #[test]
    fn wider_trim_is_stochastically_smaller() {
        let a = simulate_null(Variant::Weighted, 0.02, 2000, 500, 9).unwrap();
        let b = simulate_null(Variant::Weighted, 0.1, 2000, 500, 9).unwrap();
        assert!(a.quantile(0.95) >= b.quantile(0.95));
        for (x, y) in a.samples().iter().zip(b.samples()) {
            assert!(x >= y);
        }
    }

    #[test]
    fn empirical_tail_rules() {
        let null = simulate_null(Variant::Weighted, 0.06, 1001, 200, 1).unwrap();
        assert_eq!(null.upper_tail(0.0), 1.0);
        let max = *null.samples().last().unwrap();
        assert_eq!(null.upper_tail(max * 1.01), 1.0 / 1002.0);
        assert_eq!(null.upper_tail(f64::INFINITY), 1.0 / 1002.0);
        let median = null.samples()[500];
        assert!((null.upper_tail(median) - 0.5).abs() < 0.01);
    }

    #[test]
    fn cache_file_round_trip_and_disk_hit() {
        let dir = tempfile::tempdir().unwrap();
        let cache = NullCache::new(Some(dir.path().to_path_buf()));
        let key = NullKey::new(Variant::Weighted, 0.06, 1000, 100, 5);
        let (first, status) = cache.get(key, false).unwrap();
        assert_eq!(status, CacheStatus::Simulated);
        let (_, status) = cache.get(key, false).unwrap();
        assert_eq!(status, CacheStatus::Memory);
        let fresh = NullCache::new(Some(dir.path().to_path_buf()));
        let (disk, status) = fresh.get(key, false).unwrap();
        assert_eq!(status, CacheStatus::Disk);
        assert_eq!(disk.samples(), first.samples());
        let bytes = std::fs::read(dir.path().join(key.file_name())).unwrap();
        let mut again = Vec::new();
        disk.write(&mut again).unwrap();
        assert_eq!(bytes, again);
    }
}

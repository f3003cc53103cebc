//! Declarative experiment description, read from TOML.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::combine::Method;
use crate::cusum::{self, TrimSpec, Variant, VarianceKind};
use crate::detector::{DetectorConfig, NullSettings};
use crate::error::{Error, Result};
use crate::simgen::{GeneratorConfig, Setting};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Size,
    Power,
    AdjPower,
    Rmse,
    RmseSig,
    Repetition,
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Size => "size",
            Metric::Power => "power",
            Metric::AdjPower => "adj_power",
            Metric::Rmse => "rmse",
            Metric::RmseSig => "rmse_sig",
            Metric::Repetition => "repetition",
        })
    }
}

/// Generator fields shared by every grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorTemplate {
    pub n: usize,
    pub grid_p: usize,
    pub n_basis: usize,
    pub noise_scale: f64,
}

impl Default for GeneratorTemplate {
    fn default() -> Self {
        let g = GeneratorConfig::default();
        Self {
            n: g.n,
            grid_p: g.grid_p,
            n_basis: g.n_basis,
            noise_scale: g.noise_scale,
        }
    }
}

/// Detector fields shared by every grid cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DetectorTemplate {
    pub variance: VarianceKind,
    pub trim: TrimSpec,
    pub null_replications: usize,
    pub null_increments: usize,
    pub null_seed: u64,
}

impl Default for DetectorTemplate {
    fn default() -> Self {
        Self {
            variance: VarianceKind::Split,
            trim: TrimSpec::LogN,
            null_replications: cusum::DEFAULT_REPLICATIONS,
            null_increments: cusum::DEFAULT_INCREMENTS,
            null_seed: cusum::DEFAULT_NULL_SEED,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepetitionSpec {
    /// Datasets generated per grid cell.
    pub datasets: usize,
    /// Detector repetitions per dataset.
    pub repetitions: usize,
}

impl Default for RepetitionSpec {
    fn default() -> Self {
        Self {
            datasets: 1,
            repetitions: 1000,
        }
    }
}

/// A full factorial grid of generator and detector settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentSpec {
    /// Stem of the output files.
    pub name: String,
    /// Master seed; every dataset and detector seed is derived from it.
    pub seed: u64,
    pub replications: usize,
    pub alpha: f64,
    pub metrics: Vec<Metric>,
    pub settings: Vec<Setting>,
    pub m_grid: Vec<usize>,
    pub theta_grid: Vec<f64>,
    pub snr_grid: Vec<f64>,
    pub k_grid: Vec<usize>,
    pub methods: Vec<Method>,
    pub variants: Vec<Variant>,
    pub generator: GeneratorTemplate,
    pub detector: DetectorTemplate,
    pub repetition: RepetitionSpec,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            name: "experiment".into(),
            seed: 0,
            replications: 1000,
            alpha: 0.05,
            metrics: vec![Metric::Size],
            settings: vec![Setting::S1],
            m_grid: vec![5],
            theta_grid: vec![0.25],
            snr_grid: vec![0.0],
            k_grid: vec![200],
            methods: vec![Method::Bonf],
            variants: vec![Variant::Standard],
            generator: GeneratorTemplate::default(),
            detector: DetectorTemplate::default(),
            repetition: RepetitionSpec::default(),
        }
    }
}

impl ExperimentSpec {
    /// Parses TOML; unknown keys anywhere in the document are an error.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let mut unknown = Vec::new();
        let de = toml::Deserializer::new(text);
        let spec: Self = serde_ignored::deserialize(de, |path| unknown.push(path.to_string()))
            .map_err(|e| Error::Config(e.to_string()))?;
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown keys: {}", unknown.join(", "))));
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("spec is always serialisable")
    }

    pub fn has(&self, m: Metric) -> bool {
        self.metrics.contains(&m)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return bad(format!("alpha {} outside (0, 1]", self.alpha));
        }
        for (name, empty) in [
            ("metrics", self.metrics.is_empty()),
            ("settings", self.settings.is_empty()),
            ("m_grid", self.m_grid.is_empty()),
            ("theta_grid", self.theta_grid.is_empty()),
            ("snr_grid", self.snr_grid.is_empty()),
            ("k_grid", self.k_grid.is_empty()),
            ("methods", self.methods.is_empty()),
            ("variants", self.variants.is_empty()),
        ] {
            if empty {
                return bad(format!("{name} must not be empty"));
            }
        }
        if self.k_grid.contains(&0) {
            return bad("k_grid entries must be at least 1".into());
        }
        if self.has(Metric::Repetition) && (self.repetition.datasets == 0 || self.repetition.repetitions == 0) {
            return bad("repetition.datasets and repetition.repetitions must be at least 1".into());
        }
        for &setting in &self.settings {
            for &m in &self.m_grid {
                for &theta in &self.theta_grid {
                    for &snr in &self.snr_grid {
                        self.generator_config(setting, m, theta, snr, 0)
                            .validate()
                            .map_err(|e| Error::Config(e.to_string()))?;
                    }
                }
            }
        }
        Ok(())
    }

    pub fn generator_config(&self, setting: Setting, m: usize, theta: f64, snr: f64, seed: u64) -> GeneratorConfig {
        GeneratorConfig {
            n: self.generator.n,
            grid_p: self.generator.grid_p,
            n_basis: self.generator.n_basis,
            setting,
            m,
            snr,
            theta,
            seed,
            noise_scale: self.generator.noise_scale,
        }
    }

    pub fn detector_config(&self, k: usize, variant: Variant, method: Method, seed: u64) -> DetectorConfig {
        DetectorConfig {
            k,
            variant,
            variance_kind: self.detector.variance,
            trim: self.detector.trim,
            method,
            alpha: self.alpha,
            seed,
            null: NullSettings {
                replications: self.detector.null_replications,
                increments: self.detector.null_increments,
                seed: self.detector.null_seed,
            },
            per_projection: false,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_minimal_and_defaults() {
        let s = ExperimentSpec::from_toml_str("name = \"x\"\nsnr_grid = [0.0, 0.5]\n").unwrap();
        assert_eq!(s.name, "x");
        assert_eq!(s.snr_grid, vec![0.0, 0.5]);
        assert_eq!(s.k_grid, vec![200]);
        assert_eq!(s.generator.n, 50);
    }

    #[test]
    fn full_document() {
        let text = r#"
name = "t"
seed = 7
replications = 10
metrics = ["size", "adj_power", "rmse", "rmse_sig", "repetition"]
settings = ["S1", "S3"]
methods = ["bonf", "bh", "hmp", "cct"]
variants = ["cusum", "weighted"]

[generator]
n = 60

[detector]
variance = "hac"
trim = "sqrtn"
null_replications = 2000

[repetition]
repetitions = 5
"#;
        let s = ExperimentSpec::from_toml_str(text).unwrap();
        assert_eq!(s.variants, vec![Variant::Standard, Variant::Weighted]);
        assert_eq!(s.detector.trim, TrimSpec::SqrtN);
        assert_eq!(s.generator.n, 60);
        assert!(s.has(Metric::RmseSig));
        let again = ExperimentSpec::from_toml_str(&s.to_toml_string()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn unknown_keys_are_listed() {
        let err = ExperimentSpec::from_toml_str("replicatons = 5\n[generator]\nnn = 3\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("replicatons"), "{msg}");
        assert!(msg.contains("generator.nn"), "{msg}");
    }

    #[test]
    fn invalid_values() {
        assert!(ExperimentSpec::from_toml_str("replications = 0").is_err());
        assert!(ExperimentSpec::from_toml_str("snr_grid = []").is_err());
        assert!(ExperimentSpec::from_toml_str("alpha = 0.0").is_err());
        assert!(ExperimentSpec::from_toml_str("snr_grid = [1.0]\ntheta_grid = [1.5]").is_err());
        assert!(ExperimentSpec::from_toml_str("metrics = [\"speed\"]").is_err());
    }
}

//! Command-line front end.
//!
//! Exit codes: 0 on success, 2 when `detect` finds a significant change,
//! 1 on any error.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rpcpd::cusum::{self, CacheStatus, NullCache, NullKey, TrimSpec, Variant, VarianceKind};
use rpcpd::detector::{detect_repeated_with_cache, detect_with_cache, DetectorConfig, NullSettings};
use rpcpd::harness::{self, ExperimentSpec};
use rpcpd::report;
use rpcpd::simgen::{self, GeneratorConfig, Setting};
use rpcpd::yearly::{self, MissingPolicy, YearlyMatrix};
use rpcpd::{DataMatrix, Error, Method, Result};

#[derive(Parser)]
#[command(name = "rpcpd", version, about = "Change-point detection in high-dimensional series via random projections")]
struct Cli {
    /// Seed for everything random in the command.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test one dataset for a mean change and locate it.
    Detect(DetectArgs),
    /// Repeat detection with fresh directions and report the modal location.
    Repeat(RepeatArgs),
    /// Turn daily `date,value` records into a years x 365 matrix.
    ReshapeYearly(ReshapeArgs),
    /// Run a simulation experiment described by a TOML file.
    Simulate(SimulateArgs),
    /// Generate one synthetic functional dataset.
    Generate(GenerateArgs),
    /// Simulate (or load) a Brownian-bridge null distribution.
    Nulldist(NulldistArgs),
}

#[derive(Args)]
struct InputArgs {
    /// CSV of n rows by p columns.
    input: PathBuf,
    /// The first row is a header.
    #[arg(long)]
    header: bool,
    /// Input is a yearly matrix written by reshape-yearly.
    #[arg(long, conflicts_with = "header")]
    yearly: bool,
}

#[derive(Args)]
struct DetectorArgs {
    #[arg(long, default_value_t = 200)]
    k: usize,
    #[arg(long, default_value = "cusum")]
    variant: Variant,
    #[arg(long, default_value = "split")]
    variance: VarianceKind,
    /// 1, n025, logn, sqrtn or an integer.
    #[arg(long, default_value = "logn")]
    trim: TrimSpec,
    #[arg(long, default_value = "bonf")]
    method: Method,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = cusum::DEFAULT_REPLICATIONS)]
    null_replications: usize,
    #[arg(long, default_value_t = cusum::DEFAULT_INCREMENTS)]
    null_increments: usize,
    #[arg(long, default_value_t = cusum::DEFAULT_NULL_SEED)]
    null_seed: u64,
    /// Directory for cached weighted-CUSUM nulls.
    #[arg(long, env = "RPCPD_NULL_CACHE", default_value = ".rpcpd-nulls")]
    null_cache: PathBuf,
}

impl DetectorArgs {
    fn config(&self, seed: u64) -> DetectorConfig {
        DetectorConfig {
            k: self.k,
            variant: self.variant,
            variance_kind: self.variance,
            trim: self.trim,
            method: self.method,
            alpha: self.alpha,
            seed,
            null: NullSettings {
                replications: self.null_replications,
                increments: self.null_increments,
                seed: self.null_seed,
            },
            per_projection: false,
        }
    }
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Format {
    Kv,
    Csv,
}

#[derive(Args)]
struct DetectArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    #[arg(long, value_enum, default_value = "kv")]
    format: Format,
    /// Also write the per-projection table to this file.
    #[arg(long)]
    per_projection: Option<PathBuf>,
}

#[derive(Args)]
struct RepeatArgs {
    #[command(flatten)]
    input: InputArgs,
    #[command(flatten)]
    detector: DetectorArgs,
    /// Number of repetitions.
    #[arg(long, default_value_t = 1000)]
    reps: usize,
    /// Row labels, as `FIRST..LAST` or a comma list; location z maps to the
    /// z-th label.
    #[arg(long)]
    labels: Option<String>,
    /// Where to write the `location,count` histogram.
    #[arg(long, default_value = "histogram.csv")]
    histogram: PathBuf,
}

#[derive(Args)]
struct ReshapeArgs {
    /// Daily `date,value` CSV with ISO dates.
    input: PathBuf,
    #[arg(long, short)]
    output: PathBuf,
    /// Station identifier; defaults to the input file stem.
    #[arg(long)]
    station: Option<String>,
    /// Fill missing days by linear interpolation instead of dropping years.
    #[arg(long)]
    interpolate: bool,
}

#[derive(Args)]
struct SimulateArgs {
    spec: PathBuf,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, env = "RPCPD_NULL_CACHE", default_value = ".rpcpd-nulls")]
    null_cache: PathBuf,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, default_value = "S1")]
    setting: Setting,
    #[arg(long, default_value_t = 50)]
    n: usize,
    #[arg(long, default_value_t = 101)]
    grid_p: usize,
    #[arg(long, default_value_t = 21)]
    n_basis: usize,
    #[arg(long, default_value_t = 5)]
    m: usize,
    #[arg(long, default_value_t = 0.0)]
    snr: f64,
    #[arg(long, default_value_t = 0.25)]
    theta: f64,
    #[arg(long, default_value_t = 1.0)]
    noise_scale: f64,
    /// Data CSV; metadata goes to the same path with `.json` appended.
    #[arg(long, short)]
    output: PathBuf,
}

#[derive(Args)]
struct NulldistArgs {
    #[arg(long, default_value = "cusum")]
    variant: Variant,
    #[arg(long, default_value_t = 0.0)]
    trim_fraction: f64,
    #[arg(long, default_value_t = cusum::DEFAULT_REPLICATIONS)]
    replications: usize,
    #[arg(long, default_value_t = cusum::DEFAULT_INCREMENTS)]
    increments: usize,
    /// Resimulate even if a cached file exists.
    #[arg(long)]
    force: bool,
    #[arg(long, env = "RPCPD_NULL_CACHE", default_value = ".rpcpd-nulls")]
    null_cache: PathBuf,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let seed = cli.seed;
    match cli.command {
        Command::Detect(a) => cmd_detect(a, seed.unwrap_or(0)),
        Command::Repeat(a) => cmd_repeat(a, seed.unwrap_or(0)),
        Command::ReshapeYearly(a) => cmd_reshape(a),
        Command::Simulate(a) => cmd_simulate(a, seed),
        Command::Generate(a) => cmd_generate(a, seed.unwrap_or(0)),
        Command::Nulldist(a) => cmd_nulldist(a, seed.unwrap_or(cusum::DEFAULT_NULL_SEED)),
    }
}

fn out_err(e: std::io::Error) -> Error {
    Error::Io {
        path: "<stdout>".into(),
        source: e,
    }
}

/// The data plus the first row label when the input carries years.
fn load(input: &InputArgs) -> Result<(DataMatrix, Option<Vec<i64>>)> {
    if input.yearly {
        let m = YearlyMatrix::read_path(&input.input)?;
        let labels = m.years().iter().map(|&y| y as i64).collect();
        Ok((m.to_data_matrix(), Some(labels)))
    } else {
        Ok((DataMatrix::read_csv_path(&input.input, input.header)?, None))
    }
}

fn cmd_detect(a: DetectArgs, seed: u64) -> Result<ExitCode> {
    let (x, _) = load(&a.input)?;
    let mut cfg = a.detector.config(seed);
    cfg.per_projection = a.per_projection.is_some();
    let nulls = NullCache::new(Some(a.detector.null_cache.clone()));
    let r = detect_with_cache(&x, &cfg, &nulls)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match a.format {
        Format::Kv => report::write_report_kv(&r, &mut out)?,
        Format::Csv => report::write_report_csv(&r, &mut out)?,
    }
    out.flush().map_err(out_err)?;
    if let Some(path) = &a.per_projection {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        report::write_projection_csv(&r, &mut w)?;
        w.flush().map_err(|e| Error::io(path, e))?;
    }
    Ok(if r.significant { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

/// `1910..1959` or `1910,1911,...`.
fn parse_labels(s: &str) -> Result<Vec<i64>> {
    let bad = || Error::invalid(format!("cannot parse labels {s:?}"));
    if let Some((a, b)) = s.split_once("..") {
        let a: i64 = a.trim().parse().map_err(|_| bad())?;
        let b: i64 = b.trim().trim_start_matches('=').parse().map_err(|_| bad())?;
        if b < a {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    s.split(',').map(|t| t.trim().parse().map_err(|_| bad())).collect()
}

fn cmd_repeat(a: RepeatArgs, seed: u64) -> Result<ExitCode> {
    let (x, file_labels) = load(&a.input)?;
    let labels = match &a.labels {
        Some(s) => Some(parse_labels(s)?),
        None => file_labels,
    };
    if let Some(l) = &labels {
        if l.len() != x.n() {
            return Err(Error::invalid(format!("{} labels for {} rows", l.len(), x.n())));
        }
    }
    let cfg = a.detector.config(seed);
    let nulls = NullCache::new(Some(a.detector.null_cache.clone()));
    let s = detect_repeated_with_cache(&x, &cfg, a.reps, &nulls)?;
    let f = std::fs::File::create(&a.histogram).map_err(|e| Error::io(&a.histogram, e))?;
    let mut w = std::io::BufWriter::new(f);
    report::write_histogram_csv(&s, &mut w)?;
    w.flush().map_err(|e| Error::io(&a.histogram, e))?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    report::write_summary_kv(&s, None, &mut out)?;
    if let Some(l) = &labels {
        writeln!(out, "mode_label={}", l[s.mode - 1]).map_err(out_err)?;
    }
    out.flush().map_err(out_err)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_reshape(a: ReshapeArgs) -> Result<ExitCode> {
    let records = yearly::read_daily_path(&a.input)?;
    let station = a.station.clone().unwrap_or_else(|| {
        a.input
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let policy = if a.interpolate { MissingPolicy::Interpolate } else { MissingPolicy::Exclude };
    let r = yearly::reshape(&records, &station, policy)?;
    for w in &r.warnings {
        eprintln!("warning: {w}");
    }
    r.matrix.write_path(&a.output)?;
    let years = r.matrix.years();
    println!("years={}", years.len());
    println!("first_year={}", years[0]);
    println!("last_year={}", years[years.len() - 1]);
    Ok(ExitCode::SUCCESS)
}

fn cmd_simulate(a: SimulateArgs, seed: Option<u64>) -> Result<ExitCode> {
    let mut spec = ExperimentSpec::from_path(&a.spec)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let nulls = NullCache::new(Some(a.null_cache.clone()));
    let out = harness::run_experiment(&spec, &nulls)?;
    for p in harness::write_outputs(&spec, &out, &a.out)? {
        println!("wrote {}", p.display());
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(serde::Serialize)]
struct GenerateMeta<'a> {
    config: &'a GeneratorConfig,
    true_z: usize,
    trace: f64,
    c: f64,
}

fn sidecar_path(p: &Path) -> PathBuf {
    let mut s = p.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn cmd_generate(a: GenerateArgs, seed: u64) -> Result<ExitCode> {
    let cfg = GeneratorConfig {
        n: a.n,
        grid_p: a.grid_p,
        n_basis: a.n_basis,
        setting: a.setting,
        m: a.m,
        snr: a.snr,
        theta: a.theta,
        seed,
        noise_scale: a.noise_scale,
    };
    let g = simgen::generate(&cfg)?;
    let f = std::fs::File::create(&a.output).map_err(|e| Error::io(&a.output, e))?;
    let mut w = std::io::BufWriter::new(f);
    g.data.write_csv(&mut w).map_err(|e| Error::io(&a.output, e))?;
    w.flush().map_err(|e| Error::io(&a.output, e))?;

    let meta = GenerateMeta {
        config: &cfg,
        true_z: g.true_z,
        trace: g.trace,
        c: g.breakspec.c,
    };
    let side = sidecar_path(&a.output);
    let mut text = serde_json::to_string_pretty(&meta).map_err(|e| Error::Format(e.to_string()))?;
    text.push('\n');
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))?;
    println!("true_z={}", g.true_z);
    Ok(ExitCode::SUCCESS)
}

fn cmd_nulldist(a: NulldistArgs, seed: u64) -> Result<ExitCode> {
    if a.variant == Variant::Weighted && a.trim_fraction == 0.0 {
        return Err(Error::InvalidArgument("weighted null needs --trim-fraction > 0".into()));
    }
    let key = NullKey::new(a.variant, a.trim_fraction, a.replications, a.increments, seed);
    let cache = NullCache::new(Some(a.null_cache.clone()));
    let path = a.null_cache.join(key.file_name());
    let (null, status) = cache.get(key, a.force)?;
    match status {
        CacheStatus::Disk | CacheStatus::Memory => println!("cache hit: {}", path.display()),
        CacheStatus::Simulated => println!("wrote {}", path.display()),
    }
    for q in [0.90, 0.95, 0.99] {
        println!("q{:.2}={}", q, null.quantile(q));
    }
    Ok(ExitCode::SUCCESS)
}

//! Monte Carlo experiments over a generator × detector grid.
//!
//! Every dataset and detector seed is derived from the master seed and the
//! cell coordinates, so tables are reproducible and cells with different SNR
//! never share random streams. Within a replication the detector seed does
//! not depend on `k`, so the smaller `k` use the leading columns of the
//! larger direction matrices.

pub mod spec;

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use crate::combine::Method;
use crate::cusum::{NullCache, Variant};
use crate::detector::{detect_methods, detect_repeated_with_cache, RepetitionSummary};
use crate::error::{Error, Result};
use crate::rng::derive_seed;
use crate::simgen::{generate, Setting};

pub use spec::{DetectorTemplate, ExperimentSpec, GeneratorTemplate, Metric, RepetitionSpec};

const DATA_STREAM: u64 = 1;
const DETECT_STREAM: u64 = 2;
const REP_DATA_STREAM: u64 = 3;
const REP_DETECT_STREAM: u64 = 4;

/// Grid coordinates of one result row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RowKey {
    pub setting: Setting,
    pub m: usize,
    pub theta: f64,
    pub snr: f64,
    pub k: usize,
    pub variant: Variant,
    pub method: Method,
}

impl RowKey {
    fn same_config(&self, other: &RowKey) -> bool {
        self.setting == other.setting
            && self.m == other.m
            && self.theta == other.theta
            && self.k == other.k
            && self.variant == other.variant
            && self.method == other.method
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub p_comb: f64,
    pub significant: bool,
    pub theta_hat: f64,
}

/// Raw outcomes of every replication of one row.
#[derive(Debug, Clone)]
pub struct CellRuns {
    pub key: RowKey,
    /// `floor(theta n) / n`.
    pub true_theta: f64,
    pub outcomes: Vec<Outcome>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub key: RowKey,
    pub replications: usize,
    pub rejection_rate: Option<f64>,
    pub adj_rejection_rate: Option<f64>,
    pub rmse_all: Option<f64>,
    pub rmse_significant: Option<f64>,
    /// `sqrt(r (1 - r) / replications)` of the rejection rate.
    pub mc_stderr: Option<f64>,
    /// Delta-method standard error of `rmse_all`.
    pub rmse_stderr: Option<f64>,
    pub significant_count: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    pub rows: Vec<ResultRow>,
}

pub const TABLE_HEADER: &str = "setting,m,theta,snr,k,variant,method,replications,rejection_rate,adj_rejection_rate,rmse_all,rmse_significant,mc_stderr,rmse_stderr,significant_count";

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl ResultTable {
    pub fn find(&self, f: impl Fn(&RowKey) -> bool) -> Option<&ResultRow> {
        self.rows.iter().find(|r| f(&r.key))
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "{TABLE_HEADER}")?;
        for r in &self.rows {
            let k = &r.key;
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                k.setting,
                k.m,
                k.theta,
                k.snr,
                k.k,
                k.variant,
                k.method,
                r.replications,
                cell(r.rejection_rate),
                cell(r.adj_rejection_rate),
                cell(r.rmse_all),
                cell(r.rmse_significant),
                cell(r.mc_stderr),
                cell(r.rmse_stderr),
                r.significant_count
            )?;
        }
        Ok(())
    }
}

/// Repeated detection on one generated dataset.
#[derive(Debug, Clone)]
pub struct RepetitionRecord {
    pub key: RowKey,
    pub dataset: usize,
    pub true_z: usize,
    pub summary: RepetitionSummary,
}

#[derive(Debug, Clone, Default)]
pub struct ExperimentOutput {
    pub table: ResultTable,
    pub repetitions: Vec<RepetitionRecord>,
}

fn setting_id(s: Setting) -> u64 {
    match s {
        Setting::S1 => 1,
        Setting::S2 => 2,
        Setting::S3 => 3,
    }
}

/// Runs every replication of every grid cell. Rows come out in grid order:
/// setting, m, theta, snr, k, variant, method.
pub fn simulate(spec: &ExperimentSpec, nulls: &NullCache) -> Result<Vec<CellRuns>> {
    spec.validate()?;
    let mut out = Vec::new();
    for &setting in &spec.settings {
        for &m in &spec.m_grid {
            for (ti, &theta) in spec.theta_grid.iter().enumerate() {
                for (si, &snr) in spec.snr_grid.iter().enumerate() {
                    let coords = [setting_id(setting), m as u64, ti as u64, si as u64];
                    let per_rep: Vec<Vec<Outcome>> = (0..spec.replications)
                        .into_par_iter()
                        .map(|rep| {
                            let path = |stream: u64| [stream, coords[0], coords[1], coords[2], coords[3], rep as u64];
                            let gcfg = spec.generator_config(setting, m, theta, snr, derive_seed(spec.seed, &path(DATA_STREAM)));
                            let data = generate(&gcfg)?.data;
                            let det_seed = derive_seed(spec.seed, &path(DETECT_STREAM));
                            let mut outcomes = Vec::new();
                            for &k in &spec.k_grid {
                                for &variant in &spec.variants {
                                    let dcfg = spec.detector_config(k, variant, spec.methods[0], det_seed);
                                    for r in detect_methods(&data, &dcfg, &spec.methods, nulls)? {
                                        outcomes.push(Outcome {
                                            p_comb: r.p_comb,
                                            significant: r.significant,
                                            theta_hat: r.theta_hat,
                                        });
                                    }
                                }
                            }
                            Ok(outcomes)
                        })
                        .collect::<Result<_>>()?;
                    let gcfg = spec.generator_config(setting, m, theta, snr, 0);
                    let true_theta = gcfg.true_z() as f64 / gcfg.n as f64;
                    let mut idx = 0;
                    for &k in &spec.k_grid {
                        for &variant in &spec.variants {
                            for &method in &spec.methods {
                                out.push(CellRuns {
                                    key: RowKey {
                                        setting,
                                        m,
                                        theta,
                                        snr,
                                        k,
                                        variant,
                                        method,
                                    },
                                    true_theta,
                                    outcomes: per_rep.iter().map(|o| o[idx]).collect(),
                                });
                                idx += 1;
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Rejection threshold from null p-values: the value at sorted position
/// `floor(alpha N)`; a run rejects when its p-value is strictly below it.
pub fn null_threshold(null_pvalues: &[f64], alpha: f64) -> f64 {
    let mut v = null_pvalues.to_vec();
    v.sort_by(f64::total_cmp);
    let i = (alpha * v.len() as f64 + 1e-9).floor() as usize;
    v.get(i).copied().unwrap_or(f64::INFINITY)
}

fn rate(hits: usize, n: usize) -> f64 {
    hits as f64 / n as f64
}

pub fn mc_stderr(rate: f64, replications: usize) -> f64 {
    (rate * (1.0 - rate) / replications as f64).sqrt()
}

/// `(rmse, delta-method standard error)` of `theta_hat` about `truth`.
fn rmse(outcomes: impl Iterator<Item = f64>, truth: f64) -> Option<(f64, f64)> {
    let sq: Vec<f64> = outcomes.map(|t| (t - truth).powi(2)).collect();
    if sq.is_empty() {
        return None;
    }
    let n = sq.len() as f64;
    let mse = sq.iter().sum::<f64>() / n;
    let var = sq.iter().map(|s| (s - mse).powi(2)).sum::<f64>() / n;
    let rmse = mse.sqrt();
    let se = if rmse > 0.0 { (var / n).sqrt() / (2.0 * rmse) } else { 0.0 };
    Some((rmse, se))
}

/// Summarises raw runs into the requested columns.
pub fn tabulate(spec: &ExperimentSpec, runs: &[CellRuns], metrics: &[Metric]) -> Result<ResultTable> {
    let want = |m: Metric| metrics.contains(&m);
    let mut rows = Vec::with_capacity(runs.len());
    for cell in runs {
        let n = cell.outcomes.len();
        let hits = cell.outcomes.iter().filter(|o| o.significant).count();
        let mut row = ResultRow {
            key: cell.key,
            replications: n,
            rejection_rate: None,
            adj_rejection_rate: None,
            rmse_all: None,
            rmse_significant: None,
            mc_stderr: None,
            rmse_stderr: None,
            significant_count: hits,
        };
        if want(Metric::Size) || want(Metric::Power) || want(Metric::AdjPower) {
            let r = rate(hits, n);
            row.rejection_rate = Some(r);
            row.mc_stderr = Some(mc_stderr(r, n));
        }
        if want(Metric::AdjPower) {
            let null = runs
                .iter()
                .find(|c| c.key.snr == 0.0 && c.key.same_config(&cell.key))
                .ok_or_else(|| {
                    Error::invalid(format!(
                        "size-adjusted power needs an snr = 0 cell for setting {}, m {}, theta {}, k {}, {}, {}",
                        cell.key.setting, cell.key.m, cell.key.theta, cell.key.k, cell.key.variant, cell.key.method
                    ))
                })?;
            let null_p: Vec<f64> = null.outcomes.iter().map(|o| o.p_comb).collect();
            let t = null_threshold(&null_p, spec.alpha);
            let adj = cell.outcomes.iter().filter(|o| o.p_comb < t).count();
            row.adj_rejection_rate = Some(rate(adj, n));
        }
        if cell.key.snr > 0.0 {
            if want(Metric::Rmse) {
                if let Some((r, se)) = rmse(cell.outcomes.iter().map(|o| o.theta_hat), cell.true_theta) {
                    row.rmse_all = Some(r);
                    row.rmse_stderr = Some(se);
                }
            }
            if want(Metric::RmseSig) {
                row.rmse_significant = rmse(
                    cell.outcomes.iter().filter(|o| o.significant).map(|o| o.theta_hat),
                    cell.true_theta,
                )
                .map(|(r, _)| r);
            }
        }
        rows.push(row);
    }
    Ok(ResultTable { rows })
}

/// Rejection rates under the null (`snr = 0`) and alternatives.
pub fn run_size_power(spec: &ExperimentSpec, nulls: &NullCache) -> Result<ResultTable> {
    tabulate(spec, &simulate(spec, nulls)?, &[Metric::Size])
}

/// Raw and size-adjusted rejection rates; needs `0` in `snr_grid`.
pub fn run_size_adjusted_power(spec: &ExperimentSpec, nulls: &NullCache) -> Result<ResultTable> {
    tabulate(spec, &simulate(spec, nulls)?, &[Metric::Size, Metric::AdjPower])
}

/// Location RMSE in `theta` units for the `snr > 0` cells.
pub fn run_rmse(spec: &ExperimentSpec, nulls: &NullCache) -> Result<ResultTable> {
    tabulate(spec, &simulate(spec, nulls)?, &[Metric::Size, Metric::Rmse, Metric::RmseSig])
}

/// Generates `datasets` datasets per grid cell and runs `reps` repeated
/// detections on each.
pub fn run_repetition_study(
    spec: &ExperimentSpec,
    datasets: usize,
    reps: usize,
    nulls: &NullCache,
) -> Result<Vec<RepetitionRecord>> {
    spec.validate()?;
    if datasets == 0 || reps == 0 {
        return Err(Error::invalid("need at least one dataset and one repetition"));
    }
    let mut out = Vec::new();
    for &setting in &spec.settings {
        for &m in &spec.m_grid {
            for (ti, &theta) in spec.theta_grid.iter().enumerate() {
                for (si, &snr) in spec.snr_grid.iter().enumerate() {
                    for d in 0..datasets {
                        let path = |stream: u64| [stream, setting_id(setting), m as u64, ti as u64, si as u64, d as u64];
                        let gcfg = spec.generator_config(setting, m, theta, snr, derive_seed(spec.seed, &path(REP_DATA_STREAM)));
                        let data = generate(&gcfg)?.data;
                        let det_seed = derive_seed(spec.seed, &path(REP_DETECT_STREAM));
                        for &k in &spec.k_grid {
                            for &variant in &spec.variants {
                                for &method in &spec.methods {
                                    let dcfg = spec.detector_config(k, variant, method, det_seed);
                                    let summary = detect_repeated_with_cache(&data, &dcfg, reps, nulls)?;
                                    out.push(RepetitionRecord {
                                        key: RowKey {
                                            setting,
                                            m,
                                            theta,
                                            snr,
                                            k,
                                            variant,
                                            method,
                                        },
                                        dataset: d,
                                        true_z: gcfg.true_z(),
                                        summary,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Runs whatever `spec.metrics` asks for.
pub fn run_experiment(spec: &ExperimentSpec, nulls: &NullCache) -> Result<ExperimentOutput> {
    let table_metrics: Vec<Metric> = spec.metrics.iter().copied().filter(|&m| m != Metric::Repetition).collect();
    let table = if table_metrics.is_empty() {
        ResultTable::default()
    } else {
        tabulate(spec, &simulate(spec, nulls)?, &table_metrics)?
    };
    let repetitions = if spec.has(Metric::Repetition) {
        run_repetition_study(spec, spec.repetition.datasets, spec.repetition.repetitions, nulls)?
    } else {
        Vec::new()
    };
    Ok(ExperimentOutput { table, repetitions })
}

fn key_cells(k: &RowKey) -> String {
    format!("{},{},{},{},{},{},{}", k.setting, k.m, k.theta, k.snr, k.k, k.variant, k.method)
}

const KEY_HEADER: &str = "setting,m,theta,snr,k,variant,method";

pub fn write_repetition_csv<W: Write>(records: &[RepetitionRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{KEY_HEADER},dataset,true_z,repetitions,mode,mode_count,significant_count")?;
    for r in records {
        let sig = r.summary.significant_mask.iter().filter(|&&b| b).count();
        writeln!(
            w,
            "{},{},{},{},{},{},{}",
            key_cells(&r.key),
            r.dataset,
            r.true_z,
            r.summary.repetitions(),
            r.summary.mode,
            r.summary.mode_count,
            sig
        )?;
    }
    Ok(())
}

pub fn write_histogram_csv<W: Write>(records: &[RepetitionRecord], mut w: W) -> std::io::Result<()> {
    writeln!(w, "{KEY_HEADER},dataset,location,count")?;
    for r in records {
        for (z, c) in &r.summary.histogram {
            writeln!(w, "{},{},{z},{c}", key_cells(&r.key), r.dataset)?;
        }
    }
    Ok(())
}

#[derive(Serialize)]
struct Sidecar<'a> {
    name: &'a str,
    master_seed: u64,
    code_version: &'a str,
    spec: &'a ExperimentSpec,
}

/// Spec, master seed and crate version as JSON.
pub fn write_sidecar<W: Write>(spec: &ExperimentSpec, mut w: W) -> Result<()> {
    let s = Sidecar {
        name: &spec.name,
        master_seed: spec.seed,
        code_version: env!("CARGO_PKG_VERSION"),
        spec,
    };
    serde_json::to_writer_pretty(&mut w, &s).map_err(|e| Error::Format(e.to_string()))?;
    writeln!(w).map_err(|e| Error::io("<sidecar>", e))
}

fn write_file(path: &Path, f: impl FnOnce(&mut std::io::BufWriter<std::fs::File>) -> Result<()>) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = std::io::BufWriter::new(file);
    f(&mut w)?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `<name>.csv`, `<name>.json` and, for repetition studies,
/// `<name>_repetition.csv` and `<name>_histogram.csv` into `dir`.
pub fn write_outputs(spec: &ExperimentSpec, out: &ExperimentOutput, dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let p = dir.join(format!("{}.json", spec.name));
    write_file(&p, |w| write_sidecar(spec, w))?;
    written.push(p);
    if !out.table.rows.is_empty() {
        let p = dir.join(format!("{}.csv", spec.name));
        write_file(&p, |w| out.table.write_csv(w).map_err(|e| Error::io(&p, e)))?;
        written.push(p);
    }
    if !out.repetitions.is_empty() {
        let p = dir.join(format!("{}_repetition.csv", spec.name));
        write_file(&p, |w| write_repetition_csv(&out.repetitions, w).map_err(|e| Error::io(&p, e)))?;
        written.push(p);
        let p = dir.join(format!("{}_histogram.csv", spec.name));
        write_file(&p, |w| write_histogram_csv(&out.repetitions, w).map_err(|e| Error::io(&p, e)))?;
        written.push(p);
    }
    Ok(written)
}

//! C ABI for the `rpcpd` change-point detector.
//!
//! Every fallible function returns an `RpcpdStatus`; on failure the
//! message is available from `rpcpd_last_error` on the same thread.
//! Objects are opaque handles created by `*_new` style functions and
//! released with the matching `*_free`.
//!
//! Enumerated options are passed as `uint32_t` codes (`RPCPD_VARIANT_*`,
//! `RPCPD_METHOD_*`, ...) so that an out-of-range value is reported as an
//! error instead of being undefined behaviour.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use rpcpd::combine::Method;
use rpcpd::cusum::{self, TrimSpec, Variant, VarianceKind};
use rpcpd::detector::{self, DetectorConfig, NullSettings, RepetitionSummary};
use rpcpd::simgen::{self, GeneratorConfig, Setting};
use rpcpd::{DataMatrix, Error, ProjectionMatrix};

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpcpdStatus {
    Ok = 0,
    InvalidArgument = 1,
    DimensionMismatch = 2,
    Parse = 3,
    Format = 4,
    Io = 5,
    Config = 6,
    NullPointer = 7,
    Panic = 8,
}

pub const RPCPD_VARIANT_CUSUM: u32 = 0;
pub const RPCPD_VARIANT_WEIGHTED: u32 = 1;

pub const RPCPD_VARIANCE_SPLIT: u32 = 0;
pub const RPCPD_VARIANCE_HAC: u32 = 1;

pub const RPCPD_TRIM_NONE: u32 = 0;
pub const RPCPD_TRIM_N025: u32 = 1;
pub const RPCPD_TRIM_LOGN: u32 = 2;
pub const RPCPD_TRIM_SQRTN: u32 = 3;
/// Uses `trim_value` as the trim.
pub const RPCPD_TRIM_EXPLICIT: u32 = 4;

pub const RPCPD_METHOD_BONF: u32 = 0;
pub const RPCPD_METHOD_BH: u32 = 1;
pub const RPCPD_METHOD_HMP: u32 = 2;
pub const RPCPD_METHOD_CCT: u32 = 3;
pub const RPCPD_METHOD_HMPRAW: u32 = 4;

pub const RPCPD_SETTING_S1: u32 = 1;
pub const RPCPD_SETTING_S2: u32 = 2;
pub const RPCPD_SETTING_S3: u32 = 3;

/// Detector parameters. Fill with `rpcpd_detector_config_default` first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RpcpdDetectorConfig {
    pub k: usize,
    pub variant: u32,
    pub variance: u32,
    pub trim_rule: u32,
    pub trim_value: usize,
    pub method: u32,
    pub alpha: f64,
    pub seed: u64,
    pub null_replications: usize,
    pub null_increments: usize,
    pub null_seed: u64,
}

/// Generator parameters. Fill with `rpcpd_generator_config_default` first.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct RpcpdGeneratorConfig {
    pub n: usize,
    pub grid_p: usize,
    pub n_basis: usize,
    pub setting: u32,
    pub m: usize,
    pub snr: f64,
    pub theta: f64,
    pub seed: u64,
    pub noise_scale: f64,
}

/// Outcome of one detection. `winner` is a zero-based projection index.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct RpcpdReport {
    pub n: usize,
    pub p: usize,
    pub k: usize,
    pub p_comb: f64,
    pub significant: bool,
    pub z_hat: usize,
    pub theta_hat: f64,
    pub winner: usize,
    pub degenerate: bool,
}

/// Opaque n x p data matrix.
pub struct RpcpdDataset(DataMatrix);

/// Opaque sparse direction matrix.
pub struct RpcpdDirections(ProjectionMatrix);

/// Opaque result of repeated detection.
pub struct RpcpdSummary(RepetitionSummary);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(RpcpdStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match &e {
            Error::InvalidArgument(_) => RpcpdStatus::InvalidArgument,
            Error::DimensionMismatch(_) => RpcpdStatus::DimensionMismatch,
            Error::Parse { .. } | Error::Csv(_) => RpcpdStatus::Parse,
            Error::Format(_) => RpcpdStatus::Format,
            Error::Config(_) => RpcpdStatus::Config,
            Error::Io { .. } => RpcpdStatus::Io,
        };
        Failure(status, e.to_string())
    }
}

fn null_ptr(what: &str) -> Failure {
    Failure(RpcpdStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(RpcpdStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> RpcpdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RpcpdStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_last_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_last_error(format!("internal panic: {msg}"));
            RpcpdStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null_ptr(what))
}

unsafe fn write_out<T>(out: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null_ptr(what));
    }
    out.write(value);
    Ok(())
}

fn variant(code: u32) -> Result<Variant, Failure> {
    match code {
        RPCPD_VARIANT_CUSUM => Ok(Variant::Standard),
        RPCPD_VARIANT_WEIGHTED => Ok(Variant::Weighted),
        c => Err(invalid(format!("unknown variant code {c}"))),
    }
}

fn method(code: u32) -> Result<Method, Failure> {
    match code {
        RPCPD_METHOD_BONF => Ok(Method::Bonf),
        RPCPD_METHOD_BH => Ok(Method::Bh),
        RPCPD_METHOD_HMP => Ok(Method::Hmp),
        RPCPD_METHOD_CCT => Ok(Method::Cct),
        RPCPD_METHOD_HMPRAW => Ok(Method::HmpRaw),
        c => Err(invalid(format!("unknown method code {c}"))),
    }
}

impl RpcpdDetectorConfig {
    fn to_config(self) -> Result<DetectorConfig, Failure> {
        let variance_kind = match self.variance {
            RPCPD_VARIANCE_SPLIT => VarianceKind::Split,
            RPCPD_VARIANCE_HAC => VarianceKind::Hac,
            c => return Err(invalid(format!("unknown variance code {c}"))),
        };
        let trim = match self.trim_rule {
            RPCPD_TRIM_NONE => TrimSpec::None,
            RPCPD_TRIM_N025 => TrimSpec::NQuarter,
            RPCPD_TRIM_LOGN => TrimSpec::LogN,
            RPCPD_TRIM_SQRTN => TrimSpec::SqrtN,
            RPCPD_TRIM_EXPLICIT => TrimSpec::Explicit(self.trim_value),
            c => return Err(invalid(format!("unknown trim code {c}"))),
        };
        Ok(DetectorConfig {
            k: self.k,
            variant: variant(self.variant)?,
            variance_kind,
            trim,
            method: method(self.method)?,
            alpha: self.alpha,
            seed: self.seed,
            null: NullSettings {
                replications: self.null_replications,
                increments: self.null_increments,
                seed: self.null_seed,
            },
            per_projection: false,
        })
    }
}

fn to_report(r: &detector::DetectionReport) -> RpcpdReport {
    RpcpdReport {
        n: r.n,
        p: r.p,
        k: r.k,
        p_comb: r.p_comb,
        significant: r.significant,
        z_hat: r.z_hat,
        theta_hat: r.theta_hat,
        winner: r.winner,
        degenerate: r.degenerate,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn rpcpd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rpcpd_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_detector_config_default(out: *mut RpcpdDetectorConfig) -> RpcpdStatus {
    guard(|| {
        let d = DetectorConfig::default();
        write_out(
            out,
            RpcpdDetectorConfig {
                k: d.k,
                variant: RPCPD_VARIANT_CUSUM,
                variance: RPCPD_VARIANCE_SPLIT,
                trim_rule: RPCPD_TRIM_LOGN,
                trim_value: 0,
                method: RPCPD_METHOD_BONF,
                alpha: d.alpha,
                seed: d.seed,
                null_replications: cusum::DEFAULT_REPLICATIONS,
                null_increments: cusum::DEFAULT_INCREMENTS,
                null_seed: cusum::DEFAULT_NULL_SEED,
            },
            "config",
        )
    })
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_generator_config_default(out: *mut RpcpdGeneratorConfig) -> RpcpdStatus {
    guard(|| {
        let g = GeneratorConfig::default();
        write_out(
            out,
            RpcpdGeneratorConfig {
                n: g.n,
                grid_p: g.grid_p,
                n_basis: g.n_basis,
                setting: RPCPD_SETTING_S1,
                m: g.m,
                snr: g.snr,
                theta: g.theta,
                seed: g.seed,
                noise_scale: g.noise_scale,
            },
            "config",
        )
    })
}

/// Copies `n * p` row-major values into a new dataset.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_dataset_new(
    values: *const f64,
    n: usize,
    p: usize,
    out: *mut *mut RpcpdDataset,
) -> RpcpdStatus {
    guard(|| {
        if values.is_null() {
            return Err(null_ptr("values"));
        }
        let len = n.checked_mul(p).ok_or_else(|| invalid("n * p overflows"))?;
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let m = DataMatrix::new(n, p, v)?;
        write_out(out, Box::into_raw(Box::new(RpcpdDataset(m))), "out")
    })
}

/// Reads a numeric CSV file.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_dataset_read_csv(
    path: *const c_char,
    has_header: bool,
    out: *mut *mut RpcpdDataset,
) -> RpcpdStatus {
    guard(|| {
        if path.is_null() {
            return Err(null_ptr("path"));
        }
        let path = PathBuf::from(CStr::from_ptr(path).to_str().map_err(|_| invalid("path is not UTF-8"))?);
        let m = DataMatrix::read_csv_path(&path, has_header)?;
        write_out(out, Box::into_raw(Box::new(RpcpdDataset(m))), "out")
    })
}

/// Simulates a functional dataset; the true change index goes to `true_z`.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_generate(
    config: *const RpcpdGeneratorConfig,
    out: *mut *mut RpcpdDataset,
    true_z: *mut usize,
) -> RpcpdStatus {
    guard(|| {
        let c = deref(config, "config")?;
        let setting = match c.setting {
            RPCPD_SETTING_S1 => Setting::S1,
            RPCPD_SETTING_S2 => Setting::S2,
            RPCPD_SETTING_S3 => Setting::S3,
            s => return Err(invalid(format!("unknown setting code {s}"))),
        };
        let g = simgen::generate(&GeneratorConfig {
            n: c.n,
            grid_p: c.grid_p,
            n_basis: c.n_basis,
            setting,
            m: c.m,
            snr: c.snr,
            theta: c.theta,
            seed: c.seed,
            noise_scale: c.noise_scale,
        })?;
        if out.is_null() {
            return Err(null_ptr("out"));
        }
        if !true_z.is_null() {
            true_z.write(g.true_z);
        }
        out.write(Box::into_raw(Box::new(RpcpdDataset(g.data))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_dataset_n(d: *const RpcpdDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.n())
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_dataset_p(d: *const RpcpdDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.p())
}

/// Copies the row-major values into `buf`, which must hold `n * p` doubles.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_dataset_values(d: *const RpcpdDataset, buf: *mut f64, len: usize) -> RpcpdStatus {
    guard(|| {
        let d = deref(d, "dataset")?;
        let v = d.0.as_slice();
        if buf.is_null() {
            return Err(null_ptr("buf"));
        }
        if len < v.len() {
            return Err(Failure(
                RpcpdStatus::DimensionMismatch,
                format!("buffer holds {len} values, need {}", v.len()),
            ));
        }
        ptr::copy_nonoverlapping(v.as_ptr(), buf, v.len());
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_dataset_free(d: *mut RpcpdDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Draws a `p x k` sparse direction matrix.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_directions_new(
    p: usize,
    k: usize,
    seed: u64,
    out: *mut *mut RpcpdDirections,
) -> RpcpdStatus {
    guard(|| {
        let d = rpcpd::generate_directions(p, k, seed)?;
        write_out(out, Box::into_raw(Box::new(RpcpdDirections(d))), "out")
    })
}

/// Number of nonzero entries.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_directions_nnz(d: *const RpcpdDirections) -> usize {
    d.as_ref().map_or(0, |d| d.0.nnz())
}

/// Entry `(row, col)` of the direction matrix; 0 when out of range.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_directions_entry(d: *const RpcpdDirections, row: usize, col: usize) -> f64 {
    match d.as_ref() {
        Some(d) if row < d.0.p() && col < d.0.k() => d.0.entry(row, col),
        _ => 0.0,
    }
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_directions_free(d: *mut RpcpdDirections) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

/// Runs the detector with directions drawn from `config->seed`.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_detect(
    data: *const RpcpdDataset,
    config: *const RpcpdDetectorConfig,
    out: *mut RpcpdReport,
) -> RpcpdStatus {
    guard(|| {
        let data = deref(data, "data")?;
        let cfg = deref(config, "config")?.to_config()?;
        let r = detector::detect(&data.0, &cfg)?;
        write_out(out, to_report(&r), "out")
    })
}

/// Runs the detector on caller-supplied directions; `config->k` and
/// `config->seed` are ignored.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_detect_with_directions(
    data: *const RpcpdDataset,
    config: *const RpcpdDetectorConfig,
    directions: *const RpcpdDirections,
    out: *mut RpcpdReport,
) -> RpcpdStatus {
    guard(|| {
        let data = deref(data, "data")?;
        let cfg = deref(config, "config")?.to_config()?;
        let d = deref(directions, "directions")?;
        let r = detector::detect_with_directions(&data.0, &cfg, &d.0)?;
        write_out(out, to_report(&r), "out")
    })
}

/// Repeats detection `reps` times with derived seeds.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_detect_repeated(
    data: *const RpcpdDataset,
    config: *const RpcpdDetectorConfig,
    reps: usize,
    out: *mut *mut RpcpdSummary,
) -> RpcpdStatus {
    guard(|| {
        let data = deref(data, "data")?;
        let cfg = deref(config, "config")?.to_config()?;
        let s = detector::detect_repeated(&data.0, &cfg, reps)?;
        write_out(out, Box::into_raw(Box::new(RpcpdSummary(s))), "out")
    })
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_summary_mode(s: *const RpcpdSummary) -> usize {
    s.as_ref().map_or(0, |s| s.0.mode)
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_summary_mode_count(s: *const RpcpdSummary) -> usize {
    s.as_ref().map_or(0, |s| s.0.mode_count)
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_summary_repetitions(s: *const RpcpdSummary) -> usize {
    s.as_ref().map_or(0, |s| s.0.repetitions())
}

/// Copies up to `len` per-repetition locations into `buf` and returns the
/// total number of repetitions.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_summary_locations(s: *const RpcpdSummary, buf: *mut usize, len: usize) -> usize {
    let Some(s) = s.as_ref() else { return 0 };
    if !buf.is_null() {
        let n = len.min(s.0.locations.len());
        ptr::copy_nonoverlapping(s.0.locations.as_ptr(), buf, n);
    }
    s.0.locations.len()
}

#[no_mangle]
pub unsafe extern "C" fn rpcpd_summary_free(s: *mut RpcpdSummary) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Combines `k` p-values. `adjusted` may be null; otherwise it receives `k`
/// adjusted values for Bonferroni and BH and is left untouched for the
/// other methods. `winner` is zero-based.
#[no_mangle]
pub unsafe extern "C" fn rpcpd_combine(
    method_code: u32,
    raw: *const f64,
    k: usize,
    p_comb: *mut f64,
    winner: *mut usize,
    adjusted: *mut f64,
) -> RpcpdStatus {
    guard(|| {
        if raw.is_null() {
            return Err(null_ptr("raw"));
        }
        let raw = std::slice::from_raw_parts(raw, k);
        let r = method(method_code)?.combine(raw)?;
        write_out(p_comb, r.p_comb, "p_comb")?;
        if !winner.is_null() {
            winner.write(r.winner);
        }
        if !adjusted.is_null() && !r.adjusted.is_empty() {
            ptr::copy_nonoverlapping(r.adjusted.as_ptr(), adjusted, r.adjusted.len());
        }
        Ok(())
    })
}

/// `P(sup |B| > x)` for a standard Brownian bridge.
#[no_mangle]
pub extern "C" fn rpcpd_standard_pvalue(x: f64) -> f64 {
    cusum::standard_pvalue(x)
}

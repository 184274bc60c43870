//! C ABI for `sobolev-conformal`.
//!
//! Every fallible function returns an [`ScStatus`] and writes its result
//! through an out-pointer. On failure a message is kept per thread and can be
//! read with [`sc_last_error_message`]. Objects cross the boundary as opaque
//! handles that the caller releases with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use num_complex::Complex64;

use sobolev_conformal::conformal::{conformal_quantile, corrected_quantile, QuantileTable};
use sobolev_conformal::experiments::{run_pipeline, ExperimentConfig, Step};
use sobolev_conformal::quantum::{channel_probs, mutual_information};
use sobolev_conformal::spectral::{self, ModeIndex, Reality, SobolevSpec, SpectralField};
use sobolev_conformal::stats::paired_t_test;
use sobolev_conformal::surrogate::SurrogateModel;
use sobolev_conformal::Error;

/// Result code of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    InsufficientData = 3,
    NumericalFailure = 4,
    Io = 5,
    Format = 6,
    Panic = 7,
}

impl From<&Error> for ScStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InsufficientCalibration { .. }
            | Error::EmptyDataset
            | Error::TooFewSamples(_) => ScStatus::InsufficientData,
            Error::ProjectionNonConvergence { .. }
            | Error::ZeroConditionalProbability { .. }
            | Error::NegativeEigenvalue(_) => ScStatus::NumericalFailure,
            Error::Io(_) => ScStatus::Io,
            Error::Format(_) | Error::Json(_) => ScStatus::Format,
            Error::Stage { source, .. } => ScStatus::from(source.as_ref()),
            _ => ScStatus::InvalidArgument,
        }
    }
}

/// Sobolev order `s`, decay `tau` and truncation `trunc`.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct ScSobolevSpec {
    pub s: f64,
    pub tau: f64,
    pub trunc: usize,
}

/// One-sided paired t-test of `mean > 0`.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct ScPairedTest {
    pub n: usize,
    pub mean: f64,
    pub std_error: f64,
    pub t: f64,
    pub p_value: f64,
    pub degenerate: bool,
}

/// Fourier coefficients on a centered `G x G` mode grid.
pub struct ScField(SpectralField);

/// A trained spectral surrogate.
pub struct ScModel(SurrogateModel);

/// Calibration scores and quantiles.
pub struct ScQuantileTable(QuantileTable);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

struct Failure(ScStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(ScStatus::from(&e), e.to_string())
    }
}

fn null(what: &str) -> Failure {
    Failure(ScStatus::NullPointer, format!("`{what}` is null"))
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure(ScStatus::InvalidArgument, msg.into())
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> ScStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => ScStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            ScStatus::Panic
        }
    }
}

unsafe fn deref<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| null(what))
}

unsafe fn out<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Failure> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn path(p: *const c_char, what: &str) -> Result<PathBuf, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    let s = CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("`{what}` is not valid UTF-8")))?;
    Ok(PathBuf::from(s))
}

fn spec(s: ScSobolevSpec) -> Result<SobolevSpec, Failure> {
    Ok(SobolevSpec::new(s.s, s.tau, s.trunc)?)
}

fn mode(f: &SpectralField, n1: i32, n2: i32) -> Result<ModeIndex, Failure> {
    let n = ModeIndex::new(n1, n2);
    if f.contains(n) {
        Ok(n)
    } else {
        Err(invalid(format!(
            "mode ({n1}, {n2}) is outside the grid of size {}",
            f.grid_size()
        )))
    }
}

/// Message of the last failed call on this thread, or null. The pointer stays
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn sc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn sc_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Allocates a zero field on a `grid_size x grid_size` mode grid. Real fields
/// keep Hermitian symmetry when written through [`sc_field_set`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn sc_field_new(
    grid_size: usize,
    real: bool,
    out: *mut *mut ScField,
) -> ScStatus {
    guard(|| {
        let out = unsafe { self::out(out, "out") }?;
        if grid_size == 0 || !grid_size.is_multiple_of(2) {
            return Err(Error::InvalidGridSize(grid_size).into());
        }
        let reality = if real {
            Reality::Real
        } else {
            Reality::Complex
        };
        *out = Box::into_raw(Box::new(ScField(SpectralField::zeros(grid_size, reality))));
        Ok(())
    })
}

/// Releases a field. Null is ignored.
///
/// # Safety
/// `field` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn sc_field_free(field: *mut ScField) {
    if !field.is_null() {
        drop(unsafe { Box::from_raw(field) });
    }
}

/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_field_grid_size(field: *const ScField, out: *mut usize) -> ScStatus {
    guard(|| {
        let f = unsafe { deref(field, "field") }?;
        *unsafe { self::out(out, "out") }? = f.0.grid_size();
        Ok(())
    })
}

/// Writes coefficient `(n1, n2)`. For real fields the conjugate partner is
/// written too.
///
/// # Safety
/// `field` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_field_set(
    field: *mut ScField,
    n1: i32,
    n2: i32,
    re: f64,
    im: f64,
) -> ScStatus {
    guard(|| {
        let f = unsafe { field.as_mut() }.ok_or_else(|| null("field"))?;
        let n = mode(&f.0, n1, n2)?;
        let z = Complex64::new(re, im);
        f.0.set(n, z);
        if f.0.reality() == Reality::Real && f.0.contains(-n) {
            f.0.set(-n, z.conj());
        }
        Ok(())
    })
}

/// # Safety
/// `field` must be a live handle; `re` and `im` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_field_get(
    field: *const ScField,
    n1: i32,
    n2: i32,
    re: *mut f64,
    im: *mut f64,
) -> ScStatus {
    guard(|| {
        let f = unsafe { deref(field, "field") }?;
        let z = f.0.get(mode(&f.0, n1, n2)?);
        *unsafe { out(re, "re") }? = z.re;
        *unsafe { out(im, "im") }? = z.im;
        Ok(())
    })
}

/// `Σ (1 + |n|²)^s |û_n|²`.
///
/// # Safety
/// `field` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_sobolev_norm_sq(
    field: *const ScField,
    s: f64,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let f = unsafe { deref(field, "field") }?;
        *unsafe { self::out(out, "out") }? = spectral::sobolev_norm_sq(&f.0, s);
        Ok(())
    })
}

/// Truncated conformity score of `observed` around `center`.
///
/// # Safety
/// Both fields must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_score(
    center: *const ScField,
    observed: *const ScField,
    spec: ScSobolevSpec,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let c = unsafe { deref(center, "center") }?;
        let o = unsafe { deref(observed, "observed") }?;
        let value = spectral::score(&c.0, &o.0, &self::spec(spec)?)?;
        *unsafe { self::out(out, "out") }? = value;
        Ok(())
    })
}

/// Loads a model written by the `train` stage.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_model_load(path: *const c_char, out: *mut *mut ScModel) -> ScStatus {
    guard(|| {
        let p = unsafe { self::path(path, "path") }?;
        let out = unsafe { self::out(out, "out") }?;
        *out = Box::into_raw(Box::new(ScModel(SurrogateModel::load(&p)?)));
        Ok(())
    })
}

/// # Safety
/// `model` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_model_free(model: *mut ScModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Applies the surrogate; the prediction is a new field owned by the caller.
///
/// # Safety
/// `model` and `input` must be live handles and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_model_apply(
    model: *const ScModel,
    input: *const ScField,
    out: *mut *mut ScField,
) -> ScStatus {
    guard(|| {
        let m = unsafe { deref(model, "model") }?;
        let a = unsafe { deref(input, "input") }?;
        let out = unsafe { self::out(out, "out") }?;
        if a.0.grid_size() != m.0.grid_size() {
            return Err(Error::GridMismatch {
                left: a.0.grid_size(),
                right: m.0.grid_size(),
            }
            .into());
        }
        *out = Box::into_raw(Box::new(ScField(m.0.predict(&a.0))));
        Ok(())
    })
}

/// Loads a quantile table written by the `calibrate` stage.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_quantile_table_load(
    path: *const c_char,
    out: *mut *mut ScQuantileTable,
) -> ScStatus {
    guard(|| {
        let p = unsafe { self::path(path, "path") }?;
        let out = unsafe { self::out(out, "out") }?;
        let f = std::fs::File::open(&p).map_err(Error::from)?;
        let table: QuantileTable =
            serde_json::from_reader(std::io::BufReader::new(f)).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(ScQuantileTable(table)));
        Ok(())
    })
}

/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn sc_quantile_table_free(table: *mut ScQuantileTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// Raw conformal quantile of the scores truncated at `trunc`.
///
/// # Safety
/// `table` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_quantile_table_quantile(
    table: *const ScQuantileTable,
    trunc: usize,
    alpha: f64,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let t = unsafe { deref(table, "table") }?;
        *unsafe { self::out(out, "out") }? = t.0.quantile(trunc, alpha)?;
        Ok(())
    })
}

/// The `⌈(n+1)(1−α)⌉`-th smallest of `scores`.
///
/// # Safety
/// `scores` must point to `n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_conformal_quantile(
    scores: *const f64,
    n: usize,
    alpha: f64,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let s = unsafe { slice(scores, n, "scores") }?;
        *unsafe { self::out(out, "out") }? = conformal_quantile(s, alpha)?;
        Ok(())
    })
}

/// `q_raw + margin · trunc^{−2τ}`.
#[no_mangle]
pub extern "C" fn sc_corrected_quantile(q_raw: f64, margin: f64, trunc: usize, tau: f64) -> f64 {
    corrected_quantile(q_raw, margin, trunc, tau)
}

/// Mutual information in nats of the discrimination channel under uniform
/// priors.
///
/// # Safety
/// `phi` and `g` must each point to `m` readable doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn sc_mutual_information(
    phi: *const f64,
    g: *const f64,
    m: usize,
    out: *mut f64,
) -> ScStatus {
    guard(|| {
        let phi = unsafe { slice(phi, m, "phi") }?;
        let g = unsafe { slice(g, m, "g") }?;
        *unsafe { self::out(out, "out") }? = mutual_information(phi, g, None)?;
        Ok(())
    })
}

/// Row-major `m x m` table with `probs[k * m + j] = P(B = j | A = k)`.
///
/// # Safety
/// `phi` and `g` must each point to `m` readable doubles and `probs` to `m * m`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_channel_probs(
    phi: *const f64,
    g: *const f64,
    m: usize,
    probs: *mut f64,
) -> ScStatus {
    guard(|| {
        let phi = unsafe { slice(phi, m, "phi") }?;
        let g = unsafe { slice(g, m, "g") }?;
        if probs.is_null() {
            return Err(null("probs"));
        }
        let p = channel_probs(phi, g)?;
        let dst = unsafe { std::slice::from_raw_parts_mut(probs, m * m) };
        for k in 0..m {
            for j in 0..m {
                dst[k * m + j] = p[(k, j)];
            }
        }
        Ok(())
    })
}

/// # Safety
/// `diffs` must point to `n` readable doubles and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn sc_paired_t_test(
    diffs: *const f64,
    n: usize,
    out: *mut ScPairedTest,
) -> ScStatus {
    guard(|| {
        let d = unsafe { slice(diffs, n, "diffs") }?;
        let r = paired_t_test(d)?;
        *unsafe { self::out(out, "out") }? = ScPairedTest {
            n: r.n,
            mean: r.mean,
            std_error: r.std_error,
            t: r.t,
            p_value: r.p_value,
            degenerate: r.degenerate,
        };
        Ok(())
    })
}

/// Runs a pipeline step (`generate-data`, `train`, `calibrate`, `curve`,
/// `collect-experiment`, `quantum-experiment` or `all`). A null
/// `config_path` uses the defaults; a non-null `out_dir` overrides the
/// configured output directory.
///
/// # Safety
/// Non-null arguments must be NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn sc_run_pipeline(
    config_path: *const c_char,
    step: *const c_char,
    out_dir: *const c_char,
) -> ScStatus {
    guard(|| {
        let mut cfg = if config_path.is_null() {
            ExperimentConfig::default()
        } else {
            ExperimentConfig::load(&unsafe { path(config_path, "config_path") }?)?
        };
        if !out_dir.is_null() {
            cfg.out_dir = unsafe { path(out_dir, "out_dir") }?;
        }
        let step: Step = unsafe { path(step, "step") }?
            .to_str()
            .expect("checked UTF-8")
            .parse()?;
        run_pipeline(&cfg, step)?;
        Ok(())
    })
}

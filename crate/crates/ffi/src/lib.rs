//! C interface to `torus-fit`.
//!
//! Models are opaque `TfModel` handles owned by the caller and released with
//! `tf_model_free`. Every fallible function returns a `TfStatus`; on failure
//! `tf_last_error_message` describes the most recent error on the calling
//! thread. Point arrays are row-major, `m` coordinates per point.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use torus_fit::kernel::{KernelSpec, TruncationPolicy};
use torus_fit::persist::{load_model, save_model};
use torus_fit::solver::{evaluate_many, fit, FittedModel, ScatteredData};
use torus_fit::torus::{FrequencyBound, TorusPoint};
use torus_fit::Error;

/// Result codes.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    Input = 2,
    Domain = 3,
    Numerical = 4,
    Infeasible = 5,
    Io = 6,
    Unsupported = 7,
    Panic = 8,
}

/// A fitted model.
pub struct TfModel {
    inner: FittedModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> TfStatus {
    match e {
        Error::Domain(_) | Error::Range(_) => TfStatus::Domain,
        Error::Numerical(_) | Error::Factorization { .. } | Error::Convergence { .. } => TfStatus::Numerical,
        Error::InfeasibleSchedule { .. } => TfStatus::Infeasible,
        Error::Io(_) | Error::Serde(_) => TfStatus::Io,
        Error::Unsupported(_) => TfStatus::Unsupported,
        _ => TfStatus::Input,
    }
}

fn guard(f: impl FnOnce() -> Result<(), TfFailure>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err(TfFailure::Null(what))) => {
            set_error(format!("null pointer passed as {what}"));
            TfStatus::NullPointer
        }
        Ok(Err(TfFailure::Lib(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("internal panic".into());
            TfStatus::Panic
        }
    }
}

enum TfFailure {
    Null(&'static str),
    Lib(Error),
}

impl From<Error> for TfFailure {
    fn from(e: Error) -> Self {
        TfFailure::Lib(e)
    }
}

fn non_null<T>(p: *const T, what: &'static str) -> Result<*const T, TfFailure> {
    if p.is_null() {
        Err(TfFailure::Null(what))
    } else {
        Ok(p)
    }
}

unsafe fn slice<'a, T>(p: *const T, len: usize, what: &'static str) -> Result<&'a [T], TfFailure> {
    if len == 0 {
        return Ok(&[]);
    }
    Ok(std::slice::from_raw_parts(non_null(p, what)?, len))
}

unsafe fn points(xs: *const f64, count: usize, m: usize) -> Result<Vec<TorusPoint>, TfFailure> {
    let total = count.checked_mul(m).ok_or_else(|| TfFailure::Lib(Error::Range("point array overflows".into())))?;
    let raw = slice(xs, total, "points")?;
    Ok(raw.chunks_exact(m).map(TorusPoint::wrap).collect::<Result<Vec<_>, _>>()?)
}

unsafe fn path_arg<'a>(p: *const c_char) -> Result<&'a Path, TfFailure> {
    let s = CStr::from_ptr(non_null(p, "path")?)
        .to_str()
        .map_err(|_| TfFailure::Lib(Error::Input("path is not valid UTF-8".into())))?;
    Ok(Path::new(s))
}

unsafe fn spec_arg(m: usize, k: u32, lambda: f64, omega: *const u32, tolerance: f64) -> Result<KernelSpec, TfFailure> {
    if m == 0 {
        return Err(TfFailure::Lib(Error::Domain("dimension must be at least 1".into())));
    }
    if omega.is_null() {
        let spec = KernelSpec::full(m, k, lambda)?;
        if tolerance > 0.0 {
            Ok(spec.with_truncation(TruncationPolicy::Tolerance(tolerance))?)
        } else {
            Ok(spec)
        }
    } else {
        let w = slice(omega, m, "omega")?.to_vec();
        Ok(KernelSpec::truncated(FrequencyBound::new(w), k, lambda)?)
    }
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map(|c| c.as_ptr()).unwrap_or(ptr::null()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Fits `n` sites in dimension `m`. `omega` holds `m` bounds, or is NULL for
/// the full kernel, whose series is cut where its tail drops below
/// `tolerance` (a non-positive value selects the default). On success `*out`
/// receives a new handle.
///
/// # Safety
/// `points` must hold `n * m` doubles, `values` `n` doubles, `omega` (when
/// not NULL) `m` integers, and `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_fit(
    m: usize,
    n: usize,
    points_ptr: *const f64,
    values: *const f64,
    k: u32,
    lambda: f64,
    omega: *const u32,
    tolerance: f64,
    out: *mut *mut TfModel,
) -> TfStatus {
    guard(|| {
        non_null(out as *const *mut TfModel, "out")?;
        *out = ptr::null_mut();
        let spec = spec_arg(m, k, lambda, omega, tolerance)?;
        let pts = points(points_ptr, n, m)?;
        let vals = slice(values, n, "values")?.to_vec();
        let data = ScatteredData::new(pts, vals)?;
        let model = fit(&data, &spec)?;
        *out = Box::into_raw(Box::new(TfModel { inner: model }));
        Ok(())
    })
}

/// Value of the model at one point of `tf_model_dim` coordinates.
///
/// # Safety
/// `model` must come from this library; `x` must hold `dim` doubles and `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_evaluate(model: *const TfModel, x: *const f64, out: *mut f64) -> TfStatus {
    tf_evaluate_many(model, 1, x, out)
}

/// Values at `count` points.
///
/// # Safety
/// `xs` must hold `count * dim` doubles and `out` room for `count` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_evaluate_many(
    model: *const TfModel,
    count: usize,
    xs: *const f64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        let pts = points(xs, count, model.inner.dim())?;
        let vals = evaluate_many(&model.inner, &pts)?;
        if count > 0 {
            let dst = std::slice::from_raw_parts_mut(non_null(out as *const f64, "out")? as *mut f64, count);
            dst.copy_from_slice(&vals);
        }
        Ok(())
    })
}

/// Number of sites; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_model_n(model: *const TfModel) -> usize {
    model.as_ref().map(|m| m.inner.n()).unwrap_or(0)
}

/// Dimension; 0 for NULL.
///
/// # Safety
/// `model` must be NULL or come from this library.
#[no_mangle]
pub unsafe extern "C" fn tf_model_dim(model: *const TfModel) -> usize {
    model.as_ref().map(|m| m.inner.dim()).unwrap_or(0)
}

/// Copies the `n` representer coefficients into `out`, which holds `len`
/// doubles.
///
/// # Safety
/// `out` must have room for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn tf_model_coeffs(model: *const TfModel, out: *mut f64, len: usize) -> TfStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        let c = model.inner.coeffs();
        if len < c.len() {
            return Err(TfFailure::Lib(Error::Input(format!("buffer holds {len} values, need {}", c.len()))));
        }
        let dst = std::slice::from_raw_parts_mut(non_null(out as *const f64, "out")? as *mut f64, c.len());
        dst.copy_from_slice(c);
        Ok(())
    })
}

/// Writes the model file.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string.
#[no_mangle]
pub unsafe extern "C" fn tf_model_save(model: *const TfModel, path: *const c_char) -> TfStatus {
    guard(|| {
        let model = &*non_null(model, "model")?;
        save_model(&model.inner, "", path_arg(path)?)?;
        Ok(())
    })
}

/// Reads a model file into a new handle.
///
/// # Safety
/// `path` must be a NUL-terminated UTF-8 string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_model_load(path: *const c_char, out: *mut *mut TfModel) -> TfStatus {
    guard(|| {
        non_null(out as *const *mut TfModel, "out")?;
        *out = ptr::null_mut();
        let model = load_model(path_arg(path)?)?;
        *out = Box::into_raw(Box::new(TfModel { inner: model }));
        Ok(())
    })
}

/// Releases a handle. NULL is ignored.
///
/// # Safety
/// `model` must be NULL or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_model_free(model: *mut TfModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Schedule margin `r` for exponents `alpha`, `beta` and order `k`.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_margin(alpha: f64, beta: f64, k: u32, out: *mut f64) -> TfStatus {
    guard(|| {
        non_null(out as *const f64, "out")?;
        *out = torus_fit::schedule::margin(alpha, beta, k)?;
        Ok(())
    })
}

/// Kernel value at `x` (`m` coordinates): truncated when `omega` is given,
/// the full series to within `tolerance` otherwise.
///
/// # Safety
/// `x` must hold `m` doubles, `omega` (when not NULL) `m` integers.
#[no_mangle]
pub unsafe extern "C" fn tf_kernel_eval(
    m: usize,
    k: u32,
    lambda: f64,
    omega: *const u32,
    tolerance: f64,
    x: *const f64,
    out: *mut f64,
) -> TfStatus {
    guard(|| {
        non_null(out as *const f64, "out")?;
        let spec = spec_arg(m, k, lambda, omega, tolerance)?;
        let p = TorusPoint::wrap(slice(x, m, "x")?)?;
        *out = spec.value(&p)?;
        Ok(())
    })
}

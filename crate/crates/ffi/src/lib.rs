//! C ABI over the `equipart` solver.
//!
//! Functions and witnesses live behind opaque handles released with the
//! matching `*_free`. Every fallible call returns an [`EqpStatus`]; the
//! message of the last failure on the calling thread is available from
//! [`eqp_last_error`]. Strings returned through out-parameters are owned by
//! the caller and released with [`eqp_string_free`].

use std::cell::RefCell;
use std::collections::BTreeMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use equipart::{oracle, Error, PartitionWitness, Segment, SegmentFunction, SolveConfig};

/// Opaque segment function.
pub struct EqpFunction(SegmentFunction);

/// Opaque partition witness.
pub struct EqpWitness(PartitionWitness);

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EqpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    Validation = 4,
    Unsolved = 5,
    Internal = 6,
    Panic = 7,
}

/// Solver settings. A `band` that is not a positive finite number selects
/// the default band.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct EqpSolveConfig {
    pub grid_n: usize,
    pub grid_m: usize,
    pub band: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub fd_step: f64,
    pub max_candidates: usize,
    pub retry: bool,
}

impl From<&SolveConfig> for EqpSolveConfig {
    fn from(c: &SolveConfig) -> Self {
        EqpSolveConfig {
            grid_n: c.grid_n,
            grid_m: c.grid_m,
            band: c.band.unwrap_or(0.0),
            tol: c.tol,
            max_iter: c.max_iter,
            fd_step: c.fd_step,
            max_candidates: c.max_candidates,
            retry: c.retry,
        }
    }
}

impl From<&EqpSolveConfig> for SolveConfig {
    fn from(c: &EqpSolveConfig) -> Self {
        SolveConfig {
            grid_n: c.grid_n,
            grid_m: c.grid_m,
            band: (c.band.is_finite() && c.band > 0.0).then_some(c.band),
            tol: c.tol,
            max_iter: c.max_iter,
            fd_step: c.fd_step,
            max_candidates: c.max_candidates,
            retry: c.retry,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> EqpStatus {
    match e {
        Error::Parse { .. } => EqpStatus::Parse,
        Error::Unsolved(_) | Error::ResolutionTooCoarse { .. } => EqpStatus::Unsolved,
        Error::InvalidSegment { .. } | Error::InvalidConfiguration(_) | Error::Precondition(_) => {
            EqpStatus::InvalidArgument
        }
        Error::DiagonalViolation { .. }
        | Error::Evaluation { .. }
        | Error::Integration { .. }
        | Error::NotNice { .. }
        | Error::Degeneracy { .. } => EqpStatus::Validation,
        _ => EqpStatus::Internal,
    }
}

struct Failure(EqpStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard(body: impl FnOnce() -> Result<(), Failure>) -> EqpStatus {
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => EqpStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("panic inside equipart");
            EqpStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(EqpStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(EqpStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| null(what))
}

fn to_c_string(s: String) -> Result<*mut c_char, Failure> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| Failure(EqpStatus::Internal, "string contains NUL".into()))
}

/// Message of the last failed call on this thread, or null. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eqp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn eqp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

#[no_mangle]
pub extern "C" fn eqp_solve_config_default() -> EqpSolveConfig {
    EqpSolveConfig::from(&SolveConfig::default())
}

/// Parses an expression in `a` and `b`.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqp_function_from_expression(
    text: *const c_char,
    out: *mut *mut EqpFunction,
) -> EqpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let f = SegmentFunction::parse_expression(str_arg(text, "text")?)?;
        *out = Box::into_raw(Box::new(EqpFunction(f)));
        Ok(())
    })
}

/// Built-in family by name. `params_json` is null or a JSON object of
/// string values, e.g. `{"density": "2*t"}` or `{"freq": "1", "phase": "1"}`.
///
/// # Safety
/// `name` and (when non-null) `params_json` must be NUL-terminated strings;
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqp_function_from_family(
    name: *const c_char,
    params_json: *const c_char,
    out: *mut *mut EqpFunction,
) -> EqpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let name = str_arg(name, "name")?;
        let params: BTreeMap<String, String> = if params_json.is_null() {
            BTreeMap::new()
        } else {
            serde_json::from_str(str_arg(params_json, "params_json")?)
                .map_err(|e| Failure(EqpStatus::InvalidArgument, format!("params_json: {e}")))?
        };
        let f = SegmentFunction::family(name, &params)?;
        *out = Box::into_raw(Box::new(EqpFunction(f)));
        Ok(())
    })
}

/// `f([a, b])`.
///
/// # Safety
/// `f` must come from this library and not be freed; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqp_function_eval(f: *const EqpFunction, a: f64, b: f64, out: *mut f64) -> EqpStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        let out = out_arg(out, "out")?;
        *out = f.0.eval(Segment::new(a, b)?)?;
        Ok(())
    })
}

/// Checks `f([a, a]) = 0` on a uniform sample of `samples` points.
///
/// # Safety
/// `f` must come from this library and not be freed.
#[no_mangle]
pub unsafe extern "C" fn eqp_function_validate_diagonal(f: *const EqpFunction, samples: usize) -> EqpStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        f.0.validate_diagonal(samples, equipart::segfunc::DIAGONAL_TOL)?;
        Ok(())
    })
}

/// # Safety
/// `f` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eqp_function_free(f: *mut EqpFunction) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

/// Equipartition of `[0, 1]` into `m` parts. `config` may be null for
/// defaults. A witness that did not reach the tolerance is still returned
/// (check [`eqp_witness_converged`]).
///
/// # Safety
/// `f` must come from this library; `config` must be null or valid; `out`
/// must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqp_solve(
    f: *const EqpFunction,
    m: usize,
    config: *const EqpSolveConfig,
    out: *mut *mut EqpWitness,
) -> EqpStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        let out = out_arg(out, "out")?;
        let cfg = config.as_ref().map(SolveConfig::from).unwrap_or_default();
        let w = equipart::solve(&f.0, m, &cfg)?;
        *out = Box::into_raw(Box::new(EqpWitness(w)));
        Ok(())
    })
}

/// # Safety
/// `w` must be null or a live witness.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_parts(w: *const EqpWitness) -> usize {
    w.as_ref().map_or(0, |w| w.0.m)
}

/// Number of interior cuts (`m − 1`).
///
/// # Safety
/// `w` must be null or a live witness.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_cut_count(w: *const EqpWitness) -> usize {
    w.as_ref().map_or(0, |w| w.0.cuts.len())
}

/// Copies the interior cuts into `buf`, which holds `len` values.
///
/// # Safety
/// `w` must be a live witness; `buf` must be writable for `len` values.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_cuts(w: *const EqpWitness, buf: *mut f64, len: usize) -> EqpStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("w"))?;
        let cuts = &w.0.cuts;
        if cuts.is_empty() {
            return Ok(());
        }
        if buf.is_null() {
            return Err(null("buf"));
        }
        if len < cuts.len() {
            return Err(Failure(
                EqpStatus::InvalidArgument,
                format!("buffer holds {len} values, need {}", cuts.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, cuts.len()).copy_from_slice(cuts);
        Ok(())
    })
}

/// Common part value `y` (unscaled), or NaN for null.
///
/// # Safety
/// `w` must be null or a live witness.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_value(w: *const EqpWitness) -> f64 {
    w.as_ref().map_or(f64::NAN, |w| w.0.y)
}

/// # Safety
/// `w` must be null or a live witness.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_max_residual(w: *const EqpWitness) -> f64 {
    w.as_ref().map_or(f64::NAN, |w| w.0.max_residual())
}

/// # Safety
/// `w` must be null or a live witness.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_converged(w: *const EqpWitness) -> bool {
    w.as_ref().is_some_and(|w| w.0.converged)
}

/// Witness as JSON; free the string with [`eqp_string_free`].
///
/// # Safety
/// `w` must be a live witness; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_to_json(w: *const EqpWitness, out: *mut *mut c_char) -> EqpStatus {
    guard(|| {
        let w = w.as_ref().ok_or_else(|| null("w"))?;
        let out = out_arg(out, "out")?;
        *out = to_c_string(serde_json::to_string(&w.0).map_err(Error::from)?)?;
        Ok(())
    })
}

/// # Safety
/// `w` must be null or come from this library, and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn eqp_witness_free(w: *mut EqpWitness) {
    if !w.is_null() {
        drop(Box::from_raw(w));
    }
}

/// Exhaustive grid search (`m ≤ 3`, `grid ≤ 400`) as a JSON report.
///
/// # Safety
/// `f` must come from this library; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn eqp_oracle_exhaustive_json(
    f: *const EqpFunction,
    m: usize,
    grid: usize,
    out: *mut *mut c_char,
) -> EqpStatus {
    guard(|| {
        let f = f.as_ref().ok_or_else(|| null("f"))?;
        let out = out_arg(out, "out")?;
        let report = oracle::exhaustive(&f.0, m, grid)?.report(&f.0)?;
        *out = to_c_string(serde_json::to_string(&report).map_err(Error::from)?)?;
        Ok(())
    })
}

/// # Safety
/// `s` must be null or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn eqp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

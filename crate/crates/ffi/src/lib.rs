//! C ABI over `freqlab`: exact solutions, classical bundles, the classical
//! three-ball check and scenario runs.
//!
//! Every function returns an [`FlqStatus`]; on failure the message is kept
//! per thread and can be copied out with [`flq_last_error`]. Handles are
//! opaque and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use freqlab::certify::{three_ball_classical, RadiiTriple};
use freqlab::cli::{self, CliError, RunOptions};
use freqlab::frequency::{classical_bundle, FrequencyBundle};
use freqlab::quad::BallDomain;
use freqlab::solutions::{HarmonicVariant, SolutionField};
use freqlab::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    Config = 3,
    Parse = 4,
    Domain = 5,
    Precondition = 6,
    Degenerate = 7,
    Numerical = 8,
    Io = 9,
    OutOfRange = 10,
    Panic = 11,
}

impl From<&Error> for FlqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config { .. } => FlqStatus::Config,
            Error::Parse(_) => FlqStatus::Parse,
            Error::Domain(_) => FlqStatus::Domain,
            Error::Precondition(_) => FlqStatus::Precondition,
            Error::Degenerate { .. } => FlqStatus::Degenerate,
            Error::NonFinite { .. } | Error::Decomposition(_) | Error::Solver(_) | Error::Fit(_) => {
                FlqStatus::Numerical
            }
            Error::Io(_) => FlqStatus::Io,
        }
    }
}

/// Opaque solution handle.
pub struct FlqSolution(SolutionField);

/// Opaque bundle handle.
pub struct FlqBundle(FrequencyBundle);

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FlqBundleRow {
    pub r: f64,
    pub h: f64,
    pub d: f64,
    pub l: f64,
    pub n: f64,
    pub ntilde: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct FlqThreeBall {
    pub kappa: f64,
    pub lhs: f64,
    pub factor1: f64,
    pub factor3: f64,
    pub log_slack: f64,
    /// NaN when no finite constant exists.
    pub fitted_c: f64,
    pub passed: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: impl Into<String>) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg.into());
}

fn fail(e: &Error) -> FlqStatus {
    set_error(e.to_string());
    FlqStatus::from(e)
}

fn guard<F: FnOnce() -> FlqStatus>(f: F) -> FlqStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(s) => {
            if s == FlqStatus::Ok {
                set_error("");
            }
            s
        }
        Err(_) => {
            set_error("panic inside freqlab");
            FlqStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char) -> Result<&'a str, FlqStatus> {
    if p.is_null() {
        set_error("null string argument");
        return Err(FlqStatus::NullPointer);
    }
    CStr::from_ptr(p).to_str().map_err(|_| {
        set_error("string argument is not valid UTF-8");
        FlqStatus::InvalidUtf8
    })
}

fn emit<T>(out: *mut *mut T, value: T) -> FlqStatus {
    // SAFETY: callers check `out` for null before computing.
    unsafe { *out = Box::into_raw(Box::new(value)) };
    FlqStatus::Ok
}

fn null(what: &str) -> FlqStatus {
    set_error(format!("null pointer: {what}"));
    FlqStatus::NullPointer
}

/// Copies the calling thread's last error message into `buf` (NUL
/// terminated, truncated to `len`) and returns the full length plus one.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn flq_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr(), buf as *mut u8, n);
            *buf.add(n) = 0;
        }
        bytes.len() + 1
    })
}

/// `exp(√M x₁)` in dimension `dim`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn flq_solution_exponential(dim: usize, m: f64, out: *mut *mut FlqSolution) -> FlqStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match SolutionField::exponential(dim, m) {
            Ok(s) => emit(out, FlqSolution(s)),
            Err(e) => fail(&e),
        }
    })
}

/// `sin(√M x₁)` in dimension `dim`.
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn flq_solution_oscillatory(dim: usize, m: f64, out: *mut *mut FlqSolution) -> FlqStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        match SolutionField::oscillatory(dim, m) {
            Ok(s) => emit(out, FlqSolution(s)),
            Err(e) => fail(&e),
        }
    })
}

/// Harmonic polynomial of `degree`; `variant` 0 = Re, 1 = Im, 2 = zonal (3D).
///
/// # Safety
/// `out` must be a valid pointer to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn flq_solution_harmonic(
    dim: usize,
    degree: u32,
    variant: u32,
    out: *mut *mut FlqSolution,
) -> FlqStatus {
    guard(|| {
        if out.is_null() {
            return null("out");
        }
        let v = match variant {
            0 => HarmonicVariant::Re,
            1 => HarmonicVariant::Im,
            2 => HarmonicVariant::Zonal,
            _ => {
                set_error(format!("unknown harmonic variant {variant}"));
                return FlqStatus::OutOfRange;
            }
        };
        match SolutionField::harmonic_polynomial(dim, degree, v) {
            Ok(s) => emit(out, FlqSolution(s)),
            Err(e) => fail(&e),
        }
    })
}

/// Value of the solution at `x[0..dim]`.
///
/// # Safety
/// `sol` must come from a `flq_solution_*` constructor; `x` must point to
/// `dim` doubles and `out` to one.
#[no_mangle]
pub unsafe extern "C" fn flq_solution_value(
    sol: *const FlqSolution,
    x: *const f64,
    dim: usize,
    out: *mut f64,
) -> FlqStatus {
    guard(|| {
        if sol.is_null() || x.is_null() || out.is_null() {
            return null("sol, x or out");
        }
        let s = &(*sol).0;
        if dim != s.dim() {
            set_error(format!("point has {dim} coordinates, solution lives in {}", s.dim()));
            return FlqStatus::Domain;
        }
        *out = s.value(std::slice::from_raw_parts(x, dim));
        FlqStatus::Ok
    })
}

/// # Safety
/// `sol` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn flq_solution_free(sol: *mut FlqSolution) {
    if !sol.is_null() {
        drop(Box::from_raw(sol));
    }
}

/// Classical bundle on `B_radius(0)` at `n_radii` radii.
///
/// # Safety
/// `sol` must be a live handle, `radii` must point to `n_radii` doubles and
/// `out` to a handle slot.
#[no_mangle]
pub unsafe extern "C" fn flq_bundle_classical(
    sol: *const FlqSolution,
    radius: f64,
    levels: u32,
    alpha: f64,
    radii: *const f64,
    n_radii: usize,
    out: *mut *mut FlqBundle,
) -> FlqStatus {
    guard(|| {
        if sol.is_null() || radii.is_null() || out.is_null() {
            return null("sol, radii or out");
        }
        let s = &(*sol).0;
        let rs = std::slice::from_raw_parts(radii, n_radii);
        let res = BallDomain::centered(s.dim(), radius, levels)
            .and_then(|d| classical_bundle(s, &d, alpha, rs));
        match res {
            Ok(b) => emit(out, FlqBundle(b)),
            Err(e) => fail(&e),
        }
    })
}

/// Number of rows, 0 for a null handle.
///
/// # Safety
/// `b` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn flq_bundle_len(b: *const FlqBundle) -> usize {
    if b.is_null() {
        0
    } else {
        let bundle = &*b;
        bundle.0.rows.len()
    }
}

/// # Safety
/// `b` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn flq_bundle_row(b: *const FlqBundle, i: usize, out: *mut FlqBundleRow) -> FlqStatus {
    guard(|| {
        if b.is_null() || out.is_null() {
            return null("bundle or out");
        }
        let bundle = &*b;
        let rows = &bundle.0.rows;
        let Some(r) = rows.get(i) else {
            set_error(format!("row {i} out of range"));
            return FlqStatus::OutOfRange;
        };
        *out = FlqBundleRow {
            r: r.r,
            h: r.h,
            d: r.d,
            l: r.l,
            n: r.n,
            ntilde: r.ntilde,
        };
        FlqStatus::Ok
    })
}

/// # Safety
/// `b` must be null or a live handle; it is invalid afterwards.
#[no_mangle]
pub unsafe extern "C" fn flq_bundle_free(b: *mut FlqBundle) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

/// Classical three-ball check on `B_radius(0)`.
///
/// # Safety
/// `sol` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn flq_three_ball_classical(
    sol: *const FlqSolution,
    radius: f64,
    levels: u32,
    r1: f64,
    r2: f64,
    r3: f64,
    out: *mut FlqThreeBall,
) -> FlqStatus {
    guard(|| {
        if sol.is_null() || out.is_null() {
            return null("sol or out");
        }
        let s = &(*sol).0;
        let res = BallDomain::centered(s.dim(), radius, levels)
            .and_then(|d| three_ball_classical(s, &d, &RadiiTriple::new(r1, r2, r3)));
        match res {
            Ok(rep) => {
                *out = FlqThreeBall {
                    kappa: rep.kappa,
                    lhs: rep.lhs,
                    factor1: rep.rhs_factors.0,
                    factor3: rep.rhs_factors.1,
                    log_slack: rep.log_slack,
                    fitted_c: rep.fitted_c.unwrap_or(f64::NAN),
                    passed: rep.passed,
                };
                FlqStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Runs a scenario file. `out_dir` may be null (environment or scenario
/// default); `levels` 0 keeps the scenario's level. `exit_code` receives the
/// command-line exit status (0 pass, 1 verdict failure, 2 usage, 3 internal).
///
/// # Safety
/// `path` must be a NUL-terminated string, `out_dir` null or one, and
/// `exit_code` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn flq_run_scenario(
    path: *const c_char,
    out_dir: *const c_char,
    levels: u32,
    exit_code: *mut i32,
) -> FlqStatus {
    guard(|| {
        if exit_code.is_null() {
            return null("exit_code");
        }
        let path = match str_arg(path) {
            Ok(p) => PathBuf::from(p),
            Err(s) => return s,
        };
        let out_dir = if out_dir.is_null() {
            None
        } else {
            match str_arg(out_dir) {
                Ok(d) => Some(PathBuf::from(d)),
                Err(s) => return s,
            }
        };
        let opts = RunOptions {
            levels: (levels > 0).then_some(levels),
            out_dir,
            ..Default::default()
        };
        match cli::run_file(&path, &opts) {
            Ok(m) => {
                *exit_code = m.exit_code();
                FlqStatus::Ok
            }
            Err(e) => {
                *exit_code = e.exit_code();
                match e {
                    CliError::Usage(err) | CliError::Internal(err) => fail(&err),
                }
            }
        }
    })
}

//! C ABI over `fitgauss`.
//!
//! Tableaus are opaque handles created by `fg_tableau_*` and released with
//! `fg_tableau_free`. Every fallible call returns an [`FgStatus`]; on failure
//! the message is available from `fg_last_error` on the same thread.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use fitgauss::analysis::{dissipation, phase_lag, AnalysisError};
use fitgauss::bench::{method_by_name, run_matrix, RunMatrix};
use fitgauss::fitting::{
    b2_a22_fitted, b2_phase_fitted, fit_tableau, FitError, FittedMethodSpec, MethodKind,
};
use fitgauss::problems::problem_by_name;
use fitgauss::tableau::{gauss2, load_tableau, ButcherTableau};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    SingularParameter = 3,
    BranchFailure = 4,
    SingularMatrix = 5,
    ParseError = 6,
    IntegrationFailed = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FgMethodKind {
    Classical = 0,
    PhaseFitted = 1,
    PhaseDissipationFitted = 2,
}

impl From<FgMethodKind> for MethodKind {
    fn from(k: FgMethodKind) -> Self {
        match k {
            FgMethodKind::Classical => MethodKind::Classical,
            FgMethodKind::PhaseFitted => MethodKind::PhaseFitted,
            FgMethodKind::PhaseDissipationFitted => MethodKind::PhaseDissipationFitted,
        }
    }
}

/// Opaque Butcher tableau.
pub struct FgTableau {
    inner: ButcherTableau,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

fn fail(status: FgStatus, msg: impl Into<String>) -> FgStatus {
    set_error(msg);
    status
}

fn fit_status(e: &FitError) -> FgStatus {
    match e {
        FitError::InvalidParameter { .. } => FgStatus::InvalidArgument,
        FitError::SingularParameter { .. } => FgStatus::SingularParameter,
        FitError::BranchFailure { .. } => FgStatus::BranchFailure,
    }
}

fn analysis_status(e: &AnalysisError) -> FgStatus {
    match e {
        AnalysisError::SingularMatrix { .. } => FgStatus::SingularMatrix,
    }
}

/// Runs `f`, clearing the error slot first and turning panics into
/// [`FgStatus::Panic`].
fn guard(f: impl FnOnce() -> FgStatus) -> FgStatus {
    clear_error();
    catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| fail(FgStatus::Panic, "internal panic"))
}

unsafe fn c_str<'a>(p: *const c_char) -> Result<&'a str, FgStatus> {
    if p.is_null() {
        return Err(fail(FgStatus::NullPointer, "null string argument"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(FgStatus::InvalidArgument, "string argument is not UTF-8"))
}

unsafe fn emit(out: *mut *mut FgTableau, tab: ButcherTableau) -> FgStatus {
    *out = Box::into_raw(Box::new(FgTableau { inner: tab }));
    FgStatus::Ok
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next `fg_*` call on the same thread.
#[no_mangle]
pub extern "C" fn fg_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// The classical two-stage Gauss tableau.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fg_tableau_gauss2(out: *mut *mut FgTableau) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return fail(FgStatus::NullPointer, "null output handle");
        }
        emit(out, gauss2())
    })
}

/// The tableau of `kind` fitted at `v = omega h`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn fg_tableau_fit(
    kind: FgMethodKind,
    v: f64,
    out: *mut *mut FgTableau,
) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return fail(FgStatus::NullPointer, "null output handle");
        }
        match fit_tableau(FittedMethodSpec::new(kind.into(), v)) {
            Ok(tab) => emit(out, tab),
            Err(e) => fail(fit_status(&e), e.to_string()),
        }
    })
}

/// Parses a tableau from text: the stage count, then one `c A-row` line
/// per stage, then the weights.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_tableau_parse(
    text: *const c_char,
    out: *mut *mut FgTableau,
) -> FgStatus {
    guard(|| {
        if out.is_null() {
            return fail(FgStatus::NullPointer, "null output handle");
        }
        let text = match c_str(text) {
            Ok(t) => t,
            Err(s) => return s,
        };
        match load_tableau(text) {
            Ok(loaded) => emit(out, loaded.tableau),
            Err(e) => fail(FgStatus::ParseError, e.to_string()),
        }
    })
}

/// Releases a handle. Null is accepted.
///
/// # Safety
/// `tab` must come from an `fg_tableau_*` constructor and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn fg_tableau_free(tab: *mut FgTableau) {
    if !tab.is_null() {
        drop(Box::from_raw(tab));
    }
}

/// Number of stages, or 0 for a null handle.
///
/// # Safety
/// `tab` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn fg_tableau_stages(tab: *const FgTableau) -> usize {
    tab.as_ref().map_or(0, |t| t.inner.stages())
}

/// Copies `c` (s values), `A` (s * s values, row-major) and `b` (s values)
/// into caller buffers. `stages` must equal the tableau's stage count.
///
/// # Safety
/// `tab` must be a live handle and each buffer must hold the stated count.
#[no_mangle]
pub unsafe extern "C" fn fg_tableau_coefficients(
    tab: *const FgTableau,
    stages: usize,
    c: *mut f64,
    a: *mut f64,
    b: *mut f64,
) -> FgStatus {
    guard(|| {
        let Some(t) = tab.as_ref() else {
            return fail(FgStatus::NullPointer, "null tableau");
        };
        if c.is_null() || a.is_null() || b.is_null() {
            return fail(FgStatus::NullPointer, "null coefficient buffer");
        }
        let s = t.inner.stages();
        if stages != s {
            return fail(
                FgStatus::InvalidArgument,
                format!("tableau has {s} stages, buffers sized for {stages}"),
            );
        }
        ptr::copy_nonoverlapping(t.inner.c().as_ptr(), c, s);
        ptr::copy_nonoverlapping(t.inner.b().as_ptr(), b, s);
        for i in 0..s {
            ptr::copy_nonoverlapping(t.inner.a_row(i).as_ptr(), a.add(i * s), s);
        }
        FgStatus::Ok
    })
}

unsafe fn analysis_call(
    tab: *const FgTableau,
    out: *mut f64,
    f: impl FnOnce(&ButcherTableau) -> Result<f64, AnalysisError>,
) -> FgStatus {
    guard(|| {
        let Some(t) = tab.as_ref() else {
            return fail(FgStatus::NullPointer, "null tableau");
        };
        if out.is_null() {
            return fail(FgStatus::NullPointer, "null output");
        }
        match f(&t.inner) {
            Ok(x) => {
                *out = x;
                FgStatus::Ok
            }
            Err(e) => fail(analysis_status(&e), e.to_string()),
        }
    })
}

/// Phase-lag of `tab` at `v`.
///
/// # Safety
/// `tab` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_phase_lag(tab: *const FgTableau, v: f64, out: *mut f64) -> FgStatus {
    analysis_call(tab, out, |t| phase_lag(t, v))
}

/// Dissipation of `tab` at `v`.
///
/// # Safety
/// `tab` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fg_dissipation(tab: *const FgTableau, v: f64, out: *mut f64) -> FgStatus {
    analysis_call(tab, out, |t| dissipation(t, v))
}

/// Fitted `b2` and `a22` at `v`; `a22` is 1/4 unless `kind` fits dissipation.
///
/// # Safety
/// `b2` and `a22` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_fit_coefficients(
    kind: FgMethodKind,
    v: f64,
    b2: *mut f64,
    a22: *mut f64,
) -> FgStatus {
    guard(|| {
        if b2.is_null() || a22.is_null() {
            return fail(FgStatus::NullPointer, "null output");
        }
        let res = match kind {
            FgMethodKind::Classical => Ok((0.5, 0.25)),
            FgMethodKind::PhaseFitted => b2_phase_fitted(v).map(|c| (c.value, 0.25)),
            FgMethodKind::PhaseDissipationFitted => {
                b2_a22_fitted(v).map(|(b, a)| (b.value, a.value))
            }
        };
        match res {
            Ok((b, a)) => {
                *b2 = b;
                *a22 = a;
                FgStatus::Ok
            }
            Err(e) => fail(fit_status(&e), e.to_string()),
        }
    })
}

/// Runs one benchmark cell and reports its error and work. The step count
/// may be raised to align frequency breakpoints; `n_steps_used` receives the
/// count actually run.
///
/// # Safety
/// `method` and `problem` must be NUL-terminated strings; the outputs must
/// be writable.
#[no_mangle]
pub unsafe extern "C" fn fg_run_problem(
    method: *const c_char,
    problem: *const c_char,
    n_steps: usize,
    error: *mut f64,
    work: *mut usize,
    n_steps_used: *mut usize,
) -> FgStatus {
    guard(|| {
        if error.is_null() || work.is_null() || n_steps_used.is_null() {
            return fail(FgStatus::NullPointer, "null output");
        }
        let (method, problem) = match (c_str(method), c_str(problem)) {
            (Ok(m), Ok(p)) => (m, p),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        let matrix = match (method_by_name(method), problem_by_name(problem)) {
            (Ok(m), Ok(p)) => RunMatrix {
                methods: vec![m],
                problems: vec![p],
                steps: vec![n_steps],
                solver: Default::default(),
                timing: false,
            },
            (Err(e), _) => return fail(FgStatus::InvalidArgument, e.to_string()),
            (_, Err(e)) => return fail(FgStatus::InvalidArgument, e.to_string()),
        };
        let records = match run_matrix(&matrix) {
            Ok(r) => r,
            Err(e) => return fail(FgStatus::InvalidArgument, e.to_string()),
        };
        let rec = &records[0];
        *work = rec.work;
        *n_steps_used = rec.n_steps;
        *error = rec.error;
        if rec.failed() {
            fail(FgStatus::IntegrationFailed, rec.reason.clone())
        } else {
            FgStatus::Ok
        }
    })
}

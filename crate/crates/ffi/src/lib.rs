//! C ABI for `g2flow`.
//!
//! Objects are exposed as opaque handles created by `*_new` functions and
//! released with the matching `*_free`. Every fallible function returns a
//! [`G2Status`]; on failure a message is available from
//! [`g2flow_last_error`] on the same thread. Panics never cross the
//! boundary; they are reported as [`G2Status::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use g2flow::b7::{flow_metric, B7Params, MetricTrajectory};
use g2flow::classify::{
    boundary_curve, scan_region, shoot_backward, ClassificationMap, EndConditions, ScanOptions,
    Shot,
};
use g2flow::instanton::{flow_instanton, InstantonInit, InstantonTrajectory, Verdict};
use g2flow::taubnut::{asd_eval, AsdParams};
use g2flow::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum G2Status {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Undecided = 4,
    NotClosed = 5,
    OutOfRange = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum G2Verdict {
    Abelian = 0,
    CompleteExponential = 1,
    CompleteBoundary = 2,
    Incomplete = 3,
    Undecided = 4,
}

/// A flowed B7 metric.
pub struct G2Metric(MetricTrajectory);

/// A classified instanton trajectory.
pub struct G2Instanton(InstantonTrajectory);

/// A classified lattice of initial conditions.
pub struct G2ScanMap(ClassificationMap);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Fail(G2Status, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidInput(_) | Error::InvalidEnd(_) | Error::BadBracket { .. } => {
                G2Status::InvalidArgument
            }
            Error::Undecided { .. } => G2Status::Undecided,
            _ => G2Status::Numerical,
        };
        Fail(status, e.to_string())
    }
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).expect("no interior nul");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> G2Status {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => G2Status::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            G2Status::Panic
        }
    }
}

unsafe fn as_ref<'a, T>(p: *const T, name: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail(G2Status::NullPointer, format!("{name} is null")))
}

unsafe fn write<T>(p: *mut T, v: T, name: &str) -> Result<(), Fail> {
    if p.is_null() {
        return Err(Fail(G2Status::NullPointer, format!("{name} is null")));
    }
    p.write(v);
    Ok(())
}

unsafe fn write_opt<T>(p: *mut T, v: T) {
    if !p.is_null() {
        p.write(v);
    }
}

fn verdict_parts(v: &Verdict) -> (G2Verdict, f64, f64) {
    match *v {
        Verdict::Abelian { g_inf } => (G2Verdict::Abelian, g_inf, f64::NAN),
        Verdict::CompleteExponential { g_inf, lambda_fit } => {
            (G2Verdict::CompleteExponential, g_inf, lambda_fit)
        }
        Verdict::CompleteBoundary { g_inf } => (G2Verdict::CompleteBoundary, g_inf, f64::NAN),
        Verdict::Incomplete { .. } => (G2Verdict::Incomplete, f64::NAN, f64::NAN),
        Verdict::Undecided { g_inf, .. } => (G2Verdict::Undecided, g_inf, f64::NAN),
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn g2flow_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failure on this thread, or null. The pointer stays
/// valid until the next call into the library on this thread.
#[no_mangle]
pub extern "C" fn g2flow_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Flows the family member `(r0, abar)` to `t_max`.
///
/// # Safety
/// `out` must be a valid pointer to writable storage for a handle.
#[no_mangle]
pub unsafe extern "C" fn g2flow_metric_new(
    r0: f64,
    abar: f64,
    t_max: f64,
    rel_tol: f64,
    out: *mut *mut G2Metric,
) -> G2Status {
    guard(|| {
        let p = B7Params::new(r0, abar)?;
        let m = flow_metric(&p, t_max, rel_tol)?;
        write(out, Box::into_raw(Box::new(G2Metric(m))), "out")
    })
}

/// # Safety
/// `m` must be null or a handle from [`g2flow_metric_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn g2flow_metric_free(m: *mut G2Metric) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// Asymptotic circle length `ℓ` and its fit error. Fails with
/// `Numerical` for members that are not ALC.
///
/// # Safety
/// `m` must be a live metric handle; `ell` must be writable, `fit_err` may be null.
#[no_mangle]
pub unsafe extern "C" fn g2flow_metric_ell(
    m: *const G2Metric,
    ell: *mut f64,
    fit_err: *mut f64,
) -> G2Status {
    guard(|| {
        let m = as_ref(m, "metric")?;
        let e =
            m.0.ell
                .ok_or_else(|| Fail(G2Status::Numerical, "member has no ell".into()))?;
        write(ell, e.ell, "ell")?;
        write_opt(fit_err, e.fit_err);
        Ok(())
    })
}

/// Writes `(A₁, A₃, B₁, B₃)` at `t` into `out[0..4]`.
///
/// # Safety
/// `m` must be a live metric handle and `out` must point to four writable doubles.
#[no_mangle]
pub unsafe extern "C" fn g2flow_metric_coeffs(
    m: *const G2Metric,
    t: f64,
    out: *mut f64,
) -> G2Status {
    guard(|| {
        let m = as_ref(m, "metric")?;
        let c = m.0.coeffs_at(t).ok_or_else(|| {
            Fail(
                G2Status::OutOfRange,
                format!("t = {t} outside [{}, {}]", m.0.t_min(), m.0.t_max),
            )
        })?;
        if out.is_null() {
            return Err(Fail(G2Status::NullPointer, "out is null".into()));
        }
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&c.to_array());
        Ok(())
    })
}

/// Flows and classifies the instanton with initial data `(f1, g1)`.
///
/// # Safety
/// `m` must be a live metric handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn g2flow_instanton_new(
    m: *const G2Metric,
    f1: f64,
    g1: f64,
    t_max: f64,
    rel_tol: f64,
    out: *mut *mut G2Instanton,
) -> G2Status {
    guard(|| {
        let m = as_ref(m, "metric")?;
        let tr = flow_instanton(InstantonInit::new(f1, g1), &m.0, t_max, rel_tol)?;
        write(out, Box::into_raw(Box::new(G2Instanton(tr))), "out")
    })
}

/// # Safety
/// `h` must be null or a handle from [`g2flow_instanton_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn g2flow_instanton_free(h: *mut G2Instanton) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Verdict with `G∞` and `λ` (NaN where not defined).
///
/// # Safety
/// `h` must be a live instanton handle; `kind` writable; `g_inf`, `lambda` may be null.
#[no_mangle]
pub unsafe extern "C" fn g2flow_instanton_verdict(
    h: *const G2Instanton,
    kind: *mut G2Verdict,
    g_inf: *mut f64,
    lambda: *mut f64,
) -> G2Status {
    guard(|| {
        let h = as_ref(h, "instanton")?;
        let (k, g, l) = verdict_parts(&h.0.verdict);
        write(kind, k, "kind")?;
        write_opt(g_inf, g);
        write_opt(lambda, l);
        Ok(())
    })
}

/// Number of stored samples.
///
/// # Safety
/// `h` must be a live instanton handle and `len` writable.
#[no_mangle]
pub unsafe extern "C" fn g2flow_instanton_len(h: *const G2Instanton, len: *mut usize) -> G2Status {
    guard(|| {
        let h = as_ref(h, "instanton")?;
        write(len, h.0.samples.len(), "len")
    })
}

/// Sample `i` as `(t, f⁺, g⁺)`.
///
/// # Safety
/// `h` must be a live instanton handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn g2flow_instanton_sample(
    h: *const G2Instanton,
    i: usize,
    t: *mut f64,
    f: *mut f64,
    g: *mut f64,
) -> G2Status {
    guard(|| {
        let h = as_ref(h, "instanton")?;
        let s = h.0.samples.get(i).ok_or_else(|| {
            Fail(
                G2Status::OutOfRange,
                format!("sample {i} of {}", h.0.samples.len()),
            )
        })?;
        write(t, s.t, "t")?;
        write(f, s.f, "f")?;
        write(g, s.g, "g")
    })
}

/// Classifies the `n_f × n_g` lattice over `[f1_lo, f1_hi] × [g1_lo, g1_hi]`.
///
/// # Safety
/// `m` must be a live metric handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn g2flow_scan_new(
    m: *const G2Metric,
    f1_lo: f64,
    f1_hi: f64,
    g1_lo: f64,
    g1_hi: f64,
    n_f: usize,
    n_g: usize,
    t_max: f64,
    rel_tol: f64,
    out: *mut *mut G2ScanMap,
) -> G2Status {
    guard(|| {
        let m = as_ref(m, "metric")?;
        let opts = ScanOptions::new(t_max, rel_tol);
        let map = scan_region(&m.0, (f1_lo, f1_hi), (g1_lo, g1_hi), n_f, n_g, &opts)?;
        write(out, Box::into_raw(Box::new(G2ScanMap(map))), "out")
    })
}

/// # Safety
/// `s` must be null or a handle from [`g2flow_scan_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn g2flow_scan_free(s: *mut G2ScanMap) {
    if !s.is_null() {
        drop(Box::from_raw(s));
    }
}

/// Verdict of cell `(i, j)` (column `i` in `f₁`, row `j` in `g₁`).
///
/// # Safety
/// `s` must be a live scan handle; `kind` writable; `g_inf` may be null.
#[no_mangle]
pub unsafe extern "C" fn g2flow_scan_cell(
    s: *const G2ScanMap,
    i: usize,
    j: usize,
    kind: *mut G2Verdict,
    g_inf: *mut f64,
) -> G2Status {
    guard(|| {
        let s = as_ref(s, "scan")?;
        if i >= s.0.f1s.len() || j >= s.0.g1s.len() {
            return Err(Fail(
                G2Status::OutOfRange,
                format!("cell ({i}, {j}) of {} x {}", s.0.f1s.len(), s.0.g1s.len()),
            ));
        }
        let (k, g, _) = verdict_parts(&s.0.cell(i, j).verdict);
        write(kind, k, "kind")?;
        write_opt(g_inf, g);
        Ok(())
    })
}

/// Bisects for the boundary in `f₁` at fixed `g1` within `[lo, hi]`.
///
/// # Safety
/// `m` must be a live metric handle; `f_boundary` writable; `g_inf_check` may be null.
#[no_mangle]
pub unsafe extern "C" fn g2flow_boundary(
    m: *const G2Metric,
    g1: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    t_max: f64,
    rel_tol: f64,
    f_boundary: *mut f64,
    g_inf_check: *mut f64,
) -> G2Status {
    guard(|| {
        let m = as_ref(m, "metric")?;
        let b = boundary_curve(&m.0, g1, (lo, hi), tol, &ScanOptions::new(t_max, rel_tol))?;
        write(f_boundary, b.f_boundary, "f_boundary")?;
        write_opt(g_inf_check, b.g_inf_check);
        Ok(())
    })
}

/// Shoots back from end data `(g_inf, lambda)` at `t_end` to initial data
/// `(f1, g1)`. Returns `NotClosed` when the solution does not reach the
/// singular orbit.
///
/// # Safety
/// `m` must be a live metric handle; `f1`, `g1` writable.
#[no_mangle]
pub unsafe extern "C" fn g2flow_end_shoot(
    m: *const G2Metric,
    g_inf: f64,
    lambda: f64,
    t_end: f64,
    rel_tol: f64,
    f1: *mut f64,
    g1: *mut f64,
) -> G2Status {
    guard(|| {
        let m = as_ref(m, "metric")?;
        match shoot_backward(EndConditions::new(g_inf, lambda), &m.0, t_end, rel_tol)? {
            Shot::Closed { f1: a, g1: b } => {
                write(f1, a, "f1")?;
                write(g1, b, "g1")
            }
            Shot::FailedToClose { t, reason } => Err(Fail(
                G2Status::NotClosed,
                format!("fails to close at t = {t}: {reason}"),
            )),
        }
    })
}

/// ASD instanton `(a₁, a₃)` on Taub-NUT with parameter `m` at `eta`, for
/// the two-parameter family `(C, D)`.
///
/// # Safety
/// `a1` and `a3` must be writable.
#[no_mangle]
pub unsafe extern "C" fn g2flow_asd_eval(
    m: f64,
    c: f64,
    d: f64,
    eta: f64,
    a1: *mut f64,
    a3: *mut f64,
) -> G2Status {
    guard(|| {
        let p = AsdParams::TwoParameter { c, d };
        p.validate()?;
        let (x, y) = asd_eval(p, m, eta)?;
        write(a1, x, "a1")?;
        write(a3, y, "a3")
    })
}

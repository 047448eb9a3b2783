//! C ABI over `tailq`.
//!
//! Conventions:
//! - every fallible function returns a [`TailqStatus`] and writes its result
//!   through an out-pointer, which is left untouched on failure;
//! - on failure, [`tailq_last_error`] returns a message for the calling thread;
//! - handles are opaque, created by a `*_new` function and released with the
//!   matching `*_free`; freeing NULL is a no-op;
//! - strings are NUL-terminated UTF-8 and are only borrowed for the call.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use tailq::asymptotics::{m_k, poisson_busy_customers, poisson_prefactor, AsymptoteCurve, SeriesTruncation};
use tailq::experiment::ExperimentConfig;
use tailq::{DerivedConstants, DistributionSpec, Error, ModelParams};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailqStatus {
    Ok = 0,
    /// A required pointer argument was NULL.
    NullPointer = 1,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 2,
    /// A numeric argument or model parameter is out of range.
    InvalidParameter = 3,
    /// A distribution string could not be parsed.
    Parse = 4,
    /// The model has traffic intensity >= 1.
    Unstable = 5,
    /// An experiment configuration was rejected.
    Config = 6,
    /// The simulation failed (event budget, dropped replications).
    Simulation = 7,
    /// Reading or writing report files failed.
    Io = 8,
    /// A Rust panic was caught at the boundary; this is a bug.
    Panic = 9,
}

/// Asymptote families available through [`tailq_curve_new`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TailqCurveKind {
    /// Sojourn of a customer arriving to an empty system; `constant` is the
    /// prefactor `E(1 + X_{K-1})`.
    FirstCustomerSojourn = 0,
    /// Its regularly varying form `C L(x) / x^shape`; same `constant`.
    FirstCustomerSojournRv = 1,
    /// Customer-stationary sojourn; `constant` is ignored.
    StationarySojourn = 2,
    /// Busy-period length; `constant` is `E tau^H`.
    BusyPeriod = 3,
    /// Customers per busy period; `constant` is `E tau^H`.
    BusyCount = 4,
}

/// Closed-form constants of a model.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct TailqConstants {
    /// Arrival rate.
    pub lambda: f64,
    /// Mean inter-arrival time.
    pub a: f64,
    /// Mean service time.
    pub b: f64,
    pub p: f64,
    pub q: f64,
    /// Branching rate `p + lambda b`.
    pub r: f64,
    /// Traffic intensity `lambda b / q`.
    pub rho: f64,
    /// Mean compounded service `b / q`.
    pub b_h: f64,
    /// Limit of the fluid multipliers.
    pub m_inf: f64,
    /// Nonzero when `rho < 1`.
    pub stable: bool,
}

impl From<&DerivedConstants> for TailqConstants {
    fn from(c: &DerivedConstants) -> Self {
        Self {
            lambda: c.lambda,
            a: c.a,
            b: c.b,
            p: c.p,
            q: c.q,
            r: c.r,
            rho: c.rho,
            b_h: c.b_h,
            m_inf: c.m_inf,
            stable: c.stable,
        }
    }
}

/// A validated model and its constants.
pub struct TailqModel {
    params: ModelParams,
    consts: DerivedConstants,
}

/// An asymptote curve bound to one model.
pub struct TailqCurve {
    curve: AsymptoteCurve,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(TailqStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let status = match e {
            Error::InvalidParameter { .. }
            | Error::InfiniteMean(_)
            | Error::RvRequired(_)
            | Error::EmptyGrid
            | Error::UnsortedGrid
            | Error::ZeroPrediction { .. } => TailqStatus::InvalidParameter,
            Error::Parse { .. } => TailqStatus::Parse,
            Error::Instability { .. } => TailqStatus::Unstable,
            Error::Config { .. } => TailqStatus::Config,
            Error::Io(_) => TailqStatus::Io,
            _ => TailqStatus::Simulation,
        };
        Failure(status, e.to_string())
    }
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|slot| *slot.borrow_mut() = Some(c));
}

/// Runs `body` behind the ABI boundary: clears the thread's error, records
/// any failure and converts panics into [`TailqStatus::Panic`].
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> TailqStatus {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => TailqStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_error(message);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            TailqStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(TailqStatus::NullPointer, format!("`{what}` is NULL"))
}

/// # Safety
/// `ptr` is NULL or points to a NUL-terminated string.
unsafe fn text<'a>(ptr: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(ptr)
        .to_str()
        .map_err(|_| Failure(TailqStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

/// # Safety
/// `ptr` is NULL or valid for writes.
unsafe fn write<T>(ptr: *mut T, value: T, what: &str) -> Result<(), Failure> {
    if ptr.is_null() {
        return Err(null(what));
    }
    ptr.write(value);
    Ok(())
}

/// # Safety
/// `ptr` is NULL or points to a live handle.
unsafe fn handle<'a, T>(ptr: *const T, what: &str) -> Result<&'a T, Failure> {
    ptr.as_ref().ok_or_else(|| null(what))
}

/// Message describing the most recent failure on the calling thread, or NULL
/// if the last call succeeded. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn tailq_last_error() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ref().map_or(std::ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tailq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a model from distribution strings such as `"exp(rate=0.2)"` and
/// `"pareto(shape=2.5, scale=0.6)"`. Unstable models are accepted; curves
/// and experiments on them fail with [`TailqStatus::Unstable`].
///
/// # Safety
/// `arrival` and `service` are NUL-terminated strings; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailq_model_new(
    arrival: *const c_char,
    service: *const c_char,
    feedback_p: f64,
    out: *mut *mut TailqModel,
) -> TailqStatus {
    guard(|| {
        let arrival: DistributionSpec = text(arrival, "arrival")?.parse()?;
        let service: DistributionSpec = text(service, "service")?.parse()?;
        let params = ModelParams::new(arrival, service, feedback_p)?;
        let consts = params.derive_constants()?;
        let model = Box::new(TailqModel { params, consts });
        write(out, Box::into_raw(model), "out")
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` is NULL or a handle from [`tailq_model_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tailq_model_free(model: *mut TailqModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `model` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailq_model_constants(model: *const TailqModel, out: *mut TailqConstants) -> TailqStatus {
    guard(|| {
        let m = handle(model, "model")?;
        write(out, TailqConstants::from(&m.consts), "out")
    })
}

/// Fluid multiplier `m_k`: the queue ahead of a tagged customer at its
/// `k`-th return, per unit of a big service.
///
/// # Safety
/// `model` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailq_model_fluid_multiplier(model: *const TailqModel, k: u32, out: *mut f64) -> TailqStatus {
    guard(|| {
        let m = handle(model, "model")?;
        write(out, m_k(&m.consts, k), "out")
    })
}

/// Service-time tail `P(S > x)`.
///
/// # Safety
/// `model` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailq_service_tail(model: *const TailqModel, x: f64, out: *mut f64) -> TailqStatus {
    guard(|| {
        let m = handle(model, "model")?;
        write(out, m.params.service.tail(x), "out")
    })
}

/// Integrated service tail `(1/b) * integral_x^inf P(S > u) du`.
///
/// # Safety
/// `model` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailq_service_integrated_tail(model: *const TailqModel, x: f64, out: *mut f64) -> TailqStatus {
    guard(|| {
        let m = handle(model, "model")?;
        write(out, m.params.service.integrated_tail(x)?, "out")
    })
}

/// Builds an asymptote curve for `model`. `constant` is the family's free
/// constant (see [`TailqCurveKind`]); pass NaN to use its closed form, which
/// exists for Poisson arrivals only.
///
/// # Safety
/// `model` is a live handle; `out` is valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailq_curve_new(
    model: *const TailqModel,
    kind: TailqCurveKind,
    constant: f64,
    out: *mut *mut TailqCurve,
) -> TailqStatus {
    guard(|| {
        let m = handle(model, "model")?;
        let consts = m.params.stable_constants()?;
        let closed = |value: fn(&DerivedConstants) -> f64| -> Result<f64, Failure> {
            if !constant.is_nan() {
                Ok(constant)
            } else if m.params.has_poisson_arrivals() {
                Ok(value(&consts))
            } else {
                Err(Failure(
                    TailqStatus::InvalidParameter,
                    "`constant` has no closed form for non-Poisson arrivals; pass an estimate".into(),
                ))
            }
        };
        let params = m.params;
        let curve = match kind {
            TailqCurveKind::FirstCustomerSojourn => {
                AsymptoteCurve::first_customer_sojourn(params, closed(poisson_prefactor)?, SeriesTruncation::default())?
            }
            TailqCurveKind::FirstCustomerSojournRv => {
                AsymptoteCurve::first_customer_sojourn_rv(params, closed(poisson_prefactor)?)?
            }
            TailqCurveKind::StationarySojourn => {
                AsymptoteCurve::stationary_sojourn(params, SeriesTruncation::default())?
            }
            TailqCurveKind::BusyPeriod => AsymptoteCurve::busy_period(params, closed(poisson_busy_customers)?)?,
            TailqCurveKind::BusyCount => AsymptoteCurve::busy_count(params, closed(poisson_busy_customers)?)?,
        };
        write(out, Box::into_raw(Box::new(TailqCurve { curve })), "out")
    })
}

/// Releases a curve. NULL is ignored.
///
/// # Safety
/// `curve` is NULL or a handle from [`tailq_curve_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tailq_curve_free(curve: *mut TailqCurve) {
    if !curve.is_null() {
        drop(Box::from_raw(curve));
    }
}

/// Evaluates a curve at `n` thresholds `xs`, writing `n` values to `out`.
///
/// # Safety
/// `curve` is a live handle; `xs` and `out` point to `n` doubles each.
#[no_mangle]
pub unsafe extern "C" fn tailq_curve_eval(
    curve: *const TailqCurve,
    xs: *const f64,
    n: usize,
    out: *mut f64,
) -> TailqStatus {
    guard(|| {
        let c = handle(curve, "curve")?;
        if n == 0 {
            return Ok(());
        }
        if xs.is_null() {
            return Err(null("xs"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let xs = std::slice::from_raw_parts(xs, n);
        let out = std::slice::from_raw_parts_mut(out, n);
        for (o, &x) in out.iter_mut().zip(xs) {
            *o = c.curve.eval(x);
        }
        Ok(())
    })
}

/// Runs an experiment described by TOML text (the format written by
/// `tailq init`). `out_dir`, if not NULL, overrides the config's output
/// directory. `all_passed`, if not NULL, receives whether every built-in
/// check passed.
///
/// # Safety
/// `config_toml` is a NUL-terminated string; `out_dir` is NULL or one;
/// `all_passed` is NULL or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn tailq_run_experiment(
    config_toml: *const c_char,
    out_dir: *const c_char,
    all_passed: *mut bool,
) -> TailqStatus {
    guard(|| {
        let mut config = ExperimentConfig::from_toml(text(config_toml, "config_toml")?)?;
        if !out_dir.is_null() {
            config.out = PathBuf::from(text(out_dir, "out_dir")?);
        }
        let report = tailq::experiment::run_experiment(&config)?;
        if !all_passed.is_null() {
            all_passed.write(report.all_passed());
        }
        Ok(())
    })
}

//! C ABI over `rssi-predict`.
//!
//! Objects are opaque handles created by `rp_*_new`/`rp_*_fit`/`rp_*_from_*`
//! and released with the matching `rp_*_free`. Every fallible call returns an
//! [`RpStatus`]; on failure, `rp_last_error()` describes the cause. Handles are
//! not thread-safe: use one handle from one thread at a time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use rssi_predict::atpc::{AtpcConfig, AtpcController, Mode};
use rssi_predict::linksim::RadioProfile;
use rssi_predict::predictor::{predict, Anchor, Method, PredictorModel};
use rssi_predict::stats::{moment_set_at_lag, DEFAULT_MIN_PAIRS};
use rssi_predict::trace::{derivative_series, ingest_csv, Trace};
use rssi_predict::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    MalformedInput = 4,
    InsufficientData = 5,
    DegenerateModel = 6,
    LagMismatch = 7,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpMethod {
    NormalEq = 0,
    Orthonormal = 1,
    Simplified = 2,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RpMode {
    Tracking = 0,
    Fallback = 1,
}

/// Gap-aware RSSI trace.
pub struct RpTrace(Trace);

/// Fitted predictor.
pub struct RpModel(PredictorModel);

/// Power controller for one link.
pub struct RpAtpc(AtpcController);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = s);
}

fn status_of(e: &Error) -> RpStatus {
    match e {
        Error::Io { .. } => RpStatus::Io,
        Error::MalformedRow { .. } | Error::InvalidTrace(_) | Error::Json(_) => {
            RpStatus::MalformedInput
        }
        Error::Empty
        | Error::TooFewSamples { .. }
        | Error::InsufficientPairs { .. }
        | Error::NoPredictions { .. } => RpStatus::InsufficientData,
        Error::DegenerateProcess
        | Error::DegenerateMoments { .. }
        | Error::NonPositiveDefinite { .. } => RpStatus::DegenerateModel,
        Error::LagMismatch { .. } => RpStatus::LagMismatch,
        Error::OffGrid { .. } | Error::InvalidParameter(_) => RpStatus::InvalidArgument,
    }
}

struct Fail(RpStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(RpStatus::NullPointer, format!("{what} is null"))
}

fn invalid(msg: impl Into<String>) -> Fail {
    Fail(RpStatus::InvalidArgument, msg.into())
}

/// Runs `f`, turning errors and panics into a status plus last-error text.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> RpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RpStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RpStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not UTF-8")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or_else(|| null(what))
}

fn method_of(m: RpMethod) -> Method {
    match m {
        RpMethod::NormalEq => Method::NormalEq,
        RpMethod::Orthonormal => Method::Orthonormal,
        RpMethod::Simplified => Method::Simplified,
    }
}

/// Message for the last failed call on this thread. Valid until the next
/// failing call on the same thread; never null.
#[no_mangle]
pub extern "C" fn rp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn rp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Loads a trace CSV (`seq,t_s,rssi_dbm[,tx_power_dbm]`).
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_from_csv(
    path: *const c_char,
    interval_s: f64,
    out: *mut *mut RpTrace,
) -> RpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let path = str_arg(path, "path")?;
        let ing = ingest_csv(path, interval_s)?;
        *out = Box::into_raw(Box::new(RpTrace(ing.trace)));
        Ok(())
    })
}

/// Builds a gap-free trace from `len` consecutive readings, seq `0..len`.
///
/// # Safety
/// `values` must point to `len` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_from_values(
    values: *const f64,
    len: usize,
    interval_s: f64,
    out: *mut *mut RpTrace,
) -> RpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        if values.is_null() {
            return Err(null("values"));
        }
        let slice = std::slice::from_raw_parts(values, len);
        let trace = Trace::from_values(slice, interval_s)?;
        *out = Box::into_raw(Box::new(RpTrace(trace)));
        Ok(())
    })
}

/// Number of received samples.
///
/// # Safety
/// `trace` must be a live handle or null.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_len(trace: *const RpTrace, out: *mut usize) -> RpStatus {
    guard(|| {
        let t = handle(trace, "trace")?;
        *out_arg(out, "out")? = t.0.len();
        Ok(())
    })
}

/// # Safety
/// `trace` must come from an `rp_trace_*` constructor and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rp_trace_free(trace: *mut RpTrace) {
    if !trace.is_null() {
        drop(Box::from_raw(trace));
    }
}

/// Fits a predictor at `lag_steps` from `trace`.
///
/// # Safety
/// `trace` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_model_fit(
    trace: *const RpTrace,
    method: RpMethod,
    lag_steps: u32,
    out: *mut *mut RpModel,
) -> RpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let t = &handle(trace, "trace")?.0;
        if lag_steps < 1 {
            return Err(invalid("lag_steps must be at least 1"));
        }
        let deriv = derivative_series(t)?;
        let m = moment_set_at_lag(t, &deriv, lag_steps as usize, DEFAULT_MIN_PAIRS)?;
        let model = method_of(method).fit(&m)?;
        *out = Box::into_raw(Box::new(RpModel(model)));
        Ok(())
    })
}

/// Loads a model from its JSON dump.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_model_from_json(
    json: *const c_char,
    out: *mut *mut RpModel,
) -> RpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let model = PredictorModel::from_json(str_arg(json, "json")?)?;
        *out = Box::into_raw(Box::new(RpModel(model)));
        Ok(())
    })
}

/// JSON dump of the model. Release with `rp_string_free`.
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_model_to_json(
    model: *const RpModel,
    out: *mut *mut c_char,
) -> RpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let text = handle(model, "model")?.0.to_json()?;
        *out = CString::new(text)
            .map_err(|_| invalid("model text contains NUL"))?
            .into_raw();
        Ok(())
    })
}

/// Coefficients `(rho_r, rho_rp)` and fitting lag in seconds. `analytic_mse`
/// is NaN for a model without fitting moments.
///
/// # Safety
/// `model` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_model_params(
    model: *const RpModel,
    rho_r: *mut f64,
    rho_rp: *mut f64,
    tau_s: *mut f64,
    analytic_mse: *mut f64,
) -> RpStatus {
    guard(|| {
        let m = &handle(model, "model")?.0;
        *out_arg(rho_r, "rho_r")? = m.rho_r;
        *out_arg(rho_rp, "rho_rp")? = m.rho_rp;
        *out_arg(tau_s, "tau_s")? = m.tau;
        *out_arg(analytic_mse, "analytic_mse")? = m.analytic_mse.unwrap_or(f64::NAN);
        Ok(())
    })
}

/// RSSI `steps` intervals after an anchor reading with backward slope
/// `anchor_slope` (dB/s).
///
/// # Safety
/// `model` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_model_predict(
    model: *const RpModel,
    anchor_rssi: f64,
    anchor_slope: f64,
    steps: u32,
    interval_s: f64,
    out: *mut f64,
) -> RpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let m = &handle(model, "model")?.0;
        let anchor = Anchor {
            t: 0.0,
            rssi: anchor_rssi,
            slope: anchor_slope,
        };
        *out = predict(m, anchor, steps, interval_s)?.value;
        Ok(())
    })
}

/// # Safety
/// `model` must come from `rp_model_fit`/`rp_model_from_json` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rp_model_free(model: *mut RpModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// # Safety
/// `s` must come from this library and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Controller for a built-in radio (`"cc2538"` or `"cc1200"`) with default
/// margin, window and missed-ACK budget.
///
/// # Safety
/// `radio` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_atpc_new(
    radio: *const c_char,
    threshold_dbm: f64,
    out: *mut *mut RpAtpc,
) -> RpStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        *out = ptr::null_mut();
        let profile = RadioProfile::builtin(str_arg(radio, "radio")?)?;
        let ctl = AtpcController::new(AtpcConfig::new(profile, threshold_dbm))?;
        *out = Box::into_raw(Box::new(RpAtpc(ctl)));
        Ok(())
    })
}

/// Power for the next packet, dBm.
///
/// # Safety
/// `ctl` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_atpc_current_tx(ctl: *const RpAtpc, out: *mut f64) -> RpStatus {
    guard(|| {
        *out_arg(out, "out")? = handle(ctl, "ctl")?.0.current_tx();
        Ok(())
    })
}

/// Reports an ACK received at `ack_rssi_dbm`; writes the next tx power.
///
/// # Safety
/// `ctl` must be a live handle; `next_tx_dbm` must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_atpc_on_ack(
    ctl: *mut RpAtpc,
    ack_rssi_dbm: f64,
    next_tx_dbm: *mut f64,
) -> RpStatus {
    guard(|| {
        let out = out_arg(next_tx_dbm, "next_tx_dbm")?;
        let c = ctl.as_mut().ok_or_else(|| null("ctl"))?;
        *out = c.0.on_ack(ack_rssi_dbm)?.next_tx_dbm;
        Ok(())
    })
}

/// Reports a missing ACK; writes the next tx power and the controller mode.
///
/// # Safety
/// `ctl` must be a live handle; the out pointers must be writable.
#[no_mangle]
pub unsafe extern "C" fn rp_atpc_on_missed_ack(
    ctl: *mut RpAtpc,
    next_tx_dbm: *mut f64,
    mode: *mut RpMode,
) -> RpStatus {
    guard(|| {
        let out = out_arg(next_tx_dbm, "next_tx_dbm")?;
        let mode = out_arg(mode, "mode")?;
        let c = ctl.as_mut().ok_or_else(|| null("ctl"))?;
        let d = c.0.on_missed_ack();
        *out = d.next_tx_dbm;
        *mode = match d.mode {
            Mode::Tracking => RpMode::Tracking,
            Mode::Fallback => RpMode::Fallback,
        };
        Ok(())
    })
}

/// # Safety
/// `ctl` must come from `rp_atpc_new` and not be used again.
#[no_mangle]
pub unsafe extern "C" fn rp_atpc_free(ctl: *mut RpAtpc) {
    if !ctl.is_null() {
        drop(Box::from_raw(ctl));
    }
}

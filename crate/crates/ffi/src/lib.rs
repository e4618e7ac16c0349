//! C ABI for the teichflow simulator.
//!
//! Every function returns a [`TfStatus`]; results are written through out
//! pointers. On failure a message is available from [`tf_last_error`] until the
//! next failing call on the same thread. Handles are opaque and must be
//! released with the matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use teichflow::cli::config::ScenarioConfig;
use teichflow::cli::scenario::run_scenario;
use teichflow::cli::validate::run_validation;
use teichflow::error::{ConfigError, RunError};
use teichflow::flow::{integrate, FlowSystem, FlowTrace};
use teichflow::moduli::{self, TeichPoint};
use teichflow::parse_config;

/// Result codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Flow = 4,
    Io = 5,
    OutOfRange = 6,
    Panic = 7,
}

/// A validated scenario configuration.
pub struct TfScenario {
    config: ScenarioConfig,
}

/// The output of one integration.
pub struct TfTrace {
    trace: FlowTrace,
}

/// One trace row; mirrors the columns of `trace.csv`.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TfRecord {
    pub t: f64,
    pub z: f64,
    pub a: f64,
    pub b: f64,
    pub energy: f64,
    pub decay_rate: f64,
    pub tau_norm_sq: f64,
    pub phi_norm_sq: f64,
    pub wp_to_curve: f64,
    pub inj_radius: f64,
    pub winding_index: i64,
    pub reduced_z: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).unwrap_or_default());
}

fn guard(f: impl FnOnce() -> Result<(), (TfStatus, String)>) -> TfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => TfStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            TfStatus::Panic
        }
    }
}

fn null(what: &str) -> (TfStatus, String) {
    (TfStatus::NullPointer, format!("{what} is null"))
}

fn point(a: f64, b: f64) -> Result<TeichPoint, (TfStatus, String)> {
    TeichPoint::new(a, b).map_err(|e| (TfStatus::InvalidArgument, e.to_string()))
}

unsafe fn text<'a>(s: *const c_char, what: &str) -> Result<&'a str, (TfStatus, String)> {
    if s.is_null() {
        return Err(null(what));
    }
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| (TfStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

fn config_status(e: ConfigError) -> (TfStatus, String) {
    (TfStatus::Config, e.to_string())
}

fn run_status(e: RunError) -> (TfStatus, String) {
    let status = match e {
        RunError::Config(_) | RunError::Target(_) => TfStatus::Config,
        RunError::Flow(_) => TfStatus::Flow,
        RunError::Io { .. } | RunError::Csv { .. } | RunError::Malformed(_) => TfStatus::Io,
    };
    (status, e.to_string())
}

/// Message of the last failure on this thread, or an empty string. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn tf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn tf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Energy of the identity map from `(T², g_{a,b})` to `(T², g_{α,β})`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn tf_identity_energy(a: f64, b: f64, alpha: f64, beta: f64, out: *mut f64) -> TfStatus {
    guard(|| {
        let (p, q) = (point(a, b)?, point(alpha, beta)?);
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null; caller guarantees writability.
        unsafe { *out = moduli::identity_energy(p, q) };
        Ok(())
    })
}

/// Hyperbolic distance between `(a, b)` and `(α, β)` in the upper half-plane.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn tf_hyperbolic_distance(a: f64, b: f64, alpha: f64, beta: f64, out: *mut f64) -> TfStatus {
    guard(|| {
        let (p, q) = (point(a, b)?, point(alpha, beta)?);
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = moduli::hyperbolic_distance(p, q) };
        Ok(())
    })
}

/// Half the systole of the flat torus `g_{a,b}`.
///
/// # Safety
/// `out` must be null or point to writable memory for one `double`.
#[no_mangle]
pub unsafe extern "C" fn tf_injectivity_radius(a: f64, b: f64, out: *mut f64) -> TfStatus {
    guard(|| {
        let p = point(a, b)?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = moduli::injectivity_radius(p) };
        Ok(())
    })
}

/// Hopf coefficient of `id: (T², g_{a,b}) → (T², scale·g_{α,β})`.
///
/// # Safety
/// `re` and `im` must be null or point to writable `double`s.
#[no_mangle]
pub unsafe extern "C" fn tf_hopf_coefficient(
    a: f64,
    b: f64,
    alpha: f64,
    beta: f64,
    scale: f64,
    re: *mut f64,
    im: *mut f64,
) -> TfStatus {
    guard(|| {
        let (p, q) = (point(a, b)?, point(alpha, beta)?);
        if !(scale.is_finite() && scale > 0.0) {
            return Err((TfStatus::InvalidArgument, format!("scale must be > 0, got {scale}")));
        }
        if re.is_null() || im.is_null() {
            return Err(null("re/im"));
        }
        let phi = moduli::hopf_coefficient(p, q, scale).value;
        // SAFETY: checked non-null.
        unsafe {
            *re = phi.re;
            *im = phi.im;
        }
        Ok(())
    })
}

/// Creates a scenario from a preset name (`winding-dehn`, `winding-loop`,
/// `analytic-converging` or `custom`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn tf_scenario_preset(name: *const c_char, out: *mut *mut TfScenario) -> TfStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let name = unsafe { text(name, "name") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = ScenarioConfig::preset(name)
            .ok_or_else(|| (TfStatus::Config, format!("unknown preset `{name}`")))?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(TfScenario { config })) };
        Ok(())
    })
}

/// Parses a configuration file's text.
///
/// # Safety
/// `config_text` must be a NUL-terminated string; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn tf_scenario_parse(config_text: *const c_char, out: *mut *mut TfScenario) -> TfStatus {
    guard(|| {
        // SAFETY: forwarded caller contract.
        let s = unsafe { text(config_text, "config_text") }?;
        if out.is_null() {
            return Err(null("out"));
        }
        let config = parse_config(s).map_err(config_status)?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(TfScenario { config })) };
        Ok(())
    })
}

/// Serializes a scenario; free the string with [`tf_string_free`].
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn tf_scenario_to_text(scenario: *const TfScenario, out: *mut *mut c_char) -> TfStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let s = unsafe { scenario.as_ref() }.ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = CString::new(s.config.to_text()).map_err(|e| (TfStatus::InvalidArgument, e.to_string()))?;
        // SAFETY: checked non-null.
        unsafe { *out = c.into_raw() };
        Ok(())
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_scenario_free(scenario: *mut TfScenario) {
    if !scenario.is_null() {
        // SAFETY: allocated by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(scenario) });
    }
}

/// # Safety
/// `s` must be null or a string returned by this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_string_free(s: *mut c_char) {
    if !s.is_null() {
        // SAFETY: allocated by CString::into_raw in this library.
        drop(unsafe { CString::from_raw(s) });
    }
}

/// Integrates the scenario in memory, without writing artifacts.
///
/// # Safety
/// `scenario` must be a live handle; `out` must point to writable storage.
#[no_mangle]
pub unsafe extern "C" fn tf_scenario_integrate(scenario: *const TfScenario, out: *mut *mut TfTrace) -> TfStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let s = unsafe { scenario.as_ref() }.ok_or_else(|| null("scenario"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let c = &s.config;
        let system = FlowSystem::new(
            c.coupling().map_err(config_status)?,
            c.curve().map_err(config_status)?,
            c.flow.eta,
        );
        let initial = c.initial_state().map_err(config_status)?;
        let trace = integrate(&system, &c.flow, initial).map_err(|e| (TfStatus::Flow, e.to_string()))?;
        // SAFETY: checked non-null.
        unsafe { *out = Box::into_raw(Box::new(TfTrace { trace })) };
        Ok(())
    })
}

/// Runs the scenario and writes its artifacts under `output_root`.
///
/// # Safety
/// `scenario` must be a live handle; `output_root` a NUL-terminated path;
/// `violations` null or writable.
#[no_mangle]
pub unsafe extern "C" fn tf_scenario_run(
    scenario: *const TfScenario,
    output_root: *const c_char,
    violations: *mut usize,
) -> TfStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let s = unsafe { scenario.as_ref() }.ok_or_else(|| null("scenario"))?;
        // SAFETY: forwarded caller contract.
        let root = unsafe { text(output_root, "output_root") }?;
        let run = run_scenario(&s.config, Path::new(root)).map_err(run_status)?;
        if !violations.is_null() {
            // SAFETY: checked non-null.
            unsafe { *violations = run.invariants.violations() };
        }
        Ok(())
    })
}

/// # Safety
/// `trace` must be null or a handle from this library that was not yet freed.
#[no_mangle]
pub unsafe extern "C" fn tf_trace_free(trace: *mut TfTrace) {
    if !trace.is_null() {
        // SAFETY: allocated by Box::into_raw in this library.
        drop(unsafe { Box::from_raw(trace) });
    }
}

/// Number of records in the trace.
///
/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tf_trace_len(trace: *const TfTrace, out: *mut usize) -> TfStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let t = unsafe { trace.as_ref() }.ok_or_else(|| null("trace"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = t.trace.records.len() };
        Ok(())
    })
}

/// Copies record `index` into `out`.
///
/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tf_trace_record(trace: *const TfTrace, index: usize, out: *mut TfRecord) -> TfStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let t = unsafe { trace.as_ref() }.ok_or_else(|| null("trace"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let r = t.trace.records.get(index).ok_or_else(|| {
            (
                TfStatus::OutOfRange,
                format!("index {index} >= {} records", t.trace.records.len()),
            )
        })?;
        let rec = TfRecord {
            t: r.t,
            z: r.z,
            a: r.a,
            b: r.b,
            energy: r.energy,
            decay_rate: r.decay_rate,
            tau_norm_sq: r.tau_norm_sq,
            phi_norm_sq: r.phi_norm_sq,
            wp_to_curve: r.wp_to_curve,
            inj_radius: r.inj_radius,
            winding_index: r.winding_index,
            reduced_z: r.reduced_z,
        };
        // SAFETY: checked non-null.
        unsafe { *out = rec };
        Ok(())
    })
}

/// Number of level-crossing and small-velocity events.
///
/// # Safety
/// `trace` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn tf_trace_event_count(trace: *const TfTrace, out: *mut usize) -> TfStatus {
    guard(|| {
        // SAFETY: caller passes a live handle or null.
        let t = unsafe { trace.as_ref() }.ok_or_else(|| null("trace"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        // SAFETY: checked non-null.
        unsafe { *out = t.trace.events.len() };
        Ok(())
    })
}

/// Runs the identity suites; `all_passed` receives the overall verdict.
///
/// # Safety
/// `all_passed` must be writable.
#[no_mangle]
pub unsafe extern "C" fn tf_validate(seed: u64, kappa: f64, all_passed: *mut bool) -> TfStatus {
    guard(|| {
        if all_passed.is_null() {
            return Err(null("all_passed"));
        }
        let report = run_validation(seed, kappa);
        if !report.all_passed() {
            set_error(report.to_string());
        }
        // SAFETY: checked non-null.
        unsafe { *all_passed = report.all_passed() };
        Ok(())
    })
}


//! C ABI over `hopfmin`.
//!
//! Maps are opaque `HmMap` handles created from a JSON descriptor or a
//! builtin name and released with [`hm_map_free`]. Every function returns an
//! [`HmStatus`]; on failure a message is available from
//! [`hm_last_error_message`] on the calling thread. Panics never cross the
//! boundary: they are caught and reported as [`HmStatus::Panic`].
//!
//! Strings returned by the library are owned by the caller and must be
//! released with [`hm_string_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hopfmin::algebra::{oct_mul, quat_mul, Octonion, Quaternion};
use hopfmin::cli::{execute, RunConfig};
use hopfmin::linking::{default_values, hopf_invariant, HopfConfig};
use hopfmin::lipschitz::lipschitz_report;
use hopfmin::maps::{Map, MapDescriptor};
use hopfmin::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    /// A point was off the declared space or a buffer had the wrong length.
    DomainViolation = 4,
    Unsupported = 5,
    /// Tracing, differentiation or linking did not converge.
    NumericalFailure = 6,
    OracleDisagreement = 7,
    Config = 8,
    Io = 9,
    Panic = 10,
}

/// Opaque handle to a built map.
pub struct HmMap {
    map: Map,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

fn status_of(e: &Error) -> HmStatus {
    match e {
        Error::InvalidArgument(_) | Error::AmplitudeTooLarge(_) | Error::InvalidProfile(_) => HmStatus::InvalidArgument,
        Error::DimensionMismatch { .. }
        | Error::DomainViolation(_)
        | Error::RadiusMismatch(..)
        | Error::FieldMismatch => HmStatus::DomainViolation,
        Error::Unsupported(_) => HmStatus::Unsupported,
        Error::OracleDisagreement { .. } => HmStatus::OracleDisagreement,
        Error::Config(_) => HmStatus::Config,
        Error::Io(_) | Error::MalformedCurve(_) => HmStatus::Io,
        _ => HmStatus::NumericalFailure,
    }
}

/// Run `f`, translating errors and panics into a status.
fn guard(f: impl FnOnce() -> Result<(), (HmStatus, String)>) -> HmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HmStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_error(format!("internal panic: {msg}"));
            HmStatus::Panic
        }
    }
}

fn lift<T>(r: hopfmin::Result<T>) -> Result<T, (HmStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(what: &str) -> (HmStatus, String) {
    (HmStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, (HmStatus, String)> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| (HmStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn map_ref<'a>(m: *const HmMap) -> Result<&'a Map, (HmStatus, String)> {
    m.as_ref().map(|h| &h.map).ok_or_else(|| null("map"))
}

fn into_c_string(s: String) -> Result<*mut c_char, (HmStatus, String)> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|_| (HmStatus::InvalidArgument, "output contains a NUL byte".to_string()))
}

unsafe fn publish_map(desc: hopfmin::Result<MapDescriptor>, out: *mut *mut HmMap) -> Result<(), (HmStatus, String)> {
    if out.is_null() {
        return Err(null("out"));
    }
    *out = ptr::null_mut();
    let map = lift(desc.and_then(|d| d.build()))?;
    *out = Box::into_raw(Box::new(HmMap { map }));
    Ok(())
}

/// Message of the last failure on this thread, or null. The pointer is valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hm_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Build a map from a JSON descriptor.
///
/// # Safety
/// `json` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_map_from_json(json: *const c_char, out: *mut *mut HmMap) -> HmStatus {
    guard(|| {
        let s = read_str(json, "json")?;
        publish_map(MapDescriptor::from_json(s), out)
    })
}

/// Build a map from a builtin name such as `hopf` or `power(2)`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_map_builtin(name: *const c_char, out: *mut *mut HmMap) -> HmStatus {
    guard(|| {
        let s = read_str(name, "name")?;
        publish_map(MapDescriptor::builtin(s), out)
    })
}

/// Release a map. Null is ignored.
///
/// # Safety
/// `map` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hm_map_free(map: *mut HmMap) {
    if !map.is_null() {
        drop(Box::from_raw(map));
    }
}

/// Ambient dimensions of the domain and codomain.
///
/// # Safety
/// `map` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_map_dims(map: *const HmMap, domain: *mut usize, codomain: *mut usize) -> HmStatus {
    guard(|| {
        let m = map_ref(map)?;
        if domain.is_null() || codomain.is_null() {
            return Err(null("output"));
        }
        *domain = m.domain().ambient_dim();
        *codomain = m.codomain().ambient_dim();
        Ok(())
    })
}

/// The map's canonical JSON descriptor.
///
/// # Safety
/// `map` must be a live handle; `out` must be writable. Free the result with
/// [`hm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hm_map_to_json(map: *const HmMap, out: *mut *mut c_char) -> HmStatus {
    guard(|| {
        let m = map_ref(map)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = into_c_string(m.descriptor().to_json())?;
        Ok(())
    })
}

/// Evaluate at `x` (ambient coordinates of the domain).
///
/// # Safety
/// `x` must hold `x_len` doubles and `out` room for `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn hm_map_evaluate(
    map: *const HmMap,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
    out_len: usize,
) -> HmStatus {
    guard(|| {
        let m = map_ref(map)?;
        if x.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let y = lift(m.evaluate(std::slice::from_raw_parts(x, x_len)))?;
        if y.len() != out_len {
            return Err((
                HmStatus::DomainViolation,
                format!("output buffer holds {out_len} values, need {}", y.len()),
            ));
        }
        std::slice::from_raw_parts_mut(out, out_len).copy_from_slice(&y);
        Ok(())
    })
}

/// Hopf invariant over the default pair of regular values. `step` ≤ 0 uses
/// the default continuation step.
///
/// # Safety
/// `map` must be a live handle; non-null outputs must be writable. `gauss`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn hm_hopf_invariant(
    map: *const HmMap,
    step: f64,
    seed: u64,
    value: *mut i64,
    gauss: *mut f64,
) -> HmStatus {
    guard(|| {
        let m = map_ref(map)?;
        if value.is_null() {
            return Err(null("value"));
        }
        let mut cfg = HopfConfig::default();
        if step > 0.0 {
            cfg.trace.step = step;
        }
        cfg.trace.seed = seed;
        let radius = m
            .codomain()
            .sphere_radius()
            .ok_or_else(|| (HmStatus::Unsupported, "codomain is not a sphere".to_string()))?;
        let [y1, y2] = default_values(radius);
        let h = lift(hopf_invariant(m, &y1, &y2, &cfg))?;
        *value = h.value;
        if !gauss.is_null() {
            *gauss = h.gauss.raw;
        }
        Ok(())
    })
}

/// Pair-sampling lower bound and spectral estimate of the Lipschitz
/// constant.
///
/// # Safety
/// `map` must be a live handle; the outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn hm_lipschitz(
    map: *const HmMap,
    samples: usize,
    seed: u64,
    pair_lower: *mut f64,
    spectral_sup: *mut f64,
) -> HmStatus {
    guard(|| {
        let m = map_ref(map)?;
        if pair_lower.is_null() || spectral_sup.is_null() {
            return Err(null("output"));
        }
        let r = lift(lipschitz_report(m, samples, seed))?;
        *pair_lower = r.pair_lower;
        *spectral_sup = r.spectral_sup;
        Ok(())
    })
}

/// Run a JSON run config, as accepted by `hopfmin run --config`, and return
/// the JSON report. `exit_code` receives the command-line exit code the run
/// would have produced. Output directories in the config are ignored.
///
/// # Safety
/// `config` must be a NUL-terminated string; the outputs must be writable.
/// Free the report with [`hm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn hm_run_json(config: *const c_char, report: *mut *mut c_char, exit_code: *mut i32) -> HmStatus {
    guard(|| {
        let s = read_str(config, "config")?;
        if report.is_null() || exit_code.is_null() {
            return Err(null("output"));
        }
        *report = ptr::null_mut();
        let c = lift(RunConfig::from_json(s))?;
        let outcome = lift(execute(&c))?;
        *report = into_c_string(outcome.report)?;
        *exit_code = outcome.exit_code;
        Ok(())
    })
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Quaternion product, components `(w, x, y, z)`.
///
/// # Safety
/// `a` and `b` must hold 4 doubles and `out` room for 4.
#[no_mangle]
pub unsafe extern "C" fn hm_quat_mul(a: *const f64, b: *const f64, out: *mut f64) -> HmStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let p = quat_mul(
            Quaternion::from_slice(std::slice::from_raw_parts(a, 4)),
            Quaternion::from_slice(std::slice::from_raw_parts(b, 4)),
        );
        std::slice::from_raw_parts_mut(out, 4).copy_from_slice(&p.to_array());
        Ok(())
    })
}

/// Octonion product in the Cayley–Dickson basis `e₀ … e₇`.
///
/// # Safety
/// `a` and `b` must hold 8 doubles and `out` room for 8.
#[no_mangle]
pub unsafe extern "C" fn hm_oct_mul(a: *const f64, b: *const f64, out: *mut f64) -> HmStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null("buffer"));
        }
        let p = oct_mul(
            Octonion::from_slice(std::slice::from_raw_parts(a, 8)),
            Octonion::from_slice(std::slice::from_raw_parts(b, 8)),
        );
        std::slice::from_raw_parts_mut(out, 8).copy_from_slice(&p.c);
        Ok(())
    })
}

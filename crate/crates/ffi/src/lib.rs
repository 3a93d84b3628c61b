//! C ABI over the core library: opaque system handles, status codes, and
//! a JSON entry point mirroring the CLI `run` command.
//!
//! Conventions: every function returns an `RdsStatus`; outputs go through
//! pointers supplied by the caller; strings returned by the library are
//! heap-allocated and must be released with `rds_string_free`. The header
//! is generated into `include/rds_spectra.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use nalgebra::DVector;

use rds_spectra::base::sample_omega;
use rds_spectra::cocycle::CocycleSystem;
use rds_spectra::config::RunConfig;
use rds_spectra::error::SpectraError;
use rds_spectra::runner;
use rds_spectra::scenarios::{build_scenario, ScenarioParams};
use rds_spectra::spectra::{ftle, ftle_relative, lyapunov_spectrum_qr};

/// Status codes returned by every entry point.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RdsStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    UnknownScenario = 3,
    InvalidParams = 4,
    SingularGenerator = 5,
    NumericError = 6,
    ConfigError = 7,
    InternalError = 8,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(msg).ok();
    });
}

fn status_of(err: &SpectraError) -> RdsStatus {
    match err {
        SpectraError::UnknownScenario { .. } => RdsStatus::UnknownScenario,
        SpectraError::InvalidParams { .. } => RdsStatus::InvalidParams,
        SpectraError::SingularGenerator { .. } => RdsStatus::SingularGenerator,
        SpectraError::ConfigError { .. } | SpectraError::Json(_) => RdsStatus::ConfigError,
        SpectraError::ZeroVector { .. }
        | SpectraError::NonPositiveValue { .. }
        | SpectraError::DegenerateSplitting { .. }
        | SpectraError::DimensionMismatch { .. }
        | SpectraError::EmptyFiber { .. }
        | SpectraError::NumericOverflow { .. } => RdsStatus::NumericError,
        _ => RdsStatus::InternalError,
    }
}

fn fail(err: SpectraError) -> RdsStatus {
    let code = status_of(&err);
    set_error(err.to_string());
    code
}

/// Opaque cocycle-system handle.
pub struct RdsSystem {
    system: CocycleSystem,
}

fn guarded<F: FnOnce() -> RdsStatus>(f: F) -> RdsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(_) => {
            set_error("internal panic".to_string());
            RdsStatus::InternalError
        }
    }
}

/// Library version as a static string; do not free.
#[no_mangle]
pub extern "C" fn rds_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// Message for the most recent error on this thread, or NULL. Free with
/// `rds_string_free`.
#[no_mangle]
pub extern "C" fn rds_last_error_message() -> *mut c_char {
    LAST_ERROR.with(|slot| match slot.borrow().as_ref() {
        Some(msg) => msg.clone().into_raw(),
        None => ptr::null_mut(),
    })
}

/// # Safety
/// `s` must be a string returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn rds_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Build a named scenario system. `beta`, `diag_a`, `diag_b`, `dim` feed
/// the scenario parameters; pass 0 to keep a default. On success writes an
/// owned handle to `out`.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn rds_system_from_scenario(
    name: *const c_char,
    beta: f64,
    diag_a: f64,
    diag_b: f64,
    dim: u32,
    out: *mut *mut RdsSystem,
) -> RdsStatus {
    guarded(|| {
        if name.is_null() || out.is_null() {
            set_error("null argument".into());
            return RdsStatus::NullArgument;
        }
        let name = match CStr::from_ptr(name).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("scenario name is not valid UTF-8".into());
                return RdsStatus::InvalidUtf8;
            }
        };
        let mut params = ScenarioParams::default();
        if beta > 0.0 {
            params.beta = beta;
        }
        if diag_a > 0.0 {
            params.diag_a = diag_a;
        }
        if diag_b > 0.0 {
            params.diag_b = diag_b;
        }
        if dim > 0 {
            params.dim = dim as usize;
        }
        match build_scenario(name, &params) {
            Ok(sc) => {
                *out = Box::into_raw(Box::new(RdsSystem { system: sc.system }));
                RdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// # Safety
/// `handle` must come from `rds_system_from_scenario` and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn rds_system_free(handle: *mut RdsSystem) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// State-space dimension of the system.
///
/// # Safety
/// `handle` must be a live system handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rds_system_dim(handle: *const RdsSystem, out: *mut u32) -> RdsStatus {
    guarded(|| {
        if handle.is_null() || out.is_null() {
            set_error("null argument".into());
            return RdsStatus::NullArgument;
        }
        *out = (*handle).system.dim as u32;
        RdsStatus::Ok
    })
}

/// Finite-time Lyapunov exponent of direction `x` (length `x_len`) at
/// horizon `t_horizon` from the base point drawn with `seed`.
///
/// # Safety
/// `x` must point to `x_len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rds_ftle(
    handle: *const RdsSystem,
    seed: u64,
    t_horizon: i64,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> RdsStatus {
    guarded(|| {
        if handle.is_null() || x.is_null() || out.is_null() {
            set_error("null argument".into());
            return RdsStatus::NullArgument;
        }
        let sys = &(*handle).system;
        if x_len != sys.dim {
            set_error(format!("x has length {x_len}, system dimension is {}", sys.dim));
            return RdsStatus::InvalidParams;
        }
        let xv = DVector::from_row_slice(std::slice::from_raw_parts(x, x_len));
        let omega = sample_omega(&sys.driver, seed);
        match ftle(sys, &omega, &xv, t_horizon) {
            Ok(v) => {
                *out = v;
                RdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Relative finite-time exponent with horizon `t_horizon` and offset
/// `t_offset`.
///
/// # Safety
/// As `rds_ftle`.
#[no_mangle]
pub unsafe extern "C" fn rds_ftle_relative(
    handle: *const RdsSystem,
    seed: u64,
    t_horizon: i64,
    t_offset: i64,
    x: *const f64,
    x_len: usize,
    out: *mut f64,
) -> RdsStatus {
    guarded(|| {
        if handle.is_null() || x.is_null() || out.is_null() {
            set_error("null argument".into());
            return RdsStatus::NullArgument;
        }
        let sys = &(*handle).system;
        if x_len != sys.dim {
            set_error(format!("x has length {x_len}, system dimension is {}", sys.dim));
            return RdsStatus::InvalidParams;
        }
        let xv = DVector::from_row_slice(std::slice::from_raw_parts(x, x_len));
        let omega = sample_omega(&sys.driver, seed);
        match ftle_relative(sys, &omega, &xv, t_horizon, t_offset) {
            Ok(v) => {
                *out = v;
                RdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// QR Lyapunov exponents (descending) into `out`, which must hold `dim`
/// doubles.
///
/// # Safety
/// `out` must point to at least `out_len` doubles.
#[no_mangle]
pub unsafe extern "C" fn rds_lyapunov_qr(
    handle: *const RdsSystem,
    seed: u64,
    t_horizon: i64,
    out: *mut f64,
    out_len: usize,
) -> RdsStatus {
    guarded(|| {
        if handle.is_null() || out.is_null() {
            set_error("null argument".into());
            return RdsStatus::NullArgument;
        }
        let sys = &(*handle).system;
        if out_len < sys.dim {
            set_error(format!("out has length {out_len}, need {}", sys.dim));
            return RdsStatus::InvalidParams;
        }
        let omega = sample_omega(&sys.driver, seed);
        match lyapunov_spectrum_qr(sys, &omega, t_horizon) {
            Ok(exps) => {
                let dst = std::slice::from_raw_parts_mut(out, sys.dim);
                dst.copy_from_slice(&exps);
                RdsStatus::Ok
            }
            Err(e) => fail(e),
        }
    })
}

/// Execute a full run from a JSON configuration string (same schema as the
/// CLI) and hand back the JSON report. Free the result with
/// `rds_string_free`.
///
/// # Safety
/// `config_json` must be NUL-terminated; `out_report` must be valid.
#[no_mangle]
pub unsafe extern "C" fn rds_run_config_json(
    config_json: *const c_char,
    out_report: *mut *mut c_char,
) -> RdsStatus {
    guarded(|| {
        if config_json.is_null() || out_report.is_null() {
            set_error("null argument".into());
            return RdsStatus::NullArgument;
        }
        let text = match CStr::from_ptr(config_json).to_str() {
            Ok(s) => s,
            Err(_) => {
                set_error("config is not valid UTF-8".into());
                return RdsStatus::InvalidUtf8;
            }
        };
        let config = match RunConfig::from_json(text) {
            Ok(c) => c,
            Err(e) => return fail(e),
        };
        let bundle = match runner::run(&config, None) {
            Ok(b) => b,
            Err(e) => return fail(e),
        };
        match bundle.to_json() {
            Ok(json) => match CString::new(json) {
                Ok(cstr) => {
                    *out_report = cstr.into_raw();
                    RdsStatus::Ok
                }
                Err(_) => {
                    set_error("report contained an interior NUL".into());
                    RdsStatus::InternalError
                }
            },
            Err(e) => fail(e),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_handle_lifecycle_and_ftle() {
        unsafe {
            let name = CString::new("const-diag").unwrap();
            let mut handle: *mut RdsSystem = ptr::null_mut();
            let st = rds_system_from_scenario(name.as_ptr(), 0.0, 2.0, 0.5, 0, &mut handle);
            assert_eq!(st, RdsStatus::Ok);
            let mut dim = 0u32;
            assert_eq!(rds_system_dim(handle, &mut dim), RdsStatus::Ok);
            assert_eq!(dim, 2);

            let x = [1.0f64, 0.0];
            let mut out = 0.0f64;
            let st = rds_ftle(handle, 3, 50, x.as_ptr(), 2, &mut out);
            assert_eq!(st, RdsStatus::Ok);
            assert!((out - 2f64.ln()).abs() < 1e-10);

            let mut exps = [0.0f64; 2];
            let st = rds_lyapunov_qr(handle, 3, 200, exps.as_mut_ptr(), 2);
            assert_eq!(st, RdsStatus::Ok);
            assert!((exps[0] - 2f64.ln()).abs() < 1e-8);
            assert!((exps[1] + 2f64.ln()).abs() < 1e-8);

            rds_system_free(handle);
        }
    }

    #[test]
    fn errors_surface_through_status_and_message() {
        unsafe {
            let name = CString::new("no-such-scenario").unwrap();
            let mut handle: *mut RdsSystem = ptr::null_mut();
            let st = rds_system_from_scenario(name.as_ptr(), 0.0, 0.0, 0.0, 0, &mut handle);
            assert_eq!(st, RdsStatus::UnknownScenario);
            let msg = rds_last_error_message();
            assert!(!msg.is_null());
            let text = CStr::from_ptr(msg).to_str().unwrap().to_string();
            assert!(text.contains("no-such-scenario"), "{text}");
            rds_string_free(msg);

            // invalid block parameters
            let name = CString::new("block").unwrap();
            let st = rds_system_from_scenario(name.as_ptr(), 0.5, 0.0, 0.0, 0, &mut handle);
            assert_eq!(st, RdsStatus::InvalidParams);

            assert_eq!(
                rds_ftle(ptr::null(), 0, 1, ptr::null(), 0, ptr::null_mut()),
                RdsStatus::NullArgument
            );
        }
    }

    #[test]
    fn json_run_round_trip() {
        unsafe {
            let cfg = CString::new(
                r#"{"scenario": {"name": "identity"}, "seed": 3, "t_max": 30,
                    "n_omega": 6, "x_per_fiber": 2,
                    "gamma_grid": {"lo": -0.1, "hi": 0.1, "step": 0.01},
                    "outputs": ["lyapunov", "morse"]}"#,
            )
            .unwrap();
            let mut report: *mut c_char = ptr::null_mut();
            let st = rds_run_config_json(cfg.as_ptr(), &mut report);
            assert_eq!(st, RdsStatus::Ok);
            let text = CStr::from_ptr(report).to_str().unwrap();
            assert!(text.contains("\"scenario\": \"identity\""));
            assert!(text.contains("\"overall_pass\": true"));
            rds_string_free(report);
        }
    }

    #[test]
    fn version_is_nul_terminated_static() {
        let v = rds_version();
        let s = unsafe { CStr::from_ptr(v) }.to_str().unwrap();
        assert_eq!(s, env!("CARGO_PKG_VERSION"));
    }
}

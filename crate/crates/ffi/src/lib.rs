//! C ABI for `levsqueeze`.
//!
//! Every entry point returns an [`LsqStatus`]; results go through out
//! pointers. On failure the message is kept per thread and can be read with
//! [`lsq_last_error`]. Handles are opaque and must be released with their
//! matching `_free` function.
//!
//! Pointer arguments are checked for null; validity beyond that is the
//! caller's contract, as for any C API.
#![allow(clippy::not_unsafe_ptr_arg_deref)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use levsqueeze::config::{load_config, parse_config_toml, ExperimentConfig};
use levsqueeze::fit::{self, FitInit, SqueezingCurve};
use levsqueeze::noise::{initial_thermal, propagate_pulse};
use levsqueeze::sim::TrajectoryEnsemble;
use levsqueeze::{pipeline, squeeze, DephasingModel, Error, TrapPair};

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LsqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    ResourceLimit = 3,
    Numerical = 4,
    FitFailure = 5,
    Io = 6,
    Panic = 7,
}

impl From<&Error> for LsqStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_)
            | Error::Unsupported(_)
            | Error::Config(_)
            | Error::Validation { .. }
            | Error::Parse { .. } => LsqStatus::InvalidArgument,
            Error::ResourceLimit(_) => LsqStatus::ResourceLimit,
            Error::Numerical(_) => LsqStatus::Numerical,
            Error::FitFailure { .. } => LsqStatus::FitFailure,
            Error::Io(_) | Error::Json(_) | Error::Csv(_) => LsqStatus::Io,
        }
    }
}

/// Experiment configuration.
pub struct LsqConfig(ExperimentConfig);

/// Simulated position traces.
pub struct LsqEnsemble(TrajectoryEnsemble);

/// Fitted `ω₂` and `η` of a squeezing curve.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct LsqFitResult {
    pub omega2: f64,
    pub eta: f64,
    pub omega2_std: f64,
    pub eta_std: f64,
    pub correlation: f64,
    pub residual_norm: f64,
    pub iterations: usize,
    /// Non-zero when `η` converged onto a bound of `(0, 1]`.
    pub eta_at_bound: i32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let msg = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

enum Failure {
    Null(&'static str),
    Arg(String),
    Lib(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Lib(e)
    }
}

/// Runs `body`, translating errors and panics into a status code.
fn guard(body: impl FnOnce() -> Result<(), Failure>) -> LsqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(Ok(())) => LsqStatus::Ok,
        Ok(Err(Failure::Null(name))) => {
            set_error(format!("null pointer: {name}"));
            LsqStatus::NullPointer
        }
        Ok(Err(Failure::Arg(msg))) => {
            set_error(msg);
            LsqStatus::InvalidArgument
        }
        Ok(Err(Failure::Lib(e))) => {
            set_error(e.to_string());
            LsqStatus::from(&e)
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            LsqStatus::Panic
        }
    }
}

fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, Failure> {
    // SAFETY: caller passes a valid, writable pointer or null.
    unsafe { p.as_mut() }.ok_or(Failure::Null(name))
}

fn handle<'a, T>(p: *const T, name: &'static str) -> Result<&'a T, Failure> {
    // SAFETY: caller passes a live handle from this library or null.
    unsafe { p.as_ref() }.ok_or(Failure::Null(name))
}

fn slice<'a>(p: *const f64, len: usize, name: &'static str) -> Result<&'a [f64], Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: caller guarantees `len` readable doubles at `p`.
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

fn string(p: *const c_char, name: &'static str) -> Result<String, Failure> {
    if p.is_null() {
        return Err(Failure::Null(name));
    }
    // SAFETY: caller passes a NUL-terminated string.
    unsafe { CStr::from_ptr(p) }
        .to_str()
        .map(str::to_owned)
        .map_err(|_| Failure::Arg(format!("{name} is not valid UTF-8")))
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next call into the library from the same thread.
#[no_mangle]
pub extern "C" fn lsq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn lsq_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Ideal single-pulse squeezing `λ_max` in dB.
#[no_mangle]
pub extern "C" fn lsq_lambda_max(omega1: f64, omega2: f64, out_db: *mut f64) -> LsqStatus {
    guard(|| {
        *out(out_db, "out_db")? = squeeze::lambda_max(&TrapPair::new(omega1, omega2)?)?;
        Ok(())
    })
}

/// Squeezing parameter `r = ½ ln(ω₂/ω₁)`.
#[no_mangle]
pub extern "C" fn lsq_squeeze_r(omega1: f64, omega2: f64, out_r: *mut f64) -> LsqStatus {
    guard(|| {
        *out(out_r, "out_r")? = squeeze::squeeze_r(&TrapPair::new(omega1, omega2)?)?;
        Ok(())
    })
}

/// Pulse length `π/(2ω₂)` giving maximal squeezing, s.
#[no_mangle]
pub extern "C" fn lsq_optimal_tau(omega1: f64, omega2: f64, out_tau: *mut f64) -> LsqStatus {
    guard(|| {
        *out(out_tau, "out_tau")? = squeeze::optimal_tau(&TrapPair::new(omega1, omega2)?)?;
        Ok(())
    })
}

/// Quadrature map of one pulse of length `tau`, row-major into `out_m[4]`.
#[no_mangle]
pub extern "C" fn lsq_pulse_map(omega1: f64, omega2: f64, tau: f64, out_m: *mut f64) -> LsqStatus {
    guard(|| {
        if out_m.is_null() {
            return Err(Failure::Null("out_m"));
        }
        let m = squeeze::pulse_map(&TrapPair::new(omega1, omega2)?, tau)?;
        // SAFETY: non-null and sized by contract.
        unsafe { std::slice::from_raw_parts_mut(out_m, 4) }.copy_from_slice(&m.matrix().to_row_major());
        Ok(())
    })
}

/// Noiseless squeezing of one pulse of length `tau`, dB.
#[no_mangle]
pub extern "C" fn lsq_squeezing_db(omega1: f64, omega2: f64, tau: f64, out_db: *mut f64) -> LsqStatus {
    guard(|| {
        let m = squeeze::pulse_map(&TrapPair::new(omega1, omega2)?, tau)?;
        *out(out_db, "out_db")? = squeeze::squeezing_db(&m)?;
        Ok(())
    })
}

/// Squeezing of one pulse with dephasing `eta` on a thermal state with
/// occupancy `n1`, dB.
#[no_mangle]
pub extern "C" fn lsq_model_lambda(
    tau: f64,
    omega1: f64,
    omega2: f64,
    eta: f64,
    n1: f64,
    out_db: *mut f64,
) -> LsqStatus {
    guard(|| {
        *out(out_db, "out_db")? = fit::model_lambda(tau, omega1, omega2, eta, n1)?;
        Ok(())
    })
}

/// Covariance (vacuum = 1) after one dephased pulse on a thermal state with
/// occupancy `n1`, row-major into `out_sigma[4]`.
#[no_mangle]
pub extern "C" fn lsq_propagate_pulse(
    n1: f64,
    omega1: f64,
    omega2: f64,
    tau: f64,
    eta: f64,
    out_sigma: *mut f64,
) -> LsqStatus {
    guard(|| {
        if out_sigma.is_null() {
            return Err(Failure::Null("out_sigma"));
        }
        let state = propagate_pulse(
            &initial_thermal(n1)?,
            &TrapPair::new(omega1, omega2)?,
            tau,
            &DephasingModel::new(eta)?,
        )?;
        // SAFETY: non-null and sized by contract.
        unsafe { std::slice::from_raw_parts_mut(out_sigma, 4) }.copy_from_slice(&state.sigma().to_row_major());
        Ok(())
    })
}

/// Fits `ω₂` and `η` to `n` measured points. `sigmas` may be null for an
/// unweighted fit.
#[no_mangle]
pub extern "C" fn lsq_fit_squeezing(
    taus: *const f64,
    lambdas: *const f64,
    sigmas: *const f64,
    n: usize,
    omega1: f64,
    omega2_init: f64,
    eta_init: f64,
    out_fit: *mut LsqFitResult,
) -> LsqStatus {
    guard(|| {
        let dst = out(out_fit, "out_fit")?;
        let taus = slice(taus, n, "taus")?.to_vec();
        let lambdas = slice(lambdas, n, "lambdas")?.to_vec();
        let sigmas = if sigmas.is_null() {
            None
        } else {
            Some(slice(sigmas, n, "sigmas")?.to_vec())
        };
        let curve = SqueezingCurve::new(taus, lambdas, sigmas)?;
        let r = fit::fit_squeezing_curve(
            &curve,
            omega1,
            FitInit {
                omega2: omega2_init,
                eta: eta_init,
            },
        )?;
        *dst = LsqFitResult {
            omega2: r.omega2,
            eta: r.eta,
            omega2_std: r.omega2_std,
            eta_std: r.eta_std,
            correlation: r.correlation,
            residual_norm: r.residual_norm,
            iterations: r.iterations,
            eta_at_bound: r.eta_at_bound as i32,
        };
        Ok(())
    })
}

/// Parses a TOML configuration; missing keys take their defaults.
#[no_mangle]
pub extern "C" fn lsq_config_from_toml(text: *const c_char, out_cfg: *mut *mut LsqConfig) -> LsqStatus {
    guard(|| {
        let dst = out(out_cfg, "out_cfg")?;
        let cfg = parse_config_toml(&string(text, "text")?)?;
        *dst = Box::into_raw(Box::new(LsqConfig(cfg)));
        Ok(())
    })
}

/// Loads a TOML or JSON configuration file.
#[no_mangle]
pub extern "C" fn lsq_config_load(path: *const c_char, out_cfg: *mut *mut LsqConfig) -> LsqStatus {
    guard(|| {
        let dst = out(out_cfg, "out_cfg")?;
        let cfg = load_config(Path::new(&string(path, "path")?))?;
        *dst = Box::into_raw(Box::new(LsqConfig(cfg)));
        Ok(())
    })
}

/// Overrides the trace count and master seed, then revalidates.
#[no_mangle]
pub extern "C" fn lsq_config_set_run(cfg: *mut LsqConfig, n_traces: usize, seed: u64) -> LsqStatus {
    guard(|| {
        let cfg = &mut out(cfg, "cfg")?.0;
        let mut next = cfg.clone();
        next.n_traces = n_traces;
        next.seed = seed;
        next.validate()?;
        *cfg = next;
        Ok(())
    })
}

/// Reference and pulse trap frequencies of a configuration, rad/s.
#[no_mangle]
pub extern "C" fn lsq_config_trap(cfg: *const LsqConfig, out_omega1: *mut f64, out_omega2: *mut f64) -> LsqStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        *out(out_omega1, "out_omega1")? = cfg.omega1_rad_s;
        *out(out_omega2, "out_omega2")? = cfg.omega2_rad_s;
        Ok(())
    })
}

/// Releases a configuration. Null is ignored.
#[no_mangle]
pub extern "C" fn lsq_config_free(cfg: *mut LsqConfig) {
    if !cfg.is_null() {
        // SAFETY: the pointer came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(cfg) });
    }
}

/// Simulates the configured ensemble, including measurement noise.
#[no_mangle]
pub extern "C" fn lsq_simulate(cfg: *const LsqConfig, out_ens: *mut *mut LsqEnsemble) -> LsqStatus {
    guard(|| {
        let cfg = &handle(cfg, "cfg")?.0;
        let dst = out(out_ens, "out_ens")?;
        let ens = pipeline::simulate(cfg)?;
        *dst = Box::into_raw(Box::new(LsqEnsemble(ens)));
        Ok(())
    })
}

/// Trace count, samples per trace and sampling interval of an ensemble.
#[no_mangle]
pub extern "C" fn lsq_ensemble_shape(
    ens: *const LsqEnsemble,
    out_traces: *mut usize,
    out_samples: *mut usize,
    out_dt: *mut f64,
) -> LsqStatus {
    guard(|| {
        let ens = &handle(ens, "ens")?.0;
        *out(out_traces, "out_traces")? = ens.n_traces();
        *out(out_samples, "out_samples")? = ens.n_samples();
        *out(out_dt, "out_dt")? = ens.dt;
        Ok(())
    })
}

/// Copies trace `index` (metres) into `buf`, which holds `len` doubles and
/// must fit the whole trace.
#[no_mangle]
pub extern "C" fn lsq_ensemble_trace(ens: *const LsqEnsemble, index: usize, buf: *mut f64, len: usize) -> LsqStatus {
    guard(|| {
        let ens = &handle(ens, "ens")?.0;
        if buf.is_null() {
            return Err(Failure::Null("buf"));
        }
        let trace = ens
            .traces
            .get(index)
            .ok_or_else(|| Failure::Arg(format!("trace index {index} out of range ({})", ens.n_traces())))?;
        if len < trace.len() {
            return Err(Failure::Arg(format!("buffer holds {len} samples, trace has {}", trace.len())));
        }
        // SAFETY: non-null and at least `trace.len()` long by the check above.
        unsafe { std::slice::from_raw_parts_mut(buf, trace.len()) }.copy_from_slice(trace);
        Ok(())
    })
}

/// Releases an ensemble. Null is ignored.
#[no_mangle]
pub extern "C" fn lsq_ensemble_free(ens: *mut LsqEnsemble) {
    if !ens.is_null() {
        // SAFETY: the pointer came from Box::into_raw in this library.
        drop(unsafe { Box::from_raw(ens) });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn status_mapping() {
        assert_eq!(LsqStatus::from(&Error::Domain("x".into())), LsqStatus::InvalidArgument);
        assert_eq!(LsqStatus::from(&Error::Numerical("x".into())), LsqStatus::Numerical);
    }

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, LsqStatus::Panic);
        let msg = unsafe { CStr::from_ptr(lsq_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }
}

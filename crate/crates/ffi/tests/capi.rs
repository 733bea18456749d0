use std::ffi::{CStr, CString};
use std::f64::consts::{FRAC_PI_2, PI};
use std::path::Path;
use std::process::Command;
use std::ptr;

use levsqueeze_ffi::*;

const W1: f64 = 2.0 * PI * 112e3;
const W2: f64 = 2.0 * PI * 49.3e3;

fn last_error() -> String {
    let p = lsq_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

#[test]
fn analytic_entry_points() {
    let mut l = 0.0;
    assert_eq!(lsq_lambda_max(W1, W2, &mut l), LsqStatus::Ok);
    assert!((l - 3.5637).abs() < 1e-3);
    assert!(lsq_last_error().is_null());

    let mut tau = 0.0;
    assert_eq!(lsq_optimal_tau(W1, W2, &mut tau), LsqStatus::Ok);
    assert!((tau - FRAC_PI_2 / W2).abs() < 1e-15);

    let mut m = [0.0; 4];
    assert_eq!(lsq_pulse_map(W1, W2, tau, m.as_mut_ptr()), LsqStatus::Ok);
    assert!((m[0] * m[3] - m[1] * m[2] - 1.0).abs() < 1e-12);

    let mut db = 0.0;
    assert_eq!(lsq_squeezing_db(W1, W2, tau, &mut db), LsqStatus::Ok);
    assert!((db - l).abs() < 1e-9);

    let mut r = 0.0;
    assert_eq!(lsq_squeeze_r(W1, W2, &mut r), LsqStatus::Ok);
    assert!((r - 0.5 * (W2 / W1).ln()).abs() < 1e-12);
}

#[test]
fn noise_model_entry_points() {
    let w2 = 2.0 * PI * 47.9e3;
    let mut l = 0.0;
    assert_eq!(lsq_model_lambda(FRAC_PI_2 / w2, W1, w2, 0.73, 5.58e7, &mut l), LsqStatus::Ok);
    assert!((l - 2.66406).abs() < 1e-4);

    let mut s = [0.0; 4];
    assert_eq!(lsq_propagate_pulse(0.0, W1, W2, 0.0, 1.0, s.as_mut_ptr()), LsqStatus::Ok);
    for (got, want) in s.iter().zip([1.0, 0.0, 0.0, 1.0]) {
        assert!((got - want).abs() < 1e-12);
    }
}

#[test]
fn errors_set_status_and_message() {
    let mut l = 0.0;
    assert_eq!(lsq_lambda_max(-1.0, W2, &mut l), LsqStatus::InvalidArgument);
    assert!(!last_error().is_empty());
    assert_eq!(lsq_lambda_max(W1, W2, ptr::null_mut()), LsqStatus::NullPointer);
    assert!(last_error().contains("out_db"));
    let mut l2 = 0.0;
    assert_eq!(lsq_model_lambda(1e-6, W1, W2, 1.5, 10.0, &mut l2), LsqStatus::InvalidArgument);
    assert_eq!(lsq_fit_squeezing(ptr::null(), ptr::null(), ptr::null(), 0, W1, W2, 0.9, ptr::null_mut()), LsqStatus::NullPointer);
}

#[test]
fn fit_round_trip() {
    let (w2, eta, n1) = (2.0 * PI * 47.9e3, 0.73, 5.58e7);
    let taus: Vec<f64> = (1..=12).map(|i| i as f64 / 13.0 * PI / w2).collect();
    let lambdas: Vec<f64> = taus
        .iter()
        .map(|&t| {
            let mut l = 0.0;
            assert_eq!(lsq_model_lambda(t, W1, w2, eta, n1, &mut l), LsqStatus::Ok);
            l
        })
        .collect();
    let mut fit = LsqFitResult::default();
    let s = lsq_fit_squeezing(taus.as_ptr(), lambdas.as_ptr(), ptr::null(), taus.len(), W1, 1.03 * w2, 0.9, &mut fit);
    assert_eq!(s, LsqStatus::Ok);
    assert!((fit.omega2 / w2 - 1.0).abs() < 1e-3);
    assert!((fit.eta - eta).abs() < 1e-3);
    assert_eq!(fit.eta_at_bound, 0);
}

#[test]
fn config_and_ensemble_handles() {
    let text = CString::new(format!(
        "omega1_rad_s = {W1}\nomega2_rad_s = {W2}\nduration_s = 2e-4\npulse_start_s = 5e-5\nn_traces = 4\n"
    ))
    .unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(lsq_config_from_toml(text.as_ptr(), &mut cfg), LsqStatus::Ok);
    assert!(!cfg.is_null());
    assert_eq!(lsq_config_set_run(cfg, 3, 11), LsqStatus::Ok);
    assert_eq!(lsq_config_set_run(cfg, 0, 11), LsqStatus::InvalidArgument);
    let (mut w1, mut w2) = (0.0, 0.0);
    assert_eq!(lsq_config_trap(cfg, &mut w1, &mut w2), LsqStatus::Ok);
    assert_eq!((w1, w2), (W1, W2));

    let mut ens = ptr::null_mut();
    assert_eq!(lsq_simulate(cfg, &mut ens), LsqStatus::Ok);
    let (mut n, mut len, mut dt) = (0usize, 0usize, 0.0);
    assert_eq!(lsq_ensemble_shape(ens, &mut n, &mut len, &mut dt), LsqStatus::Ok);
    assert_eq!(n, 3);
    assert!(len > 100 && dt > 0.0);
    let mut buf = vec![0.0; len];
    assert_eq!(lsq_ensemble_trace(ens, 2, buf.as_mut_ptr(), len), LsqStatus::Ok);
    assert!(buf.iter().any(|&v| v != 0.0));
    assert_eq!(lsq_ensemble_trace(ens, 3, buf.as_mut_ptr(), len), LsqStatus::InvalidArgument);
    assert_eq!(lsq_ensemble_trace(ens, 0, buf.as_mut_ptr(), len - 1), LsqStatus::InvalidArgument);
    lsq_ensemble_free(ens);
    lsq_config_free(cfg);
    lsq_ensemble_free(ptr::null_mut());
    lsq_config_free(ptr::null_mut());

    let bad = CString::new("omega1_rad_s = \"fast\"").unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(lsq_config_from_toml(bad.as_ptr(), &mut cfg), LsqStatus::InvalidArgument);
    assert!(cfg.is_null());
    let missing = CString::new("/nonexistent/levsqueeze.toml").unwrap();
    assert_ne!(lsq_config_load(missing.as_ptr(), &mut cfg), LsqStatus::Ok);
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(lsq_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_declares_every_entry_point_and_compiles() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/levsqueeze.h");
    let text = std::fs::read_to_string(&header).unwrap();
    for name in [
        "lsq_last_error", "lsq_version", "lsq_lambda_max", "lsq_squeeze_r", "lsq_optimal_tau", "lsq_pulse_map",
        "lsq_squeezing_db", "lsq_model_lambda", "lsq_propagate_pulse", "lsq_fit_squeezing", "lsq_config_from_toml",
        "lsq_config_load", "lsq_config_set_run", "lsq_config_trap", "lsq_config_free", "lsq_simulate",
        "lsq_ensemble_shape", "lsq_ensemble_trace", "lsq_ensemble_free", "typedef struct LsqConfig LsqConfig",
    ] {
        assert!(text.contains(name), "header lacks {name}");
    }
    // Syntax-check as C when a compiler is available.
    if let Ok(status) = Command::new("cc").args(["-fsyntax-only", "-x", "c", "-std=c99"]).arg(&header).status() {
        assert!(status.success());
    }
}

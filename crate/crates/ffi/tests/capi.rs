//! Exercises the C ABI end to end from Rust, the way a foreign binding
//! would call it.

// Frozen reference values keep their full arbitrary-precision digits.
#![allow(clippy::excessive_precision)]

use std::ffi::{CStr, CString};

use cvqkd_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cvqkd_last_error_message()).to_string_lossy().into_owned() }
}

#[test]
fn version_is_nonempty() {
    let v = unsafe { CStr::from_ptr(cvqkd_version()) };
    assert!(!v.to_bytes().is_empty());
}

#[test]
fn keyrate_at_50km_via_handle() {
    unsafe {
        let sc = cvqkd_scenario_new();
        assert!(!sc.is_null());
        let name = CString::new("fourstate").unwrap();
        assert_eq!(cvqkd_scenario_set_scheme(sc, name.as_ptr()), CvqkdStatus::CvqkdOk);
        assert_eq!(cvqkd_scenario_set_distance_km(sc, 50.0), CvqkdStatus::CvqkdOk);
        assert_eq!(cvqkd_scenario_set_xi(sc, 0.005), CvqkdStatus::CvqkdOk);
        assert_eq!(cvqkd_scenario_set_block_size(sc, 10_000_000_000), CvqkdStatus::CvqkdOk);

        let mut report = std::mem::zeroed::<CvqkdKeyRateReport>();
        assert_eq!(cvqkd_keyrate(sc, &mut report), CvqkdStatus::CvqkdOk);
        assert!(report.rate > 0.0, "rate {}", report.rate);
        assert_eq!(report.distillable, 1);
        assert!(report.va > 0.01 && report.va < 100.0);
        assert!(report.worst_t < 0.06f64.sqrt());
        assert!(report.worst_sigma2 > 1.0);

        // fixing the optimizer's variance reproduces the same rate
        assert_eq!(cvqkd_scenario_set_va(sc, report.va), CvqkdStatus::CvqkdOk);
        let mut fixed = std::mem::zeroed::<CvqkdKeyRateReport>();
        assert_eq!(cvqkd_keyrate(sc, &mut fixed), CvqkdStatus::CvqkdOk);
        assert!((fixed.rate - report.rate).abs() < 1e-12);

        cvqkd_scenario_free(sc);
    }
}

#[test]
fn error_paths_set_messages() {
    unsafe {
        let sc = cvqkd_scenario_new();
        // no channel configured
        let mut report = std::mem::zeroed::<CvqkdKeyRateReport>();
        assert_eq!(cvqkd_keyrate(sc, &mut report), CvqkdStatus::CvqkdErrDomain);
        assert!(last_error().contains("distance"));

        // invalid settings are rejected without touching the scenario
        assert_eq!(cvqkd_scenario_set_va(sc, -1.0), CvqkdStatus::CvqkdErrDomain);
        assert_eq!(cvqkd_scenario_set_eta(sc, 0.0), CvqkdStatus::CvqkdErrDomain);
        assert_eq!(
            cvqkd_scenario_set_budget(sc, 0.3, 0.3, 0.3, 0.3),
            CvqkdStatus::CvqkdErrBudget
        );
        let bad = CString::new("hexagonal").unwrap();
        assert_eq!(
            cvqkd_scenario_set_scheme(sc, bad.as_ptr()),
            CvqkdStatus::CvqkdErrDomain
        );

        // null handles are reported, not dereferenced
        assert_eq!(
            cvqkd_scenario_set_va(std::ptr::null_mut(), 1.0),
            CvqkdStatus::CvqkdErrNullArgument
        );
        assert_eq!(cvqkd_keyrate(sc, std::ptr::null_mut()), CvqkdStatus::CvqkdErrNullArgument);
        cvqkd_scenario_free(std::ptr::null_mut());
        cvqkd_scenario_free(sc);
    }
}

#[test]
fn quantile_and_planning_helpers() {
    unsafe {
        let mut z = 0.0f64;
        assert_eq!(cvqkd_normal_quantile_half(1e-10, &mut z), CvqkdStatus::CvqkdOk);
        assert!((z - 6.4669510872405162).abs() < 1e-10);
        assert_eq!(cvqkd_normal_quantile_half(1.5, &mut z), CvqkdStatus::CvqkdErrDomain);

        let mut d = 0.0f64;
        assert_eq!(cvqkd_delta_n(10_000_000, 2, 1e-10, 1e-10, &mut d), CvqkdStatus::CvqkdOk);
        assert!(d > 0.01 && d < 0.014);
        assert_eq!(cvqkd_delta_n(0, 2, 1e-10, 1e-10, &mut d), CvqkdStatus::CvqkdErrDomain);

        let mut m = 0u64;
        assert_eq!(cvqkd_required_samples(1.0, 0.01, 1e-10, &mut m), CvqkdStatus::CvqkdOk);
        assert_eq!(m, 836_430);

        let mut dxi = 0.0f64;
        assert_eq!(
            cvqkd_effective_excess_noise(0.1, 100_000_000, 1e-10, &mut dxi),
            CvqkdStatus::CvqkdOk
        );
        assert!((dxi - 0.00914564993477897).abs() < 1e-12);
    }
}

#[test]
fn physics_helpers() {
    unsafe {
        let gaussian = CString::new("gaussian").unwrap();
        let mut z = 0.0f64;
        assert_eq!(
            cvqkd_correlation_strength(gaussian.as_ptr(), 1.0, &mut z),
            CvqkdStatus::CvqkdOk
        );
        assert!((z - 3f64.sqrt()).abs() < 1e-14);
        assert_eq!(
            cvqkd_correlation_strength(gaussian.as_ptr(), -1.0, &mut z),
            CvqkdStatus::CvqkdErrDomain
        );

        let mut chi = 0.0f64;
        // uncorrelated modes: chi = g(b)
        assert_eq!(cvqkd_holevo_bound(3.0, 1.5, 0.0, &mut chi), CvqkdStatus::CvqkdOk);
        assert!(chi > 0.0);
        assert_eq!(
            cvqkd_holevo_bound(0.5, 1.5, 0.0, &mut chi),
            CvqkdStatus::CvqkdErrUnphysical
        );
        assert!(last_error().contains("shot noise"));

        let mut i = 0.0f64;
        assert_eq!(cvqkd_mutual_info(3.0, 1.0, 1.0, &mut i), CvqkdStatus::CvqkdOk);
        assert!((i - 1.0).abs() < 1e-14);
    }
}

#[test]
fn estimate_file_roundtrip() {
    use std::fmt::Write as _;
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("samples.csv");
    // noisy line y ~ 0.6 x + z with a deterministic pseudo-random stream
    let mut text = String::from("x,y\n");
    let mut state = 0x2545F4914F6CDD1Du64;
    let mut uniform = move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    for _ in 0..20_000 {
        // sum of 12 uniforms, shifted: variance 1, nearly normal
        let mut z = -6.0;
        let mut x = -6.0;
        for _ in 0..12 {
            z += uniform();
            x += uniform();
        }
        let xv = x * 0.5f64.sqrt();
        let yv = 0.6 * xv + z * 1.02f64.sqrt();
        let _ = writeln!(text, "{xv},{yv}");
    }
    std::fs::write(&path, text).unwrap();

    unsafe {
        let sc = cvqkd_scenario_new();
        assert_eq!(cvqkd_scenario_set_va(sc, 0.5), CvqkdStatus::CvqkdOk);
        assert_eq!(cvqkd_scenario_set_block_size(sc, 40_000), CvqkdStatus::CvqkdOk);
        let cpath = CString::new(path.to_str().unwrap()).unwrap();
        let mut rep = std::mem::zeroed::<CvqkdEstimateReport>();
        let status = cvqkd_estimate_file(sc, cpath.as_ptr(), &mut rep);
        assert_eq!(status, CvqkdStatus::CvqkdOk, "{}", last_error());
        assert_eq!(rep.m, 20_000);
        assert_eq!(rep.n_key, 20_000);
        assert!((rep.t_hat - 0.6).abs() < 0.05, "t_hat {}", rep.t_hat);
        assert!((rep.sigma2_hat - 1.02).abs() < 0.05);
        assert!(rep.t_min < rep.t_hat);
        assert!(rep.sigma2_max > rep.sigma2_hat);
        assert_eq!(rep.below_gaussian_floor, 0);

        // missing file surfaces as an I/O error
        let missing = CString::new("/nonexistent/qkd.csv").unwrap();
        assert_eq!(
            cvqkd_estimate_file(sc, missing.as_ptr(), &mut rep),
            CvqkdStatus::CvqkdErrIo
        );
        cvqkd_scenario_free(sc);
    }
}

use std::ffi::{CStr, CString};
use std::ptr;

use tailq_ffi::*;

fn last_error() -> String {
    let p = tailq_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn model(arrival: &str, service: &str, p: f64) -> Result<*mut TailqModel, TailqStatus> {
    let a = CString::new(arrival).unwrap();
    let s = CString::new(service).unwrap();
    let mut out = ptr::null_mut();
    match unsafe { tailq_model_new(a.as_ptr(), s.as_ptr(), p, &mut out) } {
        TailqStatus::Ok => Ok(out),
        st => {
            assert!(out.is_null());
            Err(st)
        }
    }
}

fn m0() -> *mut TailqModel {
    model("exp(rate=0.2)", "pareto(shape=2.5, scale=0.6)", 0.5).unwrap()
}

#[test]
fn constants_of_the_reference_model() {
    let m = m0();
    let mut c = TailqConstants::default();
    assert_eq!(unsafe { tailq_model_constants(m, &mut c) }, TailqStatus::Ok);
    assert!(tailq_last_error().is_null());
    assert!((c.lambda - 0.2).abs() < 1e-15);
    assert!((c.b - 1.0).abs() < 1e-12);
    assert!((c.r - 0.7).abs() < 1e-12);
    assert!((c.rho - 0.4).abs() < 1e-12);
    assert!((c.b_h - 2.0).abs() < 1e-12);
    assert!((c.m_inf - 2.0 / 3.0).abs() < 1e-12);
    assert!(c.stable);

    let mut m1 = 0.0;
    assert_eq!(unsafe { tailq_model_fluid_multiplier(m, 1, &mut m1) }, TailqStatus::Ok);
    assert_eq!(m1, c.lambda * c.b);
    unsafe { tailq_model_free(m) };
}

#[test]
fn service_tails() {
    let m = m0();
    let (mut g, mut gi) = (0.0, 0.0);
    unsafe {
        assert_eq!(tailq_service_tail(m, 6.0, &mut g), TailqStatus::Ok);
        assert_eq!(tailq_service_integrated_tail(m, 10.0, &mut gi), TailqStatus::Ok);
        tailq_model_free(m);
    }
    assert!((g - 0.1f64.powf(2.5)).abs() < 1e-15);
    // 0.6^2.5 · 10^-1.5 / 1.5
    assert!((gi / (0.6f64.powf(2.5) * 10f64.powf(-1.5) / 1.5) - 1.0).abs() < 1e-12);
}

#[test]
fn error_statuses_and_messages() {
    assert_eq!(
        model("exp(rate=0.2)", "pareto(shape=2.5, scale=0.6)", 1.2).unwrap_err(),
        TailqStatus::InvalidParameter
    );
    assert!(last_error().contains("feedback_p"));
    assert_eq!(
        model("exp(rate=0.2)", "gamma(1, 2)", 0.5).unwrap_err(),
        TailqStatus::Parse
    );
    assert!(last_error().contains("gamma"));

    let mut out = ptr::null_mut();
    let s = CString::new("det(1)").unwrap();
    assert_eq!(
        unsafe { tailq_model_new(ptr::null(), s.as_ptr(), 0.0, &mut out) },
        TailqStatus::NullPointer
    );
    assert!(last_error().contains("arrival"));
    let bad_utf8 = [0xffu8, 0xfe, 0];
    assert_eq!(
        unsafe { tailq_model_new(bad_utf8.as_ptr().cast(), s.as_ptr(), 0.0, &mut out) },
        TailqStatus::InvalidUtf8
    );

    // unstable models exist but have no curves
    let m = model("exp(rate=0.9)", "exp(rate=1)", 0.5).unwrap();
    let mut curve = ptr::null_mut();
    assert_eq!(
        unsafe { tailq_curve_new(m, TailqCurveKind::StationarySojourn, f64::NAN, &mut curve) },
        TailqStatus::Unstable
    );
    assert!(curve.is_null());
    unsafe { tailq_model_free(m) };
}

#[test]
fn busy_curve_matches_its_closed_form() {
    let m = model("exp(rate=0.2)", "pareto(shape=2.5, scale=0.6)", 0.0).unwrap();
    let mut curve = ptr::null_mut();
    assert_eq!(
        unsafe { tailq_curve_new(m, TailqCurveKind::BusyPeriod, f64::NAN, &mut curve) },
        TailqStatus::Ok
    );
    let xs = [50.0, 500.0, 5000.0];
    let mut ys = [0.0; 3];
    assert_eq!(
        unsafe { tailq_curve_eval(curve, xs.as_ptr(), 3, ys.as_mut_ptr()) },
        TailqStatus::Ok
    );
    for (x, y) in xs.iter().zip(ys) {
        // E τ = 1/(1 − ρ) = 1.25, Ḡ(x(1 − ρ))
        let expected = 1.25 * (0.6 / (0.8 * x)).powf(2.5);
        assert!((y / expected - 1.0).abs() < 1e-12, "{x}: {y} vs {expected}");
    }
    unsafe {
        tailq_curve_free(curve);
        tailq_model_free(m);
    }
}

#[test]
fn curve_constant_is_required_without_poisson_arrivals() {
    let m = model("det(5)", "pareto(shape=2.5, scale=0.6)", 0.5).unwrap();
    let mut curve = ptr::null_mut();
    unsafe {
        assert_eq!(
            tailq_curve_new(m, TailqCurveKind::FirstCustomerSojourn, f64::NAN, &mut curve),
            TailqStatus::InvalidParameter
        );
        assert!(last_error().contains("constant"));
        assert_eq!(
            tailq_curve_new(m, TailqCurveKind::FirstCustomerSojourn, 1.3, &mut curve),
            TailqStatus::Ok
        );
        tailq_curve_free(curve);
        tailq_model_free(m);
    }
}

#[test]
fn experiment_runs_from_toml() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = CString::new("kind = \"busy-tail\"\nreplications = 5000\nseed = 3\n").unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut passed = true;
    assert_eq!(
        unsafe { tailq_run_experiment(cfg.as_ptr(), out.as_ptr(), &mut passed) },
        TailqStatus::Ok
    );
    assert!(dir.path().join("busy-tail.csv").exists());
    assert!(dir.path().join("busy-tail.json").exists());

    let bad = CString::new("kind = \"busy-tail\"\nreplications = \"many\"\n").unwrap();
    assert_eq!(
        unsafe { tailq_run_experiment(bad.as_ptr(), out.as_ptr(), ptr::null_mut()) },
        TailqStatus::Config
    );
    assert!(last_error().contains("replications"));
}

#[test]
fn header_declares_every_export() {
    let header = include_str!("../include/tailq.h");
    for name in [
        "tailq_last_error",
        "tailq_version",
        "tailq_model_new",
        "tailq_model_free",
        "tailq_model_constants",
        "tailq_model_fluid_multiplier",
        "tailq_service_tail",
        "tailq_service_integrated_tail",
        "tailq_curve_new",
        "tailq_curve_free",
        "tailq_curve_eval",
        "tailq_run_experiment",
        "typedef struct TailqModel TailqModel",
        "typedef struct TailqCurve TailqCurve",
    ] {
        assert!(header.contains(name), "{name} missing from the header");
    }
}

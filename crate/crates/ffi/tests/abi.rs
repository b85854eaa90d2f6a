use std::ffi::{CStr, CString};
use std::process::Command;
use std::ptr;

use screenstat_ffi::*;

fn blank() -> ScreenstatInterval {
    ScreenstatInterval {
        point: f64::NAN,
        lower: f64::NAN,
        upper: f64::NAN,
        degenerate: 0,
    }
}

fn liu() -> *mut ScreenstatMatrix {
    let csv = CString::new(screenstat::fixtures::LIU2020_CSV).unwrap();
    let mut m = ptr::null_mut();
    assert_eq!(unsafe { screenstat_matrix_from_csv(csv.as_ptr(), &mut m) }, ScreenstatStatus::Ok);
    m
}

#[test]
fn handle_lifecycle_and_accuracy() {
    let m = liu();
    unsafe {
        assert_eq!(screenstat_matrix_num_states(m), 10);
        assert_eq!(screenstat_matrix_num_readouts(m), 10);
        let mut out = blank();
        assert_eq!(screenstat_accuracy(m, 1, 1, 0.05, &mut out), ScreenstatStatus::Ok);
        assert!((out.point * 100.0 - 22.2).abs() < 0.05);
        assert!((out.lower * 100.0 - 11.4).abs() < 0.2);
        assert!((out.upper * 100.0 - 38.8).abs() < 0.2);
        screenstat_matrix_free(m);
    }
}

#[test]
fn predictive_and_marginal() {
    let m = liu();
    unsafe {
        let mut out = blank();
        assert_eq!(
            screenstat_marginal(m, ScreenstatAdjust::On, 0.0133, 0, 0.05, &mut out),
            ScreenstatStatus::Ok
        );
        assert!(out.point > 0.978 && out.point < 0.979);
        assert_eq!(
            screenstat_predictive(m, ScreenstatAdjust::On, 0.0133, ScreenstatMetric::Pvn, 0, 0.05, &mut out),
            ScreenstatStatus::Ok
        );
        assert!(out.point > 0.993 && out.point < 0.995);
        assert_eq!(
            screenstat_predictive(m, ScreenstatAdjust::On, 0.0133, ScreenstatMetric::Pvp, 0, 0.05, &mut out),
            ScreenstatStatus::Validation
        );
        assert_eq!(
            screenstat_control_rate(m, ScreenstatAdjust::Off, 0, 0.05, &mut out),
            ScreenstatStatus::Ok
        );
        assert!((out.point - 606.0 / 610.0).abs() < 1e-12);
        screenstat_matrix_free(m);
    }
}

#[test]
fn matrix_from_arrays_and_validation_errors() {
    let labels_s: Vec<CString> = ["Control", "A"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let labels_r: Vec<CString> = ["Negative", "A"].iter().map(|s| CString::new(*s).unwrap()).collect();
    let sp: Vec<_> = labels_s.iter().map(|s| s.as_ptr()).collect();
    let rp: Vec<_> = labels_r.iter().map(|s| s.as_ptr()).collect();
    let mut m = ptr::null_mut();
    let good = [90i64, 10, 20, 80];
    unsafe {
        assert_eq!(
            screenstat_matrix_new(good.as_ptr(), 2, 2, sp.as_ptr(), rp.as_ptr(), &mut m),
            ScreenstatStatus::Ok
        );
        screenstat_matrix_free(m);
        let bad = [90i64, -1, 20, 80];
        let mut m2 = ptr::null_mut();
        assert_eq!(
            screenstat_matrix_new(bad.as_ptr(), 2, 2, sp.as_ptr(), rp.as_ptr(), &mut m2),
            ScreenstatStatus::Validation
        );
        assert!(m2.is_null());
        let msg = CStr::from_ptr(screenstat_last_error()).to_str().unwrap();
        assert!(msg.contains("negative"), "{msg}");
        assert_eq!(
            screenstat_matrix_new(ptr::null(), 2, 2, sp.as_ptr(), rp.as_ptr(), &mut m2),
            ScreenstatStatus::NullPointer
        );
        let mut out = blank();
        assert_eq!(screenstat_accuracy(ptr::null(), 1, 1, 0.05, &mut out), ScreenstatStatus::NullPointer);
        screenstat_matrix_free(ptr::null_mut());
    }
}

#[test]
fn kernels() {
    unsafe {
        let mut out = blank();
        assert_eq!(screenstat_midp_interval(10, 10, 0.05, &mut out), ScreenstatStatus::Ok);
        assert_eq!(out.upper, 1.0);
        assert_eq!(screenstat_midp_interval(11, 10, 0.05, &mut out), ScreenstatStatus::Validation);
        let (mut p, mut inv) = (0.0, 0.0);
        assert_eq!(screenstat_truncated_moments(2, 0.5, &mut p, &mut inv), ScreenstatStatus::Ok);
        assert!((p - 0.75).abs() < 1e-15);
        assert!((inv - 0.625 / 0.75).abs() < 1e-15);
    }
}

#[test]
fn simulate_round_trip() {
    let scenario = CString::new(
        r#"{"n0":200,"n1":200,"overall_incidence":0.016,"case_shares":[0.5,0.4],
            "rows":[[0.98,0.01,0.01],[0.25,0.65,0.10],[0.30,0.20,0.50],[0.60,0.20,0.20]],
            "replicates":5,"seed":1,"adjust_policy":"off"}"#,
    )
    .unwrap();
    unsafe {
        let mut a = ptr::null_mut();
        let mut b = ptr::null_mut();
        assert_eq!(screenstat_simulate_json(scenario.as_ptr(), &mut a), ScreenstatStatus::Ok);
        assert_eq!(screenstat_simulate_json(scenario.as_ptr(), &mut b), ScreenstatStatus::Ok);
        let (ta, tb) = (CStr::from_ptr(a).to_str().unwrap(), CStr::from_ptr(b).to_str().unwrap());
        assert_eq!(ta, tb);
        assert!(ta.contains("PVP_1"));
        screenstat_string_free(a);
        screenstat_string_free(b);
        let broken = CString::new("{}").unwrap();
        let mut c = ptr::null_mut();
        assert_eq!(screenstat_simulate_json(broken.as_ptr(), &mut c), ScreenstatStatus::Validation);
    }
}

#[test]
fn header_is_valid_c() {
    let header = concat!(env!("CARGO_MANIFEST_DIR"), "/include/screenstat.h");
    let source = std::env::temp_dir().join("screenstat_header_check.c");
    std::fs::write(&source, format!("#include \"{header}\"\nint main(void) {{ return SCREENSTAT_STATUS_OK; }}\n")).unwrap();
    match Command::new("cc").arg("-fsyntax-only").arg("-Wall").arg("-Werror").arg(&source).status() {
        Ok(status) => assert!(status.success()),
        Err(_) => eprintln!("no C compiler; skipped header check"),
    }
}

use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use rssi_predict_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(rp_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn wave(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let t = i as f64 * 0.1;
            -80.0 + 4.0 * (0.7 * t).sin() + 1.5 * (2.3 * t + 0.4).cos()
        })
        .collect()
}

#[test]
fn fit_and_predict_through_handles() {
    let v = wave(600);
    let mut trace = ptr::null_mut();
    let mut n = 0usize;
    unsafe {
        assert_eq!(
            rp_trace_from_values(v.as_ptr(), v.len(), 0.1, &mut trace),
            RpStatus::Ok
        );
        assert_eq!(rp_trace_len(trace, &mut n), RpStatus::Ok);
        assert_eq!(n, 600);

        let mut ne = ptr::null_mut();
        let mut on = ptr::null_mut();
        assert_eq!(
            rp_model_fit(trace, RpMethod::NormalEq, 2, &mut ne),
            RpStatus::Ok
        );
        assert_eq!(
            rp_model_fit(trace, RpMethod::Orthonormal, 2, &mut on),
            RpStatus::Ok
        );
        let (mut a, mut b, mut tau, mut mse) = (0.0, 0.0, 0.0, 0.0);
        let (mut a2, mut b2, mut tau2, mut mse2) = (0.0, 0.0, 0.0, 0.0);
        assert_eq!(
            rp_model_params(ne, &mut a, &mut b, &mut tau, &mut mse),
            RpStatus::Ok
        );
        assert_eq!(
            rp_model_params(on, &mut a2, &mut b2, &mut tau2, &mut mse2),
            RpStatus::Ok
        );
        assert!((tau - 0.2).abs() < 1e-12 && tau == tau2);
        assert!((a - a2).abs() <= 1e-9 * a.abs() && (b - b2).abs() <= 1e-9 * b.abs().max(1e-12));
        assert!((mse - mse2).abs() <= 1e-9 * mse.abs().max(1e-12));

        let mut p = 0.0;
        assert_eq!(
            rp_model_predict(on, -80.0, 1.0, 2, 0.1, &mut p),
            RpStatus::Ok
        );
        assert!((p - -80.0).abs() < 5.0);

        assert_eq!(
            rp_model_predict(on, -80.0, 1.0, 3, 0.1, &mut p),
            RpStatus::LagMismatch
        );
        assert!(last_error().contains("cannot serve"));

        let mut json = ptr::null_mut();
        assert_eq!(rp_model_to_json(on, &mut json), RpStatus::Ok);
        let mut back = ptr::null_mut();
        assert_eq!(rp_model_from_json(json, &mut back), RpStatus::Ok);
        let mut p_back = 0.0;
        rp_model_predict(on, -78.0, 0.5, 2, 0.1, &mut p);
        rp_model_predict(back, -78.0, 0.5, 2, 0.1, &mut p_back);
        assert_eq!(p, p_back);

        rp_string_free(json);
        rp_model_free(back);
        rp_model_free(ne);
        rp_model_free(on);
        rp_trace_free(trace);
    }
}

#[test]
fn error_codes_and_null_handling() {
    let mut trace = ptr::null_mut();
    let mut model = ptr::null_mut();
    unsafe {
        assert_eq!(rp_trace_len(ptr::null(), &mut 0), RpStatus::NullPointer);
        assert!(last_error().contains("trace"));
        assert_eq!(
            rp_trace_from_values(ptr::null(), 3, 0.1, &mut trace),
            RpStatus::NullPointer
        );

        let path = CString::new("/nonexistent/trace.csv").unwrap();
        assert_eq!(
            rp_trace_from_csv(path.as_ptr(), 0.1, &mut trace),
            RpStatus::Io
        );
        assert!(trace.is_null());

        let flat = [-70.0; 100];
        assert_eq!(
            rp_trace_from_values(flat.as_ptr(), 100, 0.1, &mut trace),
            RpStatus::Ok
        );
        assert_eq!(
            rp_model_fit(trace, RpMethod::Orthonormal, 1, &mut model),
            RpStatus::DegenerateModel
        );
        assert!(model.is_null());
        assert_eq!(
            rp_model_fit(trace, RpMethod::Orthonormal, 0, &mut model),
            RpStatus::InvalidArgument
        );
        rp_trace_free(trace);

        let bad = [-70.0, f64::NAN];
        assert_eq!(
            rp_trace_from_values(bad.as_ptr(), 2, 0.1, &mut trace),
            RpStatus::MalformedInput
        );

        rp_trace_free(ptr::null_mut());
        rp_model_free(ptr::null_mut());
        rp_atpc_free(ptr::null_mut());
        rp_string_free(ptr::null_mut());
    }
}

#[test]
fn csv_trace_loads() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.csv");
    let mut text = String::from("seq,t_s,rssi_dbm\n");
    for (i, v) in wave(50).iter().enumerate() {
        if i % 7 != 3 {
            text.push_str(&format!("{i},{:.6},{v:.2}\n", i as f64 * 0.1));
        }
    }
    std::fs::write(&p, text).unwrap();
    let c = CString::new(p.to_str().unwrap()).unwrap();
    let mut trace = ptr::null_mut();
    let mut n = 0;
    unsafe {
        assert_eq!(rp_trace_from_csv(c.as_ptr(), 0.1, &mut trace), RpStatus::Ok);
        rp_trace_len(trace, &mut n);
        rp_trace_free(trace);
    }
    assert_eq!(n, 43);
}

#[test]
fn atpc_controller_cycle() {
    let radio = CString::new("cc2538").unwrap();
    let mut ctl = ptr::null_mut();
    let mut tx = 0.0;
    let mut mode = RpMode::Tracking;
    unsafe {
        assert_eq!(rp_atpc_new(radio.as_ptr(), -90.0, &mut ctl), RpStatus::Ok);
        rp_atpc_current_tx(ctl, &mut tx);
        assert_eq!(tx, 7.0);
        // 7 dBm - 80 dB path = -73 dBm; target -87 dBm means 14 dB less power.
        assert_eq!(rp_atpc_on_ack(ctl, -73.0, &mut tx), RpStatus::Ok);
        assert!((tx - -7.0).abs() < 1e-12);
        for _ in 0..5 {
            assert_eq!(rp_atpc_on_missed_ack(ctl, &mut tx, &mut mode), RpStatus::Ok);
        }
        assert_eq!(mode, RpMode::Fallback);
        assert_eq!(tx, 7.0);
        assert_eq!(
            rp_atpc_on_ack(ctl, f64::NAN, &mut tx),
            RpStatus::InvalidArgument
        );
        rp_atpc_free(ctl);

        let unknown = CString::new("cc9999").unwrap();
        assert_eq!(
            rp_atpc_new(unknown.as_ptr(), -90.0, &mut ctl),
            RpStatus::InvalidArgument
        );
        assert!(ctl.is_null());
        let deaf = CString::new("cc2538").unwrap();
        assert_eq!(
            rp_atpc_new(deaf.as_ptr(), -120.0, &mut ctl),
            RpStatus::InvalidArgument
        );
    }
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(rp_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

fn header() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("include/rssi_predict.h")
}

#[test]
fn header_declares_the_api() {
    let h = std::fs::read_to_string(header()).unwrap();
    for sym in [
        "typedef struct RpTrace RpTrace;",
        "typedef struct RpModel RpModel;",
        "typedef struct RpAtpc RpAtpc;",
        "RP_STATUS_OK = 0",
        "rp_last_error(void)",
        "rp_trace_from_csv(",
        "rp_model_fit(",
        "rp_model_predict(",
        "rp_atpc_on_missed_ack(",
        "rp_string_free(",
    ] {
        assert!(h.contains(sym), "header lacks {sym}");
    }
}

/// Compiles and links a C program against the static library when a C
/// compiler is on PATH.
#[test]
fn c_program_links_and_runs() {
    let Ok(cc) = Command::new("cc").arg("--version").output() else {
        eprintln!("no C compiler; skipped");
        return;
    };
    if !cc.status.success() {
        return;
    }
    let target_dir = std::env::current_exe()
        .unwrap()
        .parent()
        .and_then(|p| p.parent())
        .unwrap()
        .to_path_buf();
    let lib = target_dir.join("librssi_predict_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built; skipped", lib.display());
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    std::fs::write(
        &src,
        r#"
#include <stdio.h>
#include <math.h>
#include "rssi_predict.h"
int main(void) {
    double v[400];
    for (int i = 0; i < 400; i++) v[i] = -80.0 + 3.0 * sin(0.07 * i) + cos(0.31 * i);
    RpTrace *t = NULL;
    RpModel *m = NULL;
    if (rp_trace_from_values(v, 400, 0.1, &t) != RP_STATUS_OK) return 1;
    if (rp_model_fit(t, RP_METHOD_ORTHONORMAL, 1, &m) != RP_STATUS_OK) return 2;
    double p = 0.0;
    if (rp_model_predict(m, v[399], (v[399] - v[398]) / 0.1, 1, 0.1, &p) != RP_STATUS_OK) return 3;
    if (rp_model_fit(NULL, RP_METHOD_ORTHONORMAL, 1, &m) != RP_STATUS_NULL_POINTER) return 4;
    printf("%.3f %s\n", p, rp_last_error());
    rp_model_free(m);
    rp_trace_free(t);
    return 0;
}
"#,
    )
    .unwrap();
    let exe = dir.path().join("demo");
    let status = Command::new("cc")
        .arg(&src)
        .arg("-I")
        .arg(header().parent().unwrap())
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C build failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "demo exited {:?}", out.status);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("trace is null"), "{text}");
}

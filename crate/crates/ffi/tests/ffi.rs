use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use branchq_ffi::*;

fn example(name: &str) -> CString {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/examples")
        .join(format!("{name}.json"));
    CString::new(std::fs::read_to_string(path).unwrap()).unwrap()
}

fn load(name: &str) -> *mut BqNetwork {
    let mut net = ptr::null_mut();
    let status = unsafe { bq_network_from_json(example(name).as_ptr(), &mut net) };
    assert_eq!(status, BqStatus::Ok);
    assert!(!net.is_null());
    net
}

unsafe fn take_string(s: *mut std::ffi::c_char) -> String {
    assert!(!s.is_null());
    let out = CStr::from_ptr(s).to_str().unwrap().to_owned();
    bq_string_free(s);
    out
}

fn last_error() -> String {
    let p = bq_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_str().unwrap().to_owned()
}

#[test]
fn analyze_fig1_through_handles() {
    let net = load("fig1");
    unsafe {
        assert_eq!(bq_network_queue_count(net), 2);
        let mut analysis = ptr::null_mut();
        assert_eq!(bq_analyze(net, &mut analysis), BqStatus::Ok);
        let mut verdict = BqVerdict::Divergent;
        assert_eq!(bq_analysis_verdict(analysis, &mut verdict), BqStatus::Ok);
        assert_eq!(verdict, BqVerdict::Stabilizable);
        let mut delta = 0.0;
        assert_eq!(bq_analysis_delta_star(analysis, &mut delta), BqStatus::Ok);
        assert!((delta - 14.0 / 23.0).abs() < 1e-15);
        let mut gamma = 0.0;
        assert_eq!(bq_analysis_gamma(analysis, &mut gamma), BqStatus::Ok);
        assert_eq!(gamma, 0.125);
        let mut json = ptr::null_mut();
        assert_eq!(bq_analysis_to_json(analysis, &mut json), BqStatus::Ok);
        let value: serde_json::Value = serde_json::from_str(&take_string(json)).unwrap();
        assert_eq!(value["lp"]["delta_star"], "14/23");
        bq_analysis_free(analysis);
        bq_network_free(net);
    }
}

#[test]
fn parse_errors_set_last_error() {
    let text = CString::new(
        r#"{"n": 1, "K": 0, "arrival": {"rate": "1/0", "production": []}, "queues": []}"#,
    )
    .unwrap();
    let mut net = ptr::null_mut();
    let status = unsafe { bq_network_from_json(text.as_ptr(), &mut net) };
    assert_eq!(status, BqStatus::InvalidInput);
    assert!(net.is_null());
    assert!(last_error().contains("arrival.rate"), "{}", last_error());
    assert_eq!(
        unsafe { bq_network_from_json(ptr::null(), &mut net) },
        BqStatus::NullPointer
    );
}

#[test]
fn validate_reports_violations() {
    let text = example("fig1")
        .into_string()
        .unwrap()
        .replacen("\"4/5\"", "\"7/10\"", 1);
    let text = CString::new(text).unwrap();
    let mut net = ptr::null_mut();
    unsafe {
        assert_eq!(bq_network_from_json(text.as_ptr(), &mut net), BqStatus::Ok);
        let mut report = ptr::null_mut();
        assert_eq!(bq_validate(net, &mut report), BqStatus::Negative);
        let value: serde_json::Value = serde_json::from_str(&take_string(report)).unwrap();
        assert_eq!(value["ok"], false);
        assert!(last_error().contains("sum ≠ 1"));
        let mut analysis = ptr::null_mut();
        assert_eq!(bq_analyze(net, &mut analysis), BqStatus::Negative);
        assert!(analysis.is_null());
        bq_network_free(net);
    }
}

#[test]
fn overloaded_verdict_and_budget() {
    let net = load("overloaded");
    unsafe {
        let mut analysis = ptr::null_mut();
        assert_eq!(bq_analyze(net, &mut analysis), BqStatus::Ok);
        let mut verdict = BqVerdict::Stabilizable;
        bq_analysis_verdict(analysis, &mut verdict);
        assert_eq!(verdict, BqVerdict::NotStabilizable);
        bq_analysis_free(analysis);

        let mut out = ptr::null_mut();
        assert_eq!(
            bq_simulate_json(net, 1, 100, 1, 1000.0, &mut out),
            BqStatus::BudgetExceeded
        );
        let value: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(value["error"], "BudgetExceededBeforeFirstReturn");
        bq_network_free(net);
    }
}

#[test]
fn simulate_is_deterministic_and_oracle_runs() {
    let net = load("npf");
    unsafe {
        let run = || {
            let mut out = ptr::null_mut();
            assert_eq!(
                bq_simulate_json(net, 5, 500, 2, 1e7, &mut out),
                BqStatus::Ok
            );
            take_string(out)
        };
        assert_eq!(run(), run());
        let mut out = ptr::null_mut();
        assert_eq!(bq_oracle_json(net, 2, &mut out), BqStatus::Ok);
        let value: serde_json::Value = serde_json::from_str(&take_string(out)).unwrap();
        assert_eq!(value["states"], 6);
        assert_eq!(bq_oracle_json(net, 1, &mut out), BqStatus::InvalidInput);
        bq_network_free(net);
    }
}

#[test]
fn null_handles_are_safe() {
    unsafe {
        bq_network_free(ptr::null_mut());
        bq_analysis_free(ptr::null_mut());
        bq_string_free(ptr::null_mut());
        assert_eq!(bq_network_queue_count(ptr::null()), 0);
        let mut d = 0.0;
        assert_eq!(
            bq_analysis_delta_star(ptr::null(), &mut d),
            BqStatus::NullPointer
        );
    }
}

/// Directory holding the built static library (`target/<profile>`).
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header() {
    let lib = artifact_dir().join("libbranchq_ffi.a");
    if !lib.exists() {
        let status = Command::new(env!("CARGO"))
            .args(["build", "-p", "branchq-ffi"])
            .status()
            .unwrap();
        assert!(status.success());
    }
    assert!(lib.exists(), "{} missing", lib.display());
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile_dir();
    let exe = dir.join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&exe)
        .arg(crate_dir.join("../core/examples/fig1.json"))
        .output()
        .unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status);
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert_eq!(stdout.trim(), "verdict=0 delta=0.608695652174 queues=2");
}

fn tempfile_dir() -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("c-smoke");
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

//! C ABI for branchq.
//!
//! Networks and analyses are opaque handles owned by the caller and released
//! with their `_free` function. Every fallible call returns a [`BqStatus`];
//! on failure, [`bq_last_error_message`] describes the error on the calling
//! thread. Strings returned through `char **` out-parameters are
//! NUL-terminated JSON and must be released with [`bq_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use branchq::analysis::{analyze, AnalysisReport, Verdict};
use branchq::error::SimError;
use branchq::network::{parse_network, uniformize, validate, Network, ParsedNetwork};
use branchq::oracle::{auto_bound, solve_at, SolveMode, SHELL_TARGET};
use branchq::scalar::{ratio_to_f64, Ratio};
use branchq::sim::{run_cycles, SchedulerPolicy, SimConfig};
use branchq::traffic_lp::{build_lp, solve_lp, synthesize_scheduler};
use serde_json::json;

/// Status codes; the first four match the command-line exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqStatus {
    Ok = 0,
    /// Analytic negative: invalid network, not stabilizable, no usable bound.
    Negative = 1,
    InvalidInput = 2,
    BudgetExceeded = 3,
    NullPointer = 4,
    /// A Rust panic was caught at the boundary.
    Internal = 5,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BqVerdict {
    Stabilizable = 0,
    NotStabilizable = 1,
    Divergent = 2,
}

/// A parsed network (per-action rates already uniformized).
pub struct BqNetwork {
    net: Network,
}

/// An exact analysis report.
pub struct BqAnalysis {
    report: AnalysisReport<Ratio>,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: impl Into<String>) {
    let text = message.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

/// Runs `f`, converting panics into [`BqStatus::Internal`].
fn guard(f: impl FnOnce() -> BqStatus) -> BqStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let why = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal error: {why}"));
            BqStatus::Internal
        }
    }
}

fn fail(status: BqStatus, message: impl Into<String>) -> BqStatus {
    set_error(message);
    status
}

unsafe fn write_string(out: *mut *mut c_char, text: String) {
    let c = CString::new(text.replace('\0', " ")).expect("NUL bytes were replaced");
    *out = c.into_raw();
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn bq_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Parses a network from NUL-terminated JSON.
#[no_mangle]
pub unsafe extern "C" fn bq_network_from_json(
    json: *const c_char,
    out: *mut *mut BqNetwork,
) -> BqStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return fail(BqStatus::NullPointer, "null argument");
        }
        *out = ptr::null_mut();
        let Ok(text) = CStr::from_ptr(json).to_str() else {
            return fail(BqStatus::InvalidInput, "network JSON is not valid UTF-8");
        };
        let net = match parse_network(text) {
            Ok(ParsedNetwork::Plain(net)) => net,
            Ok(ParsedNetwork::Rated(rated)) => match uniformize(&rated, false) {
                Ok(net) => net,
                Err(e) => return fail(BqStatus::InvalidInput, e.to_string()),
            },
            Err(e) => return fail(BqStatus::InvalidInput, e.to_string()),
        };
        *out = Box::into_raw(Box::new(BqNetwork { net }));
        BqStatus::Ok
    })
}

#[no_mangle]
pub unsafe extern "C" fn bq_network_free(net: *mut BqNetwork) {
    if !net.is_null() {
        drop(Box::from_raw(net));
    }
}

/// Number of queues, or 0 for NULL.
#[no_mangle]
pub unsafe extern "C" fn bq_network_queue_count(net: *const BqNetwork) -> usize {
    net.as_ref().map_or(0, |n| n.net.n)
}

/// Validation report as JSON; `Negative` if the network violates a constraint.
#[no_mangle]
pub unsafe extern "C" fn bq_validate(
    net: *const BqNetwork,
    report_json: *mut *mut c_char,
) -> BqStatus {
    guard(|| {
        let Some(net) = net.as_ref() else {
            return fail(BqStatus::NullPointer, "null network");
        };
        let report = validate(&net.net);
        if !report_json.is_null() {
            let value = json!({"ok": report.is_ok(), "violations": report.violations});
            write_string(report_json, value.to_string());
        }
        if report.is_ok() {
            BqStatus::Ok
        } else {
            let messages: Vec<&str> = report
                .violations
                .iter()
                .map(|v| v.message.as_str())
                .collect();
            fail(BqStatus::Negative, messages.join("; "))
        }
    })
}

/// Runs the exact analysis pipeline.
#[no_mangle]
pub unsafe extern "C" fn bq_analyze(net: *const BqNetwork, out: *mut *mut BqAnalysis) -> BqStatus {
    guard(|| {
        let (Some(net), false) = (net.as_ref(), out.is_null()) else {
            return fail(BqStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        match analyze::<Ratio>(&net.net) {
            Ok(report) => {
                *out = Box::into_raw(Box::new(BqAnalysis { report }));
                BqStatus::Ok
            }
            Err(e) => fail(BqStatus::Negative, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn bq_analysis_free(analysis: *mut BqAnalysis) {
    if !analysis.is_null() {
        drop(Box::from_raw(analysis));
    }
}

#[no_mangle]
pub unsafe extern "C" fn bq_analysis_verdict(
    analysis: *const BqAnalysis,
    out: *mut BqVerdict,
) -> BqStatus {
    let (Some(a), false) = (analysis.as_ref(), out.is_null()) else {
        return fail(BqStatus::NullPointer, "null argument");
    };
    clear_error();
    *out = match a.report.verdict {
        Verdict::Stabilizable => BqVerdict::Stabilizable,
        Verdict::NotStabilizable => BqVerdict::NotStabilizable,
        Verdict::Divergent => BqVerdict::Divergent,
    };
    BqStatus::Ok
}

/// `δ*` rounded to double; `Negative` when the LP has no optimum.
#[no_mangle]
pub unsafe extern "C" fn bq_analysis_delta_star(
    analysis: *const BqAnalysis,
    out: *mut f64,
) -> BqStatus {
    let (Some(a), false) = (analysis.as_ref(), out.is_null()) else {
        return fail(BqStatus::NullPointer, "null argument");
    };
    clear_error();
    if !a.report.lp.is_optimal() {
        return fail(BqStatus::Negative, "traffic LP has no optimum");
    }
    *out = ratio_to_f64(&a.report.lp.delta_star);
    BqStatus::Ok
}

/// Drift margin `γ` rounded to double; `Negative` without a traffic solution.
#[no_mangle]
pub unsafe extern "C" fn bq_analysis_gamma(analysis: *const BqAnalysis, out: *mut f64) -> BqStatus {
    let (Some(a), false) = (analysis.as_ref(), out.is_null()) else {
        return fail(BqStatus::NullPointer, "null argument");
    };
    clear_error();
    match &a.report.lyapunov {
        Some(ld) => {
            *out = ratio_to_f64(&ld.gamma);
            BqStatus::Ok
        }
        None => fail(BqStatus::Negative, "no traffic solution"),
    }
}

/// Full report as JSON, with exact values as `"p/q"` strings.
#[no_mangle]
pub unsafe extern "C" fn bq_analysis_to_json(
    analysis: *const BqAnalysis,
    out: *mut *mut c_char,
) -> BqStatus {
    guard(|| {
        let (Some(a), false) = (analysis.as_ref(), out.is_null()) else {
            return fail(BqStatus::NullPointer, "null argument");
        };
        write_string(out, a.report.to_json().to_string());
        BqStatus::Ok
    })
}

/// Simulates `cycles` regeneration cycles under the synthesized scheduler.
/// `BudgetExceeded` still writes a JSON error report to `out`.
#[no_mangle]
pub unsafe extern "C" fn bq_simulate_json(
    net: *const BqNetwork,
    seed: u64,
    cycles: u64,
    replicas: u32,
    time_budget: f64,
    out: *mut *mut c_char,
) -> BqStatus {
    guard(|| {
        let (Some(net), false) = (net.as_ref(), out.is_null()) else {
            return fail(BqStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        let report = validate(&net.net);
        if !report.is_ok() {
            return fail(BqStatus::Negative, "network is invalid");
        }
        if replicas == 0 || time_budget.is_nan() || time_budget <= 0.0 {
            return fail(
                BqStatus::InvalidInput,
                "replicas and time budget must be positive",
            );
        }
        let sol = match solve_lp(&build_lp::<Ratio>(&net.net)) {
            Ok(sol) => sol,
            Err(e) => return fail(BqStatus::Negative, e.to_string()),
        };
        let policy = SchedulerPolicy::Static(synthesize_scheduler(&net.net, &sol));
        let cfg = SimConfig {
            seed,
            cycles,
            time_budget,
            replicas: replicas as usize,
            ..SimConfig::default()
        };
        match run_cycles(&net.net, &policy, &cfg) {
            Ok(report) => {
                write_string(out, report.to_json_string());
                BqStatus::Ok
            }
            Err(
                ref e @ SimError::BudgetExceededBeforeFirstReturn {
                    completed_cycles,
                    final_total,
                    ..
                },
            ) => {
                let value = json!({
                    "error": "BudgetExceededBeforeFirstReturn",
                    "completed_cycles": completed_cycles,
                    "final_total": final_total,
                });
                write_string(out, value.to_string());
                fail(BqStatus::BudgetExceeded, e.to_string())
            }
            Err(e) => fail(BqStatus::InvalidInput, e.to_string()),
        }
    })
}

/// Truncated-chain stationary distribution under the synthesized scheduler;
/// `bound == 0` picks the smallest bound with shell mass at most 1e-6.
#[no_mangle]
pub unsafe extern "C" fn bq_oracle_json(
    net: *const BqNetwork,
    bound: u32,
    out: *mut *mut c_char,
) -> BqStatus {
    guard(|| {
        let (Some(net), false) = (net.as_ref(), out.is_null()) else {
            return fail(BqStatus::NullPointer, "null argument");
        };
        *out = ptr::null_mut();
        if !validate(&net.net).is_ok() {
            return fail(BqStatus::Negative, "network is invalid");
        }
        let sol = match solve_lp(&build_lp::<Ratio>(&net.net)) {
            Ok(sol) => sol,
            Err(e) => return fail(BqStatus::Negative, e.to_string()),
        };
        let sched = synthesize_scheduler(&net.net, &sol);
        let result = if bound == 0 {
            auto_bound(&net.net, &sched, SHELL_TARGET, 512, SolveMode::Auto)
        } else {
            solve_at(&net.net, &sched, bound, SolveMode::Auto)
        };
        match result {
            Ok(sol) => {
                write_string(out, sol.to_json().to_string());
                BqStatus::Ok
            }
            Err(e) => fail(BqStatus::InvalidInput, e.to_string()),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn bq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

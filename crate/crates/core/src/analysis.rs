//! The full analysis pipeline: validate, solve the traffic LP, synthesize a
//! static scheduler, induce the pure network, solve its traffic equations on
//! the reachable queues and certify drift.

use serde_json::{json, Value};
use thiserror::Error;

use crate::error::{LpError, LyapunovError, NetworkError, TrafficError};
use crate::lyapunov::{certify_drift, lyapunov_json, DriftCertificate, DriftMode, LyapunovData};
use crate::network::{
    induce_pure_network, validate, validate_with, Network, StaticScheduler, ValidationReport,
};
use crate::scalar::Scalar;
use crate::simplex::LpStatus;
use crate::traffic::{solve_traffic_reachable, ReachableTraffic};
use crate::traffic_lp::{build_lp, solve_lp, synthesize_scheduler, LpSolution};

/// Probability sums in float mode only need to be this close to one.
pub const FLOAT_SUM_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stabilizable,
    NotStabilizable,
    /// No static mix of actions has a finite nonnegative traffic solution.
    Divergent,
}

impl Verdict {
    pub fn name(self) -> &'static str {
        match self {
            Verdict::Stabilizable => "Stabilizable",
            Verdict::NotStabilizable => "NotStabilizable",
            Verdict::Divergent => "Divergent",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    #[error("network is invalid: {}", .0.violations.iter().map(|v| v.message.clone()).collect::<Vec<_>>().join("; "))]
    Invalid(ValidationReport),
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    /// δ* < 1 but the synthesized scheduler failed certification; only float
    /// round-off should be able to cause this.
    #[error("LP optimum {delta_star} < 1 but drift certification failed: {source}")]
    Inconsistent {
        delta_star: String,
        source: LyapunovError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport<S> {
    pub validation: ValidationReport,
    pub lp: LpSolution<S>,
    pub scheduler: StaticScheduler,
    /// Traffic of the network induced by `scheduler` (of the network itself
    /// when it is purely stochastic).
    pub traffic: Option<ReachableTraffic<S>>,
    pub lyapunov: Option<LyapunovData<S>>,
    pub certificate: Option<DriftCertificate<S>>,
    pub verdict: Verdict,
}

impl<S: Scalar> AnalysisReport<S> {
    pub fn to_json(&self) -> Value {
        json!({
            "verdict": self.verdict.name(),
            "validation": {"ok": self.validation.is_ok(), "violations": self.validation.violations},
            "lp": self.lp.to_json(),
            "scheduler": self.scheduler.to_json(),
            "traffic": self.traffic.as_ref().map(ReachableTraffic::to_json),
            "lyapunov": self.lyapunov.as_ref().map(lyapunov_json),
            "drift_certificate": self.certificate.as_ref().map(DriftCertificate::to_json),
        })
    }
}

pub fn analyze<S: Scalar>(net: &Network) -> Result<AnalysisReport<S>, AnalysisError> {
    analyze_with(net, DriftMode::Superset)
}

pub fn analyze_with<S: Scalar>(
    net: &Network,
    mode: DriftMode,
) -> Result<AnalysisReport<S>, AnalysisError> {
    let validation = if S::EXACT {
        validate(net)
    } else {
        validate_with(net, Some(FLOAT_SUM_TOLERANCE))
    };
    if !validation.is_ok() {
        return Err(AnalysisError::Invalid(validation));
    }
    let lp = solve_lp(&build_lp::<S>(net))?;
    let scheduler = synthesize_scheduler(net, &lp);
    let mut report = AnalysisReport {
        validation,
        lp,
        scheduler,
        traffic: None,
        lyapunov: None,
        certificate: None,
        verdict: Verdict::Divergent,
    };
    if report.lp.status != LpStatus::Optimal {
        return Ok(report);
    }
    let induced = induce_pure_network(net, &report.scheduler)?;
    let traffic = solve_traffic_reachable::<S>(&induced)?;
    let ld = LyapunovData::new(traffic.traffic.clone());
    let deficient = traffic.deficient();
    report.traffic = Some(traffic);
    if report.lp.delta_star < S::one() {
        match certify_drift(&ld, mode) {
            Ok(cert) => {
                report.certificate = Some(cert);
                report.verdict = Verdict::Stabilizable;
            }
            Err(source) => {
                return Err(AnalysisError::Inconsistent {
                    delta_star: report.lp.delta_star.to_json().to_string(),
                    source,
                })
            }
        }
    } else {
        debug_assert!(!deficient || !S::EXACT);
        report.verdict = Verdict::NotStabilizable;
    }
    report.lyapunov = Some(ld);
    Ok(report)
}

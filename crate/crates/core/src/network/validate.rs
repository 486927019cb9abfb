use std::collections::BTreeSet;
use std::fmt;

use num_traits::{One, Zero};
use serde::Serialize;

use super::{Network, Production};
use crate::scalar::{format_ratio, ratio_to_f64, Ratio};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    NoQueues,
    QueueCountMismatch,
    NonPositiveRate,
    NoActions,
    DuplicateActionId,
    OffspringLength,
    BranchingExceeded,
    NonPositiveProbability,
    ProbabilityAboveOne,
    DuplicateOffspring,
    ProbabilitySum,
    ZeroArrivalStream,
    UnreachableQueue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub location: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, location: String, message: String) {
        self.violations.push(Violation {
            kind,
            location,
            message,
        });
    }
}

/// Checks every definitional constraint with exact probability sums.
pub fn validate(net: &Network) -> ValidationReport {
    validate_with(net, None)
}

/// As [`validate`]; with `Some(eps)` probability sums only need to be within
/// `eps` of one in binary64.
pub fn validate_with(net: &Network, sum_tolerance: Option<f64>) -> ValidationReport {
    let mut report = ValidationReport::default();
    if net.n == 0 {
        report.push(
            ViolationKind::NoQueues,
            "n".into(),
            "network needs at least one queue".into(),
        );
    }
    if net.queues.len() != net.n {
        report.push(
            ViolationKind::QueueCountMismatch,
            "queues".into(),
            format!("n = {} but {} queues are listed", net.n, net.queues.len()),
        );
    }
    if net.arrival_rate <= Ratio::zero() {
        report.push(
            ViolationKind::NonPositiveRate,
            "arrival.rate".into(),
            "arrival rate must be positive".into(),
        );
    }
    check_production(
        net,
        &net.arrival,
        "arrival",
        "the arrival stream",
        sum_tolerance,
        &mut report,
    );
    if net
        .arrival
        .entries
        .iter()
        .all(|e| e.offspring.iter().all(|&c| c == 0))
    {
        report.push(
            ViolationKind::ZeroArrivalStream,
            "arrival.production".into(),
            "nonzero arrival stream required".into(),
        );
    }

    for (i, queue) in net.queues.iter().enumerate() {
        let label = i + 1;
        if queue.rate <= Ratio::zero() {
            report.push(
                ViolationKind::NonPositiveRate,
                format!("queues[{i}].rate"),
                format!("service rate of queue {label} must be positive"),
            );
        }
        if queue.actions.is_empty() {
            report.push(
                ViolationKind::NoActions,
                format!("queues[{i}].actions"),
                format!("queue {label} has no actions"),
            );
        }
        let mut ids = BTreeSet::new();
        for (a, action) in queue.actions.iter().enumerate() {
            if !ids.insert(action.id.as_str()) {
                report.push(
                    ViolationKind::DuplicateActionId,
                    format!("queues[{i}].actions[{a}].id"),
                    format!("action id {:?} repeated at queue {label}", action.id),
                );
            }
            let owner = if queue.actions.len() == 1 {
                format!("queue {label}")
            } else {
                format!("queue {label} (action {:?})", action.id)
            };
            check_production(
                net,
                &action.production,
                &format!("queues[{i}].actions[{a}]"),
                &owner,
                sum_tolerance,
                &mut report,
            );
        }
    }

    // Reachability is only meaningful once the shape is right.
    if report.is_ok() {
        let reachable = net.reachable_queues();
        for i in (0..net.n).filter(|i| !reachable.contains(i)) {
            report.push(
                ViolationKind::UnreachableQueue,
                format!("queues[{i}]"),
                format!("queue {} is unreachable from the arrival stream", i + 1),
            );
        }
    }
    report
}

fn check_production(
    net: &Network,
    production: &Production,
    location: &str,
    owner: &str,
    sum_tolerance: Option<f64>,
    report: &mut ValidationReport,
) {
    let mut seen = BTreeSet::new();
    for (e, entry) in production.entries.iter().enumerate() {
        let at = format!("{location}.production[{e}]");
        if entry.offspring.len() != net.n {
            report.push(
                ViolationKind::OffspringLength,
                format!("{at}.offspring"),
                format!(
                    "offspring vector of length {} at {owner}, expected {}",
                    entry.offspring.len(),
                    net.n
                ),
            );
        }
        if entry.total() > u64::from(net.branching) {
            report.push(
                ViolationKind::BranchingExceeded,
                format!("{at}.offspring"),
                format!(
                    "offspring total {} exceeds branching factor {} at {owner}",
                    entry.total(),
                    net.branching
                ),
            );
        }
        if entry.prob <= Ratio::zero() {
            report.push(
                ViolationKind::NonPositiveProbability,
                format!("{at}.prob"),
                format!(
                    "probability {} at {owner} must be positive",
                    format_ratio(&entry.prob)
                ),
            );
        } else if entry.prob > Ratio::one() {
            report.push(
                ViolationKind::ProbabilityAboveOne,
                format!("{at}.prob"),
                format!(
                    "probability {} at {owner} exceeds 1",
                    format_ratio(&entry.prob)
                ),
            );
        }
        if !seen.insert(entry.offspring.clone()) {
            report.push(
                ViolationKind::DuplicateOffspring,
                format!("{at}.offspring"),
                format!(
                    "offspring vector {:?} listed twice at {owner}",
                    entry.offspring
                ),
            );
        }
    }
    let total = production.total_prob();
    let sums_to_one = match sum_tolerance {
        None => total.is_one(),
        Some(eps) => {
            let float_total: f64 = production
                .entries
                .iter()
                .map(|e| ratio_to_f64(&e.prob))
                .sum();
            (float_total - 1.0).abs() <= eps
        }
    };
    if !sums_to_one {
        report.push(
            ViolationKind::ProbabilitySum,
            format!("{location}.production"),
            format!(
                "production probabilities sum ≠ 1 at {owner} (sum = {})",
                format_ratio(&total)
            ),
        );
    }
}

//! The traffic LP over per-action firing rates, and the static randomized
//! scheduler it induces.
//!
//! ```text
//! minimize δ subject to
//!   Σ_{ξ∈Σ_j} λ_ξ  =  α_j + Σ_i Σ_{ζ∈Σ_i} λ_ζ · A_ζj     for every queue j
//!   δ            ≥  Σ_{ξ∈Σ_j} λ_ξ / μ_j                 for every queue j
//!   λ_ξ          ≥  0
//! ```
//!
//! Variable 0 is `δ`; the `λ_ξ` follow ordered by queue, then action id.
//!
//! The optimum is often a whole face (any split that keeps every queue below
//! `δ*` will do). Ties are broken lexicographically: a second stage fixes
//! `δ ≤ δ*` and minimizes the total utilization `Σ_j Σ_{ξ∈Σ_j} λ_ξ / μ_j`,
//! which prefers schedulers that create no unnecessary work. Bland's rule over
//! the fixed column order settles any remaining tie reproducibly.

use std::collections::BTreeMap;

use num_traits::{One, Signed, Zero};
use serde_json::{json, Value};

use crate::error::LpError;
use crate::network::{Network, StaticScheduler};
use crate::scalar::{Ratio, Scalar};
use crate::simplex::{LinearProgram, LpStatus, Relation, FLOAT_TOLERANCE};

/// One LP column: action `action` (index into the queue's action list) of `queue`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActionRef {
    pub queue: usize,
    pub action: usize,
    pub id: String,
}

impl ActionRef {
    /// `"<queue>:<id>"` with a 1-based queue label.
    pub fn label(&self) -> String {
        format!("{}:{}", self.queue + 1, self.id)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficLp<S> {
    pub columns: Vec<ActionRef>,
    pub program: LinearProgram<S>,
    pub n: usize,
    /// `μ_i` per queue.
    pub rates: Vec<S>,
}

impl<S: Scalar> TrafficLp<S> {
    pub fn variable_count(&self) -> usize {
        self.program.num_vars
    }

    pub fn equalities(&self) -> impl Iterator<Item = &crate::simplex::Constraint<S>> {
        self.program
            .constraints
            .iter()
            .filter(|c| c.relation == Relation::Eq)
    }

    pub fn inequalities(&self) -> impl Iterator<Item = &crate::simplex::Constraint<S>> {
        self.program
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution<S> {
    pub status: LpStatus,
    pub delta_star: S,
    /// Optimal `λ̄_ξ`, aligned with `columns`.
    pub lambda_bar: Vec<S>,
    pub columns: Vec<ActionRef>,
    /// Basic LP columns (0 = δ, 1.. = λ_ξ, then slacks).
    pub basis: Vec<usize>,
    pub iterations: usize,
}

impl<S: Scalar> LpSolution<S> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }

    /// `Σ_{ξ∈Σ_i} λ̄_ξ` per queue.
    pub fn queue_totals(&self, n: usize) -> Vec<S> {
        let mut totals = vec![S::zero(); n];
        for (col, value) in self.columns.iter().zip(&self.lambda_bar) {
            totals[col.queue] = totals[col.queue].clone() + value.clone();
        }
        totals
    }

    pub fn lambda_of(&self, queue: usize, id: &str) -> Option<&S> {
        self.columns
            .iter()
            .position(|c| c.queue == queue && c.id == id)
            .map(|k| &self.lambda_bar[k])
    }

    pub fn to_json(&self) -> Value {
        let lambda: serde_json::Map<String, Value> = self
            .columns
            .iter()
            .zip(&self.lambda_bar)
            .map(|(c, v)| (c.label(), v.to_json()))
            .collect();
        json!({
            "status": self.status,
            "delta_star": if self.is_optimal() { self.delta_star.to_json() } else { Value::Null },
            "lambda_bar": lambda,
            "basis": self.basis,
        })
    }
}

/// Builds the LP exactly as displayed in the module docs.
pub fn build_lp<S: Scalar>(net: &Network) -> TrafficLp<S> {
    let n = net.n;
    let columns: Vec<ActionRef> = net
        .queues
        .iter()
        .enumerate()
        .flat_map(|(queue, q)| {
            q.actions_by_id().into_iter().map(move |action| ActionRef {
                queue,
                action,
                id: q.actions[action].id.clone(),
            })
        })
        .collect();
    let means: Vec<Vec<S>> = columns
        .iter()
        .map(|c| {
            net.queues[c.queue].actions[c.action]
                .production
                .mean_offspring(n)
                .iter()
                .map(S::from_ratio)
                .collect()
        })
        .collect();
    let alpha: Vec<S> = net.alpha().iter().map(S::from_ratio).collect();
    let mut program = LinearProgram::new(1 + columns.len());
    program.objective[0] = S::one();

    for j in 0..n {
        let mut coeffs = vec![S::zero(); program.num_vars];
        for (k, (col, mean)) in columns.iter().zip(&means).enumerate() {
            let own = if col.queue == j { S::one() } else { S::zero() };
            coeffs[k + 1] = own - mean[j].clone();
        }
        program.add(coeffs, Relation::Eq, alpha[j].clone());
    }
    for j in 0..n {
        let mu = S::from_ratio(&net.queues[j].rate);
        let mut coeffs = vec![S::zero(); program.num_vars];
        coeffs[0] = S::one();
        for (k, col) in columns.iter().enumerate() {
            if col.queue == j {
                coeffs[k + 1] = -(S::one() / mu.clone());
            }
        }
        program.add(coeffs, Relation::Ge, S::zero());
    }
    let rates = net.rates().iter().map(S::from_ratio).collect();
    TrafficLp {
        columns,
        program,
        n,
        rates,
    }
}

pub fn solve_lp<S: Scalar>(lp: &TrafficLp<S>) -> Result<LpSolution<S>, LpError> {
    let first = lp.program.solve()?;
    let delta_star = first.values[0].clone();
    let mut out = first.clone();
    if first.status == LpStatus::Optimal {
        let mut tie_break = lp.program.clone();
        tie_break.objective = std::iter::once(S::zero())
            .chain(
                lp.columns
                    .iter()
                    .map(|c| S::one() / lp.rates[c.queue].clone()),
            )
            .collect();
        let mut cap = vec![S::zero(); lp.program.num_vars];
        cap[0] = S::one();
        tie_break.add(
            cap,
            Relation::Le,
            delta_star.clone() + S::tol(FLOAT_TOLERANCE),
        );
        let second = tie_break.solve()?;
        // Only float round-off could make the restricted problem fail.
        if second.status == LpStatus::Optimal {
            out = second;
            out.iterations += first.iterations;
        }
    }
    Ok(LpSolution {
        status: out.status,
        delta_star,
        lambda_bar: out.values[1..].to_vec(),
        columns: lp.columns.clone(),
        basis: out.basis,
        iterations: out.iterations,
    })
}

/// Stabilizable iff the LP is optimal with `δ* < 1` (strictly).
pub fn is_stabilizable<S: Scalar>(net: &Network) -> Result<(bool, LpSolution<S>), LpError> {
    let sol = solve_lp(&build_lp::<S>(net))?;
    let answer = sol.is_optimal() && sol.delta_star < S::one();
    Ok((answer, sol))
}

/// `P_ξ = λ̄_ξ / Σ_{ζ∈Σ_i} λ̄_ζ`; queues with zero total inflow get their
/// lexicographically first action with probability one.
///
/// Float solutions are converted to rationals (negative round-off is clamped
/// to zero) before normalizing, so every distribution sums to one exactly.
pub fn synthesize_scheduler<S: Scalar>(net: &Network, sol: &LpSolution<S>) -> StaticScheduler {
    let mut weights: Vec<BTreeMap<String, Ratio>> = vec![BTreeMap::new(); net.n];
    for (col, value) in sol.columns.iter().zip(&sol.lambda_bar) {
        let mut w = value.to_ratio();
        if w.is_negative() {
            w = Zero::zero();
        }
        weights[col.queue].insert(col.id.clone(), w);
    }
    let queues = weights
        .into_iter()
        .zip(&net.queues)
        .map(|(w, queue)| {
            let total: Ratio = w.values().cloned().sum();
            if total.is_zero() {
                let first = &queue.actions[queue.actions_by_id()[0]].id;
                BTreeMap::from([(first.clone(), One::one())])
            } else {
                w.into_iter().map(|(id, v)| (id, v / &total)).collect()
            }
        })
        .collect();
    StaticScheduler::new(queues)
}

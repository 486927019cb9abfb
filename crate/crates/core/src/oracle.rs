//! Stationary distributions of the chain truncated to `{x : ‖x‖ ≤ B}`.
//!
//! Transitions that would leave the truncated set are suppressed and their
//! rate is dropped from the row (Reject), so the result is a proper generator
//! and the mass on the outer shell bounds the truncation error.
//!
//! Small chains are solved exactly: fix `π(0) = 1`, solve the remaining
//! balance equations by sparse elimination and normalize. The transposed
//! generator is column-diagonally dominant, so elimination needs no
//! pivoting, and ordering states by total size keeps fill-in inside a band.
//! Larger chains use power iteration on the uniformized kernel.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};

use num_traits::Zero;
use serde_json::{json, Value};

use crate::error::OracleError;
use crate::network::{Network, PureNetwork, StaticScheduler};
use crate::scalar::{ratio_to_f64, Ratio, Scalar};
use crate::sim::{jump_rates, OccupancyEntry};

/// Chains with at most this many states in the recurrent class are solved
/// in exact rational arithmetic under [`SolveMode::Auto`].
pub const EXACT_STATE_LIMIT: usize = 200;
/// Upper limit on enumerated states.
pub const MAX_STATES: usize = 2_000_000;
pub const POWER_TOLERANCE: f64 = 1e-12;
pub const POWER_MAX_ITERATIONS: usize = 2_000_000;
/// Default shell-mass target of the automatic bound search.
pub const SHELL_TARGET: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SolveMode {
    #[default]
    Auto,
    Exact,
    Float,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedChain {
    pub bound: u32,
    pub branching: u32,
    pub states: Vec<Vec<u64>>,
    /// Off-diagonal rates `(target, rate)` per state, merged by target.
    pub transitions: Vec<Vec<(usize, Ratio)>>,
}

impl TruncatedChain {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn index_of(&self, state: &[u64]) -> Option<usize> {
        self.states.iter().position(|s| s == state)
    }

    pub fn exit_rate(&self, i: usize) -> Ratio {
        self.transitions[i].iter().map(|(_, r)| r.clone()).sum()
    }

    /// Dense generator; rows sum to zero.
    pub fn generator(&self) -> Vec<Vec<Ratio>> {
        let m = self.len();
        let mut q = vec![vec![<Ratio as Zero>::zero(); m]; m];
        for (i, row) in self.transitions.iter().enumerate() {
            for (j, r) in row {
                q[i][*j] += r;
                q[i][i] -= r;
            }
        }
        q
    }

    /// A chain given directly by its states and transition rates.
    pub fn from_transitions(states: Vec<Vec<u64>>, rates: &[(usize, usize, Ratio)]) -> Self {
        let mut merged: Vec<BTreeMap<usize, Ratio>> = vec![BTreeMap::new(); states.len()];
        for (from, to, rate) in rates {
            if from != to {
                *merged[*from]
                    .entry(*to)
                    .or_insert_with(<Ratio as Zero>::zero) += rate;
            }
        }
        let bound = states
            .iter()
            .map(|s| s.iter().sum::<u64>())
            .max()
            .unwrap_or(0) as u32;
        Self {
            bound,
            branching: 0,
            states,
            transitions: merged
                .into_iter()
                .map(|m| m.into_iter().collect())
                .collect(),
        }
    }
}

/// `{x ∈ N^n : ‖x‖ ≤ bound}`, by total size, then descending lexicographic.
pub fn lattice(n: usize, bound: u32) -> Vec<Vec<u64>> {
    fn fill(prefix: &mut Vec<u64>, left: u64, slots: usize, out: &mut Vec<Vec<u64>>) {
        if slots == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in (0..=left).rev() {
            prefix.push(k);
            fill(prefix, left - k, slots - 1, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    for total in 0..=u64::from(bound) {
        fill(&mut Vec::with_capacity(n), total, n, &mut out);
    }
    out
}

fn lattice_size(n: usize, bound: u32) -> Option<usize> {
    // C(bound + n, n), with overflow treated as too large.
    let mut c: u128 = 1;
    for k in 1..=n as u128 {
        c = c * (u128::from(bound) + k) / k;
        if c > MAX_STATES as u128 {
            return None;
        }
    }
    Some(c as usize)
}

pub fn build_truncated(net: &PureNetwork, bound: u32) -> Result<TruncatedChain, OracleError> {
    let sched = StaticScheduler::deterministic(net.network(), &vec![0; net.n()]);
    build_truncated_with(net.network(), &sched, bound)
}

/// Truncated chain of a controlled network under a static scheduler.
pub fn build_truncated_with(
    net: &Network,
    sched: &StaticScheduler,
    bound: u32,
) -> Result<TruncatedChain, OracleError> {
    if bound < net.branching {
        return Err(OracleError::BoundBelowBranching {
            bound,
            branching: net.branching,
        });
    }
    let size = lattice_size(net.n, bound).ok_or(OracleError::TooLarge {
        states: usize::MAX,
        limit: MAX_STATES,
    })?;
    if size > MAX_STATES {
        return Err(OracleError::TooLarge {
            states: size,
            limit: MAX_STATES,
        });
    }
    let states = lattice(net.n, bound);
    let index: HashMap<&[u64], usize> = states
        .iter()
        .enumerate()
        .map(|(i, s)| (s.as_slice(), i))
        .collect();
    let transitions = states
        .iter()
        .enumerate()
        .map(|(i, x)| {
            let rates =
                jump_rates(net, sched, x).expect("scheduler was checked against the network");
            rates
                .into_iter()
                .filter_map(|(y, r)| index.get(y.as_slice()).map(|&j| (j, r)))
                .filter(|(j, _)| *j != i)
                .collect()
        })
        .collect();
    Ok(TruncatedChain {
        bound,
        branching: net.branching,
        states,
        transitions,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stationary {
    pub states: Vec<Vec<u64>>,
    pub pi: Vec<f64>,
    /// Exact probabilities when solved in rational arithmetic.
    pub exact: Option<Vec<Ratio>>,
    pub method: &'static str,
    pub iterations: usize,
    /// Set when states reachable from 0 lie outside its closed class.
    pub warning: Option<String>,
}

impl Stationary {
    pub fn probability(&self, state: &[u64]) -> f64 {
        self.states
            .iter()
            .position(|s| s == state)
            .map_or(0.0, |i| self.pi[i])
    }

    pub fn probability_where(&self, pred: impl Fn(&[u64]) -> bool) -> f64 {
        self.states
            .iter()
            .zip(&self.pi)
            .filter(|(s, _)| pred(s))
            .map(|(_, p)| p)
            .sum()
    }

    pub fn exact_where(&self, pred: impl Fn(&[u64]) -> bool) -> Option<Ratio> {
        let exact = self.exact.as_ref()?;
        Some(
            self.states
                .iter()
                .zip(exact)
                .filter(|(s, _)| pred(s))
                .map(|(_, p)| p.clone())
                .sum(),
        )
    }

    /// `Σ_{x_i > 0} π(x)` per queue.
    pub fn utilization(&self) -> Vec<f64> {
        let n = self.states.first().map_or(0, Vec::len);
        (0..n)
            .map(|i| self.probability_where(|x| x[i] > 0))
            .collect()
    }
}

fn closed_class_of_origin(
    tc: &TruncatedChain,
) -> Result<(Vec<usize>, Option<String>), OracleError> {
    let origin = tc
        .states
        .iter()
        .position(|s| s.iter().all(|&v| v == 0))
        .ok_or(OracleError::NoRecurrentClassAtOrigin)?;
    let m = tc.len();
    let mut back: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, row) in tc.transitions.iter().enumerate() {
        for (j, _) in row {
            back[*j].push(i);
        }
    }
    let search = |edges: &dyn Fn(usize) -> Vec<usize>| {
        let mut seen = BTreeSet::from([origin]);
        let mut queue = VecDeque::from([origin]);
        while let Some(i) = queue.pop_front() {
            for j in edges(i) {
                if seen.insert(j) {
                    queue.push_back(j);
                }
            }
        }
        seen
    };
    let forward = search(&|i| tc.transitions[i].iter().map(|(j, _)| *j).collect());
    let backward = search(&|i| back[i].clone());
    let class: BTreeSet<usize> = forward.intersection(&backward).copied().collect();
    let leaks = class
        .iter()
        .any(|&i| tc.transitions[i].iter().any(|(j, _)| !class.contains(j)));
    if leaks {
        return Err(OracleError::NoRecurrentClassAtOrigin);
    }
    let warning = (class.len() < m).then(|| {
        format!(
            "{} of {} states lie outside the closed class of 0 and get probability 0",
            m - class.len(),
            m
        )
    });
    Ok((class.into_iter().collect(), warning))
}

pub fn stationary(tc: &TruncatedChain) -> Result<Stationary, OracleError> {
    stationary_with(tc, SolveMode::Auto)
}

pub fn stationary_with(tc: &TruncatedChain, mode: SolveMode) -> Result<Stationary, OracleError> {
    let (class, warning) = closed_class_of_origin(tc)?;
    let exact = match mode {
        SolveMode::Exact => true,
        SolveMode::Float => false,
        SolveMode::Auto => class.len() <= EXACT_STATE_LIMIT,
    };
    let m = tc.len();
    let (pi, exact_pi, method, iterations) = if exact {
        let local = solve_balance::<Ratio>(tc, &class);
        let mut full = vec![<Ratio as Zero>::zero(); m];
        for (k, &i) in class.iter().enumerate() {
            full[i] = local[k].clone();
        }
        (
            full.iter().map(ratio_to_f64).collect(),
            Some(full),
            "exact",
            0,
        )
    } else {
        let (local, iterations) = power_iteration(tc, &class)?;
        let mut full = vec![0.0; m];
        for (k, &i) in class.iter().enumerate() {
            full[i] = local[k];
        }
        (full, None, "power_iteration", iterations)
    };
    Ok(Stationary {
        states: tc.states.clone(),
        pi,
        exact: exact_pi,
        method,
        iterations,
        warning,
    })
}

/// `πQ = 0`, `Σπ = 1` on `class` (whose first element is the origin).
fn solve_balance<S: Scalar>(tc: &TruncatedChain, class: &[usize]) -> Vec<S> {
    let k = class.len();
    let local: HashMap<usize, usize> = class.iter().enumerate().map(|(a, &i)| (i, a)).collect();
    // Unknowns and equations are the non-origin class states 1..k; row y of
    // M holds Q[x][y] over x. Right-hand side is -Q[0][y].
    let mut rows: Vec<BTreeMap<usize, S>> = vec![BTreeMap::new(); k];
    let mut rhs = vec![S::zero(); k];
    for (a, &i) in class.iter().enumerate() {
        let exit = S::from_ratio(&tc.exit_rate(i));
        if a > 0 {
            rows[a].insert(a, -exit);
        }
        for (j, r) in &tc.transitions[i] {
            let b = local[j];
            if b == 0 {
                continue;
            }
            let r = S::from_ratio(r);
            if a == 0 {
                rhs[b] = rhs[b].clone() - r;
            } else {
                let slot = rows[b].entry(a).or_insert_with(S::zero);
                *slot = slot.clone() + r;
            }
        }
    }
    // Rows holding a nonzero in each column, for elimination below the pivot.
    let mut holders: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); k];
    for (r, row) in rows.iter().enumerate().skip(1) {
        for &c in row.keys() {
            holders[c].insert(r);
        }
    }
    for p in 1..k {
        let pivot_row = rows[p].clone();
        let pivot = pivot_row[&p].clone();
        let below: Vec<usize> = holders[p].range(p + 1..).copied().collect();
        for r in below {
            let Some(factor) = rows[r].remove(&p) else {
                continue;
            };
            let factor = factor / pivot.clone();
            for (&c, v) in pivot_row.range(p + 1..) {
                let slot = rows[r].entry(c).or_insert_with(S::zero);
                *slot = slot.clone() - factor.clone() * v.clone();
                holders[c].insert(r);
            }
            rhs[r] = rhs[r].clone() - factor * rhs[p].clone();
        }
    }
    let mut x = vec![S::zero(); k];
    x[0] = S::one();
    for p in (1..k).rev() {
        let mut acc = rhs[p].clone();
        for (&c, v) in rows[p].range(p + 1..) {
            acc = acc - v.clone() * x[c].clone();
        }
        x[p] = acc / rows[p][&p].clone();
    }
    let total = x.iter().cloned().fold(S::zero(), |a, b| a + b);
    x.into_iter().map(|v| v / total.clone()).collect()
}

fn power_iteration(tc: &TruncatedChain, class: &[usize]) -> Result<(Vec<f64>, usize), OracleError> {
    let k = class.len();
    let local: HashMap<usize, usize> = class.iter().enumerate().map(|(a, &i)| (i, a)).collect();
    let rates: Vec<Vec<(usize, f64)>> = class
        .iter()
        .map(|&i| {
            tc.transitions[i]
                .iter()
                .map(|(j, r)| (local[j], ratio_to_f64(r)))
                .collect()
        })
        .collect();
    let exits: Vec<f64> = rates
        .iter()
        .map(|row| row.iter().map(|(_, r)| r).sum())
        .collect();
    // Slightly above the largest exit rate so every state keeps a self-loop.
    let lambda = exits.iter().copied().fold(0.0, f64::max) * 1.01;
    if lambda == 0.0 {
        return Ok((vec![1.0], 0));
    }
    let mut pi = vec![1.0 / k as f64; k];
    let mut next = vec![0.0; k];
    for iteration in 1..=POWER_MAX_ITERATIONS {
        for (a, slot) in next.iter_mut().enumerate() {
            *slot = pi[a] * (1.0 - exits[a] / lambda);
        }
        for (a, row) in rates.iter().enumerate() {
            let mass = pi[a] / lambda;
            for (b, r) in row {
                next[*b] += mass * r;
            }
        }
        let total: f64 = next.iter().sum();
        let mut change = 0.0;
        for (p, q) in pi.iter_mut().zip(&next) {
            let v = q / total;
            change += (v - *p).abs();
            *p = v;
        }
        if change <= POWER_TOLERANCE {
            return Ok((pi, iteration));
        }
    }
    Err(OracleError::NotConverged {
        iterations: POWER_MAX_ITERATIONS,
    })
}

/// Stationary mass with `‖x‖ ∈ {B - K + 1, …, B}` (at least the outermost
/// shell when `K = 0`).
pub fn truncation_mass(tc: &TruncatedChain, st: &Stationary) -> f64 {
    let width = u64::from(tc.branching.max(1));
    let low = u64::from(tc.bound) + 1 - width.min(u64::from(tc.bound) + 1);
    st.probability_where(|x| x.iter().sum::<u64>() >= low)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleSolution {
    pub chain: TruncatedChain,
    pub stationary: Stationary,
    pub shell_mass: f64,
}

impl OracleSolution {
    pub fn to_json(&self) -> Value {
        let n = self.chain.states.first().map_or(0, Vec::len);
        let distribution: Vec<Value> = self
            .stationary
            .states
            .iter()
            .zip(&self.stationary.pi)
            .filter(|(_, p)| **p > 0.0)
            .map(|(s, p)| json!({"state": s, "probability": p}))
            .collect();
        json!({
            "bound": self.chain.bound,
            "states": self.chain.len(),
            "method": self.stationary.method,
            "iterations": self.stationary.iterations,
            "shell_mass": self.shell_mass,
            "utilization": self.stationary.utilization(),
            "joint_busy": if n > 1 {
                json!(self.stationary.probability_where(|x| x.iter().all(|&v| v > 0)))
            } else {
                Value::Null
            },
            "warning": self.stationary.warning,
            "distribution": distribution,
        })
    }
}

pub fn solve_at(
    net: &Network,
    sched: &StaticScheduler,
    bound: u32,
    mode: SolveMode,
) -> Result<OracleSolution, OracleError> {
    let chain = build_truncated_with(net, sched, bound)?;
    let stationary = stationary_with(&chain, mode)?;
    let shell_mass = truncation_mass(&chain, &stationary);
    Ok(OracleSolution {
        chain,
        stationary,
        shell_mass,
    })
}

/// Smallest bound with shell mass at most `target`: doubling from `4K`
/// (at least 4), then bisecting between the last two bounds tried.
pub fn auto_bound(
    net: &Network,
    sched: &StaticScheduler,
    target: f64,
    max_bound: u32,
    mode: SolveMode,
) -> Result<OracleSolution, OracleError> {
    let mut low = 0;
    let mut bound = (4 * net.branching).max(4);
    let mut best = loop {
        let sol = solve_at(net, sched, bound, mode)?;
        if sol.shell_mass <= target {
            break sol;
        }
        if bound >= max_bound {
            return Err(OracleError::ShellMassNotReached { max_bound, target });
        }
        low = bound;
        bound = (bound * 2).min(max_bound);
    };
    let mut high = bound;
    while high - low > 1 {
        let mid = low + (high - low) / 2;
        if mid < net.branching {
            low = mid;
            continue;
        }
        let sol = solve_at(net, sched, mid, mode)?;
        if sol.shell_mass <= target {
            high = mid;
            best = sol;
        } else {
            low = mid;
        }
    }
    Ok(best)
}

/// `½ Σ_x |π(x) - occupancy(x)|` over the union of supports.
pub fn total_variation(st: &Stationary, occupancy: &[OccupancyEntry]) -> f64 {
    let mut diff: BTreeMap<&[u64], f64> = BTreeMap::new();
    for (s, p) in st.states.iter().zip(&st.pi) {
        *diff.entry(s.as_slice()).or_insert(0.0) += p;
    }
    for e in occupancy {
        *diff.entry(e.state.as_slice()).or_insert(0.0) -= e.fraction;
    }
    0.5 * diff.values().map(|d| d.abs()).sum::<f64>()
}

/// `½ Σ |π_a - π_b|` between two oracle solutions (states matched by value).
pub fn oracle_distance(a: &Stationary, b: &Stationary) -> f64 {
    let entries: Vec<OccupancyEntry> = b
        .states
        .iter()
        .zip(&b.pi)
        .map(|(s, p)| OccupancyEntry {
            state: s.clone(),
            fraction: *p,
        })
        .collect();
    total_variation(a, &entries)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::{int, ratio};

    #[test]
    fn npf_bound_two_states_and_suppression() {
        let tc = build_truncated(&fixtures::npf(), 2).unwrap();
        let states: BTreeSet<Vec<u64>> = tc.states.iter().cloned().collect();
        let expected: BTreeSet<Vec<u64>> = [
            vec![0, 0],
            vec![1, 0],
            vec![0, 1],
            vec![1, 1],
            vec![2, 0],
            vec![0, 2],
        ]
        .into();
        assert_eq!(states, expected);
        let full = tc.index_of(&[1, 1]).unwrap();
        // Only the two services remain; the arrival to (2, 2) is suppressed.
        assert_eq!(tc.exit_rate(full), int(6));
        assert_eq!(tc.transitions[full].len(), 2);
        for row in tc.generator() {
            assert_eq!(row.iter().cloned().sum::<Ratio>(), int(0));
        }
    }

    #[test]
    fn origin_rate_of_fig1() {
        let tc = build_truncated(&fixtures::fig1(), 4).unwrap();
        let origin = tc.index_of(&[0, 0]).unwrap();
        let to = tc.index_of(&[1, 0]).unwrap();
        assert_eq!(tc.transitions[origin], vec![(to, ratio(7, 30))]);
    }

    #[test]
    fn bound_below_branching_rejected() {
        assert!(matches!(
            build_truncated(&fixtures::npf(), 1),
            Err(OracleError::BoundBelowBranching { .. })
        ));
    }

    #[test]
    fn mm1_birth_death() {
        let tc = build_truncated(&fixtures::mm1(int(1), int(3)), 50).unwrap();
        assert_eq!(tc.len(), 51);
        let st = stationary(&tc).unwrap();
        let err = (0..=50)
            .map(|k| (st.pi[k] - (2.0 / 3.0) * (1.0f64 / 3.0).powi(k as i32)).abs())
            .fold(0.0, f64::max);
        assert!(err <= 1e-10, "{err}");
        let mass = truncation_mass(&tc, &st);
        assert!(mass <= 1e-23 && mass > 0.0);
    }

    #[test]
    fn two_state_auxiliary_chain() {
        let tc = TruncatedChain::from_transitions(
            vec![vec![0, 0], vec![1, 1]],
            &[(0, 1, int(1)), (1, 0, int(6))],
        );
        let st = stationary(&tc).unwrap();
        assert_eq!(st.exact.unwrap(), vec![ratio(6, 7), ratio(1, 7)]);
    }

    #[test]
    fn float_and_exact_agree() {
        let tc = build_truncated(&fixtures::fig1(), 10).unwrap();
        let a = stationary_with(&tc, SolveMode::Exact).unwrap();
        let b = stationary_with(&tc, SolveMode::Float).unwrap();
        assert!(oracle_distance(&a, &b) < 1e-9);
    }

    #[test]
    fn unreachable_states_get_zero_with_warning() {
        let net = fixtures::mm1(int(1), int(2));
        let tc = TruncatedChain::from_transitions(
            vec![vec![0], vec![1], vec![2]],
            &[(0, 1, int(1)), (1, 0, int(2)), (2, 1, int(1))],
        );
        let st = stationary(&tc).unwrap();
        assert_eq!(st.pi[2], 0.0);
        assert!(st.warning.is_some());
        let _ = net;
    }

    #[test]
    fn leaking_class_is_an_error() {
        let tc = TruncatedChain::from_transitions(vec![vec![0], vec![1]], &[(0, 1, int(1))]);
        assert_eq!(stationary(&tc), Err(OracleError::NoRecurrentClassAtOrigin));
    }

    #[test]
    fn lattice_counts() {
        assert_eq!(lattice(2, 2).len(), 6);
        assert_eq!(lattice(3, 4).len(), lattice_size(3, 4).unwrap());
        assert_eq!(lattice(1, 0), vec![vec![0]]);
    }
}

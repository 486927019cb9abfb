//! Controlled branching networks: data model, semantic validation, and the
//! two structural transforms (scheduler-induced mixing, uniformization).
//!
//! Queues are 0-based in code; every user-facing label (messages, JSON map
//! keys) is 1-based.

mod schema;
mod validate;

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use crate::error::NetworkError;
use crate::scalar::{format_ratio, Ratio};
use num_traits::{One, Zero};

pub use schema::{parse_network, parse_scheduler, NetworkFile, ParseError, ParsedNetwork};
pub use validate::{validate, validate_with, ValidationReport, Violation, ViolationKind};

/// One possible outcome of a firing: how many new jobs each queue receives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProductionEntry {
    pub offspring: Vec<u32>,
    pub prob: Ratio,
}

impl ProductionEntry {
    pub fn new(offspring: Vec<u32>, prob: Ratio) -> Self {
        Self { offspring, prob }
    }

    pub fn total(&self) -> u64 {
        self.offspring.iter().map(|&c| u64::from(c)).sum()
    }
}

/// A finite distribution over offspring vectors.
///
/// This is plain data; invariants (distinct keys, probabilities summing to
/// one, offspring bounded by K) are checked by [`validate`].
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Production {
    pub entries: Vec<ProductionEntry>,
}

impl Production {
    pub fn new(entries: Vec<ProductionEntry>) -> Self {
        Self { entries }
    }

    /// Deterministic production of `offspring`.
    pub fn point(offspring: Vec<u32>) -> Self {
        Self::new(vec![ProductionEntry::new(offspring, Ratio::one())])
    }

    /// Production that never creates a job, written `ε` in the literature.
    pub fn empty(n: usize) -> Self {
        Self::point(vec![0; n])
    }

    pub fn total_prob(&self) -> Ratio {
        self.entries.iter().map(|e| e.prob.clone()).sum()
    }

    /// Expected number of new jobs per queue.
    pub fn mean_offspring(&self, n: usize) -> Vec<Ratio> {
        let mut mean = vec![Ratio::zero(); n];
        for entry in &self.entries {
            for (slot, &count) in mean.iter_mut().zip(&entry.offspring) {
                if count > 0 {
                    *slot += &entry.prob * Ratio::from_integer(count.into());
                }
            }
        }
        mean
    }

    pub fn max_total(&self) -> u64 {
        self.entries
            .iter()
            .map(ProductionEntry::total)
            .max()
            .unwrap_or(0)
    }

    /// `Σ weight · production`, with duplicate offspring vectors merged and
    /// entries ordered by offspring vector.
    pub fn mixture<'a>(parts: impl IntoIterator<Item = (Ratio, &'a Production)>) -> Production {
        let mut merged: BTreeMap<Vec<u32>, Ratio> = BTreeMap::new();
        for (weight, production) in parts {
            if weight.is_zero() {
                continue;
            }
            for entry in &production.entries {
                *merged
                    .entry(entry.offspring.clone())
                    .or_insert_with(Ratio::zero) += &weight * &entry.prob;
            }
        }
        Production::new(
            merged
                .into_iter()
                .filter(|(_, p)| !p.is_zero())
                .map(|(offspring, prob)| ProductionEntry { offspring, prob })
                .collect(),
        )
    }

    /// Same distribution with entries sorted by offspring vector.
    pub fn normalized(&self) -> Production {
        Production::mixture([(Ratio::one(), self)])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Action {
    pub id: String,
    pub production: Production,
}

impl Action {
    pub fn new(id: impl Into<String>, production: Production) -> Self {
        Self {
            id: id.into(),
            production,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Queue {
    pub rate: Ratio,
    pub actions: Vec<Action>,
}

impl Queue {
    pub fn new(rate: Ratio, actions: Vec<Action>) -> Self {
        Self { rate, actions }
    }

    pub fn action_index(&self, id: &str) -> Option<usize> {
        self.actions.iter().position(|a| a.id == id)
    }

    /// Action indices ordered by id; this is the canonical LP column order.
    pub fn actions_by_id(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.actions.len()).collect();
        order.sort_by(|&a, &b| self.actions[a].id.cmp(&self.actions[b].id).then(a.cmp(&b)));
        order
    }
}

/// A controlled branching network with `n` queues and branching factor `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Network {
    pub n: usize,
    pub branching: u32,
    pub arrival_rate: Ratio,
    pub arrival: Production,
    pub queues: Vec<Queue>,
}

impl Network {
    pub fn rates(&self) -> Vec<Ratio> {
        self.queues.iter().map(|q| q.rate.clone()).collect()
    }

    pub fn is_pure(&self) -> bool {
        self.queues.iter().all(|q| q.actions.len() == 1)
    }

    pub fn action_count(&self) -> usize {
        self.queues.iter().map(|q| q.actions.len()).sum()
    }

    /// Expected external arrivals per queue and time unit.
    pub fn alpha(&self) -> Vec<Ratio> {
        self.arrival
            .mean_offspring(self.n)
            .into_iter()
            .map(|m| m * &self.arrival_rate)
            .collect()
    }

    /// Queues reachable from the arrival stream when every action of every
    /// queue may fire.
    pub fn reachable_queues(&self) -> BTreeSet<usize> {
        let mut edges = vec![BTreeSet::new(); self.n];
        for (i, queue) in self.queues.iter().enumerate() {
            for action in &queue.actions {
                for (j, m) in action.production.mean_offspring(self.n).iter().enumerate() {
                    if !m.is_zero() {
                        edges[i].insert(j);
                    }
                }
            }
        }
        let sources = self
            .alpha()
            .iter()
            .enumerate()
            .filter(|(_, a)| !a.is_zero())
            .map(|(i, _)| i)
            .collect::<Vec<_>>();
        graph_closure(&sources, &edges)
    }

    /// Every combination of one action per queue, in odometer order.
    pub fn deterministic_choices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![vec![]];
        for queue in &self.queues {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    (0..queue.actions.len()).map(move |a| {
                        let mut next = prefix.clone();
                        next.push(a);
                        next
                    })
                })
                .collect();
        }
        out
    }

    /// Multiplies every rate (arrival and service) by `factor`.
    pub fn scale_rates(&self, factor: &Ratio) -> Network {
        let mut out = self.clone();
        out.arrival_rate *= factor;
        for q in &mut out.queues {
            q.rate *= factor;
        }
        out
    }
}

fn graph_closure(sources: &[usize], edges: &[BTreeSet<usize>]) -> BTreeSet<usize> {
    let mut seen: BTreeSet<usize> = sources.iter().copied().collect();
    let mut frontier: VecDeque<usize> = sources.iter().copied().collect();
    while let Some(i) = frontier.pop_front() {
        for &j in &edges[i] {
            if seen.insert(j) {
                frontier.push_back(j);
            }
        }
    }
    seen
}

/// A network in which every queue has exactly one action.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PureNetwork(Network);

impl PureNetwork {
    pub fn new(net: Network) -> Result<Self, NetworkError> {
        if let Some((queue, q)) = net
            .queues
            .iter()
            .enumerate()
            .find(|(_, q)| q.actions.len() != 1)
        {
            return Err(NetworkError::NotPure {
                queue,
                count: q.actions.len(),
            });
        }
        Ok(Self(net))
    }

    /// Builds a pure network from one production per queue; action ids are `"0"`.
    pub fn from_parts(
        branching: u32,
        arrival_rate: Ratio,
        arrival: Production,
        queues: Vec<(Ratio, Production)>,
    ) -> Self {
        let n = queues.len();
        Self(Network {
            n,
            branching,
            arrival_rate,
            arrival,
            queues: queues
                .into_iter()
                .map(|(rate, p)| Queue::new(rate, vec![Action::new("0", p)]))
                .collect(),
        })
    }

    pub fn network(&self) -> &Network {
        &self.0
    }

    pub fn into_network(self) -> Network {
        self.0
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn production(&self, queue: usize) -> &Production {
        &self.0.queues[queue].actions[0].production
    }

    /// Sub-network on `keep` (sorted, ascending); offspring for dropped queues
    /// are discarded.
    ///
    /// If `keep` is closed under production (as the reachable set is), the
    /// restricted chain from the empty state has exactly the original dynamics.
    pub fn restrict(&self, keep: &[usize]) -> PureNetwork {
        let project = |p: &Production| {
            Production::mixture([(
                Ratio::one(),
                &Production::new(
                    p.entries
                        .iter()
                        .map(|e| {
                            ProductionEntry::new(
                                keep.iter().map(|&k| e.offspring[k]).collect(),
                                e.prob.clone(),
                            )
                        })
                        .collect(),
                ),
            )])
        };
        PureNetwork::from_parts(
            self.0.branching,
            self.0.arrival_rate.clone(),
            project(&self.0.arrival),
            keep.iter()
                .map(|&k| (self.0.queues[k].rate.clone(), project(self.production(k))))
                .collect(),
        )
    }
}

impl TryFrom<Network> for PureNetwork {
    type Error = NetworkError;
    fn try_from(net: Network) -> Result<Self, Self::Error> {
        PureNetwork::new(net)
    }
}

/// Queues reachable from the support of `α` along `{(i, j) : A_ij > 0}`.
pub fn reachable_queues(net: &PureNetwork) -> BTreeSet<usize> {
    net.network().reachable_queues()
}

/// A state-independent distribution over each queue's actions, keyed by id.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StaticScheduler {
    pub queues: Vec<BTreeMap<String, Ratio>>,
}

impl StaticScheduler {
    pub fn new(queues: Vec<BTreeMap<String, Ratio>>) -> Self {
        Self { queues }
    }

    /// Point mass on `choices[i]` (an action index) at each queue `i`.
    pub fn deterministic(net: &Network, choices: &[usize]) -> Self {
        Self::new(
            net.queues
                .iter()
                .zip(choices)
                .map(|(q, &c)| BTreeMap::from([(q.actions[c].id.clone(), Ratio::one())]))
                .collect(),
        )
    }

    pub fn probability(&self, queue: usize, id: &str) -> Ratio {
        self.queues
            .get(queue)
            .and_then(|d| d.get(id))
            .cloned()
            .unwrap_or_else(Ratio::zero)
    }

    /// Probabilities aligned with the network's action order.
    pub fn aligned(&self, net: &Network) -> Result<Vec<Vec<Ratio>>, NetworkError> {
        self.check(net)?;
        Ok(net
            .queues
            .iter()
            .enumerate()
            .map(|(i, q)| {
                q.actions
                    .iter()
                    .map(|a| self.probability(i, &a.id))
                    .collect()
            })
            .collect())
    }

    /// Pointwise `w · self + (1 - w) · other`.
    pub fn blend(&self, other: &StaticScheduler, w: &Ratio) -> StaticScheduler {
        let rest = Ratio::one() - w;
        StaticScheduler::new(
            self.queues
                .iter()
                .zip(&other.queues)
                .map(|(a, b)| {
                    let keys: BTreeSet<&String> = a.keys().chain(b.keys()).collect();
                    keys.into_iter()
                        .map(|k| {
                            let pa = a.get(k).cloned().unwrap_or_else(Ratio::zero);
                            let pb = b.get(k).cloned().unwrap_or_else(Ratio::zero);
                            (k.clone(), w * pa + &rest * pb)
                        })
                        .collect()
                })
                .collect(),
        )
    }

    pub fn check(&self, net: &Network) -> Result<(), NetworkError> {
        if self.queues.len() != net.n {
            return Err(NetworkError::SchedulerArity {
                expected: net.n,
                got: self.queues.len(),
            });
        }
        for (i, (dist, queue)) in self.queues.iter().zip(&net.queues).enumerate() {
            if let Some(id) = dist.keys().find(|id| queue.action_index(id).is_none()) {
                return Err(NetworkError::UnknownAction {
                    queue: i,
                    id: id.clone(),
                });
            }
            if dist.values().any(|p| *p < Ratio::zero()) {
                return Err(NetworkError::BadDistribution {
                    queue: i,
                    reason: "negative probability".into(),
                });
            }
            let total: Ratio = dist.values().cloned().sum();
            if !total.is_one() {
                return Err(NetworkError::BadDistribution {
                    queue: i,
                    reason: format!("probabilities sum to {}", format_ratio(&total)),
                });
            }
        }
        Ok(())
    }

    /// `{"1": {"a": "1/2", ...}, ...}` with 1-based queue labels.
    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<String, BTreeMap<String, String>> = self
            .queues
            .iter()
            .enumerate()
            .map(|(i, d)| {
                (
                    (i + 1).to_string(),
                    d.iter()
                        .map(|(k, v)| (k.clone(), format_ratio(v)))
                        .collect(),
                )
            })
            .collect();
        serde_json::to_value(map).expect("string map serializes")
    }
}

/// Fixes `sched` to obtain the purely stochastic network whose queue `i`
/// produces `Σ_ξ P_ξ · Prob_i(ξ)`.
pub fn induce_pure_network(
    net: &Network,
    sched: &StaticScheduler,
) -> Result<PureNetwork, NetworkError> {
    let weights = sched.aligned(net)?;
    let queues = net
        .queues
        .iter()
        .zip(weights)
        .map(|(queue, w)| {
            let production = Production::mixture(
                w.into_iter()
                    .zip(&queue.actions)
                    .map(|(p, a)| (p, &a.production)),
            );
            (queue.rate.clone(), production)
        })
        .collect();
    Ok(PureNetwork::from_parts(
        net.branching,
        net.arrival_rate.clone(),
        net.arrival.clone(),
        queues,
    ))
}

/// An action that carries its own service rate.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatedAction {
    pub id: String,
    pub rate: Ratio,
    pub production: Production,
}

/// Network variant with per-action rates, before uniformization.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RatedNetwork {
    pub n: usize,
    pub branching: u32,
    pub arrival_rate: Ratio,
    pub arrival: Production,
    pub queues: Vec<Vec<RatedAction>>,
}

/// Equalizes action rates per queue by padding slower actions with
/// self-loops (`e^(i)`, i.e. the job is re-enqueued).
///
/// Queue `i` gets rate `μ_i = max_ξ μ_ξ`; an action with `μ_ξ < μ_i` fires
/// its own production with probability `μ_ξ / μ_i` and self-loops otherwise.
/// A self-loop carries one job, so with `K = 0` the declared branching factor
/// is too small: this is rejected unless `allow_raise_k` is set.
pub fn uniformize(net: &RatedNetwork, allow_raise_k: bool) -> Result<Network, NetworkError> {
    let mut branching = net.branching;
    let mut queues = Vec::with_capacity(net.queues.len());
    for (i, actions) in net.queues.iter().enumerate() {
        let Some(rate) = actions.iter().map(|a| a.rate.clone()).max() else {
            return Err(NetworkError::Invalid(format!(
                "queue {} has no actions",
                i + 1
            )));
        };
        if rate <= Ratio::zero() {
            return Err(NetworkError::Invalid(format!(
                "queue {} has a non-positive action rate",
                i + 1
            )));
        }
        let mut out = Vec::with_capacity(actions.len());
        for action in actions {
            if action.rate == rate {
                out.push(Action::new(action.id.clone(), action.production.clone()));
                continue;
            }
            if branching < 1 {
                if !allow_raise_k {
                    return Err(NetworkError::BranchingOverflow {
                        queue: i,
                        declared: branching,
                        needed: 1,
                    });
                }
                branching = 1;
            }
            let fire = &action.rate / &rate;
            let stay = Ratio::one() - &fire;
            let mut self_loop = vec![0; net.n];
            self_loop[i] = 1;
            let loop_production = Production::point(self_loop);
            out.push(Action::new(
                action.id.clone(),
                Production::mixture([(fire, &action.production), (stay, &loop_production)]),
            ));
        }
        queues.push(Queue::new(rate, out));
    }
    Ok(Network {
        n: net.n,
        branching,
        arrival_rate: net.arrival_rate.clone(),
        arrival: net.arrival.clone(),
        queues,
    })
}

/// The per-action rate network whose actions all share their queue's rate.
pub fn rated_from_network(net: &Network) -> RatedNetwork {
    RatedNetwork {
        n: net.n,
        branching: net.branching,
        arrival_rate: net.arrival_rate.clone(),
        arrival: net.arrival.clone(),
        queues: net
            .queues
            .iter()
            .map(|q| {
                q.actions
                    .iter()
                    .map(|a| RatedAction {
                        id: a.id.clone(),
                        rate: q.rate.clone(),
                        production: a.production.clone(),
                    })
                    .collect()
            })
            .collect(),
    }
}

#[cfg(test)]
mod tests;

//! Event-driven simulation of the controlled network's continuous-time chain
//! with regeneration-cycle statistics.
//!
//! Each epoch samples one exponential sojourn with the total rate
//! `μ0 + Σ_{x_i > 0} μ_i` and then the race winner proportionally to rates;
//! by memorylessness this is the same law as resampling every clock.
//! Every event consumes exactly four uniforms (sojourn, winner, action,
//! outcome) so streams stay aligned whatever the policy does.
//!
//! Randomness: ChaCha8 seeded with `seed` through `seed_from_u64`; replica `r`
//! uses stream `r` of that key. Exponentials use `-ln(1 - u) / rate`.

mod policy;
mod stats;

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::io::{self, Write};
use std::path::Path;

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{NetworkError, SimError};
use crate::network::{Network, StaticScheduler};
use crate::scalar::{ratio_to_f64, Ratio};

use policy::{cumulative, pick, BoundPolicy};
pub use policy::{History, MemorylessFn, PathFn, SchedulerPolicy};
pub use stats::{batch_means, chi_square, fit_geometric, ChiSquareTest, Estimate, GeometricFit};

/// States whose time fraction falls below this are dropped from reports.
pub const OCCUPANCY_FLOOR: f64 = 1e-12;
/// Histogram cells below this fraction are left out of the tail fit.
pub const TAIL_FLOOR: f64 = 1e-6;
/// Distinct states tracked per replica; time spent in further states is
/// counted as overflow.
pub const MAX_TRACKED_STATES: usize = 1 << 20;

#[derive(Debug, Clone, PartialEq)]
pub struct SimState {
    pub queues: Vec<u64>,
    pub clock: f64,
}

impl SimState {
    pub fn empty(n: usize) -> Self {
        Self {
            queues: vec![0; n],
            clock: 0.0,
        }
    }

    pub fn total(&self) -> u64 {
        self.queues.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Winner {
    Arrival,
    Queue(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    /// Time of the jump.
    pub time: f64,
    pub sojourn: f64,
    pub winner: Winner,
    /// Action index at the winning queue.
    pub action: Option<usize>,
    /// Index of the drawn production entry.
    pub outcome: usize,
}

struct Sampler {
    cum: Vec<f64>,
    offspring: Vec<Vec<u32>>,
}

impl Sampler {
    fn new(production: &crate::network::Production) -> Self {
        Self {
            cum: cumulative(production.entries.iter().map(|e| ratio_to_f64(&e.prob))),
            offspring: production
                .entries
                .iter()
                .map(|e| e.offspring.clone())
                .collect(),
        }
    }

    fn mean(&self, n: usize) -> Vec<f64> {
        let mut m = vec![0.0; n];
        let mut prev = 0.0;
        for (c, o) in self.cum.iter().zip(&self.offspring) {
            let p = c - prev;
            prev = *c;
            for (slot, &k) in m.iter_mut().zip(o) {
                *slot += p * f64::from(k);
            }
        }
        m
    }
}

/// Float view of a network prepared for sampling.
pub struct SimNetwork {
    pub net: Network,
    mu0: f64,
    mu: Vec<f64>,
    arrival: Sampler,
    actions: Vec<Vec<Sampler>>,
    /// LP column order: `(queue, action index)` by queue, then action id.
    columns: Vec<(usize, usize)>,
    column_of: Vec<Vec<usize>>,
}

impl SimNetwork {
    pub fn new(net: &Network) -> Self {
        let mut columns = Vec::new();
        let mut column_of: Vec<Vec<usize>> = net
            .queues
            .iter()
            .map(|q| vec![0; q.actions.len()])
            .collect();
        for (i, q) in net.queues.iter().enumerate() {
            for a in q.actions_by_id() {
                column_of[i][a] = columns.len();
                columns.push((i, a));
            }
        }
        Self {
            net: net.clone(),
            mu0: ratio_to_f64(&net.arrival_rate),
            mu: net.queues.iter().map(|q| ratio_to_f64(&q.rate)).collect(),
            arrival: Sampler::new(&net.arrival),
            actions: net
                .queues
                .iter()
                .map(|q| {
                    q.actions
                        .iter()
                        .map(|a| Sampler::new(&a.production))
                        .collect()
                })
                .collect(),
            columns,
            column_of,
        }
    }

    pub fn n(&self) -> usize {
        self.net.n
    }

    /// `"queue:id"` labels in column order.
    pub fn column_labels(&self) -> Vec<String> {
        self.columns
            .iter()
            .map(|&(i, a)| format!("{}:{}", i + 1, self.net.queues[i].actions[a].id))
            .collect()
    }
}

/// One network plus one bound policy; steps a state forward.
pub struct Simulator<'p> {
    net: SimNetwork,
    policy: BoundPolicy<'p>,
    history: VecDeque<EventRecord>,
    /// `None`: no history kept; `Some(None)`: unbounded; `Some(Some(w))`: last `w`.
    window: Option<Option<usize>>,
}

impl<'p> Simulator<'p> {
    pub fn new(net: &Network, policy: &'p SchedulerPolicy) -> Result<Self, NetworkError> {
        Ok(Self {
            net: SimNetwork::new(net),
            policy: BoundPolicy::bind(policy, net)?,
            history: VecDeque::new(),
            window: policy.history_window(),
        })
    }

    pub fn network(&self) -> &SimNetwork {
        &self.net
    }

    pub fn total_rate(&self, state: &SimState) -> f64 {
        self.net.mu0
            + state
                .queues
                .iter()
                .zip(&self.net.mu)
                .filter(|(x, _)| **x > 0)
                .map(|(_, m)| m)
                .sum::<f64>()
    }

    /// Advances `state` by one jump.
    pub fn step<R: Rng>(&mut self, state: &mut SimState, rng: &mut R) -> EventRecord {
        let record = self.draw(state, rng);
        self.apply(state, &record);
        record
    }

    fn draw<R: Rng>(&self, state: &SimState, rng: &mut R) -> EventRecord {
        let u: [f64; 4] = [rng.random(), rng.random(), rng.random(), rng.random()];
        let rate = self.total_rate(state);
        let sojourn = -(1.0 - u[0]).ln() / rate;
        let mut target = u[1] * rate;
        let mut winner = Winner::Arrival;
        if target >= self.net.mu0 {
            target -= self.net.mu0;
            let busy: Vec<usize> = (0..self.net.n()).filter(|&i| state.queues[i] > 0).collect();
            let mut chosen = *busy.last().expect("rate beyond μ0 implies a busy queue");
            for &i in &busy {
                if target < self.net.mu[i] {
                    chosen = i;
                    break;
                }
                target -= self.net.mu[i];
            }
            winner = Winner::Queue(chosen);
        }
        let (action, outcome) = match winner {
            Winner::Arrival => (None, pick(&self.net.arrival.cum, u[3])),
            Winner::Queue(i) => {
                let a = if self.net.actions[i].len() == 1 {
                    0
                } else {
                    self.policy.choose(i, u[2], &state.queues, &self.history)
                };
                (Some(a), pick(&self.net.actions[i][a].cum, u[3]))
            }
        };
        EventRecord {
            time: state.clock + sojourn,
            sojourn,
            winner,
            action,
            outcome,
        }
    }

    fn apply(&mut self, state: &mut SimState, record: &EventRecord) {
        let offspring = match record.winner {
            Winner::Arrival => &self.net.arrival.offspring[record.outcome],
            Winner::Queue(i) => {
                state.queues[i] -= 1;
                &self.net.actions[i][record.action.expect("queue events carry an action")].offspring
                    [record.outcome]
            }
        };
        for (x, &k) in state.queues.iter_mut().zip(offspring) {
            *x += u64::from(k);
        }
        state.clock = record.time;
        if let Some(window) = self.window {
            self.history.push_back(record.clone());
            if let Some(w) = window {
                while self.history.len() > w {
                    self.history.pop_front();
                }
            }
        }
    }
}

/// Exact jump rates `q(x, σ, y)` out of `x` under a static scheduler, merged
/// by target state. Self-loops (`y = x`) are included.
pub fn jump_rates(
    net: &Network,
    sched: &StaticScheduler,
    x: &[u64],
) -> Result<BTreeMap<Vec<u64>, Ratio>, NetworkError> {
    let weights = sched.aligned(net)?;
    let mut out: BTreeMap<Vec<u64>, Ratio> = BTreeMap::new();
    let mut add = |base: &[u64], offspring: &[u32], rate: Ratio| {
        let y: Vec<u64> = base
            .iter()
            .zip(offspring)
            .map(|(b, &k)| b + u64::from(k))
            .collect();
        *out.entry(y).or_insert_with(Ratio::zero) += rate;
    };
    for e in &net.arrival.entries {
        add(x, &e.offspring, &net.arrival_rate * &e.prob);
    }
    for (i, queue) in net.queues.iter().enumerate() {
        if x[i] == 0 {
            continue;
        }
        let mut base = x.to_vec();
        base[i] -= 1;
        for (action, p) in queue.actions.iter().zip(&weights[i]) {
            if p.is_zero() {
                continue;
            }
            for e in &action.production.entries {
                add(&base, &e.offspring, &queue.rate * p * &e.prob);
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub seed: u64,
    /// Regeneration cycles in total, split evenly over replicas.
    pub cycles: u64,
    /// Simulated time allowed per replica.
    pub time_budget: f64,
    pub replicas: usize,
    pub batches: usize,
    /// Trace length before it is thinned by half.
    pub trace_points: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            cycles: 10_000,
            time_budget: 1e7,
            replicas: 1,
            batches: 30,
            trace_points: 2048,
        }
    }
}

#[derive(Debug, Clone, Default)]
struct CycleSums {
    cycles: u64,
    time: f64,
    busy: Vec<f64>,
    fired: Vec<f64>,
    arrivals: f64,
}

impl CycleSums {
    fn new(n: usize, columns: usize) -> Self {
        Self {
            cycles: 0,
            time: 0.0,
            busy: vec![0.0; n],
            fired: vec![0.0; columns],
            arrivals: 0.0,
        }
    }

    fn add(&mut self, other: &CycleSums) {
        self.cycles += other.cycles;
        self.time += other.time;
        self.arrivals += other.arrivals;
        for (a, b) in self.busy.iter_mut().zip(&other.busy) {
            *a += b;
        }
        for (a, b) in self.fired.iter_mut().zip(&other.fired) {
            *a += b;
        }
    }
}

struct ReplicaOutcome {
    batches: BTreeMap<usize, CycleSums>,
    occupancy: HashMap<Vec<u64>, f64>,
    overflow: f64,
    histogram: Vec<f64>,
    events: u64,
    trace: Vec<(f64, u64)>,
}

struct Trace {
    points: Vec<(f64, u64)>,
    interval: f64,
    next: f64,
    cap: usize,
}

impl Trace {
    fn new(interval: f64, cap: usize) -> Self {
        Self {
            points: Vec::new(),
            interval,
            next: 0.0,
            cap: cap.max(2) & !1,
        }
    }

    /// Records `total` at every sample time before `until`.
    fn fill(&mut self, until: f64, total: u64) {
        while self.next < until {
            self.points.push((self.next, total));
            self.next += self.interval;
            if self.points.len() == self.cap {
                let kept: Vec<_> = self.points.iter().copied().step_by(2).collect();
                self.points = kept;
                self.interval *= 2.0;
            }
        }
    }
}

fn run_replica(
    net: &Network,
    policy: &SchedulerPolicy,
    cfg: &SimConfig,
    replica: usize,
    first: u64,
    count: u64,
) -> Result<ReplicaOutcome, SimError> {
    let mut sim = Simulator::new(net, policy)?;
    let n = net.n;
    let columns = sim.net.columns.len();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(replica as u64);
    let mut state = SimState::empty(n);
    let mut out = ReplicaOutcome {
        batches: BTreeMap::new(),
        occupancy: HashMap::new(),
        overflow: 0.0,
        histogram: Vec::new(),
        events: 0,
        trace: Vec::new(),
    };
    let mut trace = Trace::new(1.0 / sim.net.mu0, cfg.trace_points);
    let mut current = CycleSums::new(n, columns);
    let mut done = 0u64;
    while done < count {
        let record = sim.draw(&state, &mut rng);
        let total = state.total();
        if record.time > cfg.time_budget {
            trace.fill(cfg.time_budget, total);
            return Err(SimError::BudgetExceededBeforeFirstReturn {
                time_budget: cfg.time_budget,
                completed_cycles: done,
                final_total: total,
                trace: trace.points,
            });
        }
        trace.fill(record.time, total);
        let dt = record.sojourn;
        current.time += dt;
        for (b, &x) in current.busy.iter_mut().zip(&state.queues) {
            if x > 0 {
                *b += dt;
            }
        }
        if let Some(t) = out.occupancy.get_mut(&state.queues) {
            *t += dt;
        } else if out.occupancy.len() < MAX_TRACKED_STATES {
            out.occupancy.insert(state.queues.clone(), dt);
        } else {
            out.overflow += dt;
        }
        let k = total as usize;
        if out.histogram.len() <= k {
            out.histogram.resize(k + 1, 0.0);
        }
        out.histogram[k] += dt;
        match record.winner {
            Winner::Arrival => current.arrivals += 1.0,
            Winner::Queue(i) => {
                current.fired[sim.net.column_of[i][record.action.expect("queue event")]] += 1.0
            }
        }
        sim.apply(&mut state, &record);
        out.events += 1;
        if state.total() == 0 {
            current.cycles = 1;
            let global = first + done;
            let batch = batch_index(global, cfg);
            out.batches
                .entry(batch)
                .or_insert_with(|| CycleSums::new(n, columns))
                .add(&current);
            current = CycleSums::new(n, columns);
            done += 1;
        }
    }
    out.trace = trace.points;
    Ok(out)
}

fn batch_count(cfg: &SimConfig) -> usize {
    (cfg.batches.max(1) as u64).min(cfg.cycles.max(1)) as usize
}

fn batch_index(global: u64, cfg: &SimConfig) -> usize {
    (u128::from(global) * batch_count(cfg) as u128 / u128::from(cfg.cycles.max(1))) as usize
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledEstimate {
    pub label: String,
    #[serde(flatten)]
    pub estimate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OccupancyEntry {
    pub state: Vec<u64>,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TailStats {
    /// Fraction of time with total queue size `k`, indexed by `k`.
    pub histogram: Vec<f64>,
    /// Fit of `ln h_k` over `k ≥ 1` with `h_k ≥ TAIL_FLOOR`.
    pub fit: Option<GeometricFit>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimReport {
    pub seed: u64,
    pub replicas: usize,
    pub cycles: u64,
    pub events: u64,
    pub total_time: f64,
    pub batches: usize,
    pub mean_return_time: Estimate,
    pub arrival_freq: Estimate,
    /// `O_ξ` per action, labeled `"queue:id"`, in LP column order.
    pub firing_freq: Vec<LabeledEstimate>,
    /// Fraction of time each queue is nonempty.
    pub utilization: Vec<Estimate>,
    /// `Σ_{ξ∈Σ_j} O_ξ - O_0 a_0j - Σ_ζ O_ζ A_ζj` per queue; zero in the limit.
    pub flow_balance: Vec<Estimate>,
    /// `ρ_i - Σ_{ξ∈Σ_i} O_ξ / μ_i` per queue; zero in the limit.
    pub utilization_identity: Vec<Estimate>,
    pub occupancy: Vec<OccupancyEntry>,
    /// Time fraction spent in states beyond the tracking limit.
    pub occupancy_overflow: f64,
    pub tail: TailStats,
    /// `(time, ‖x‖)` samples of replica 0.
    #[serde(skip)]
    pub trace: Vec<(f64, u64)>,
}

impl SimReport {
    pub fn firing(&self, label: &str) -> Option<&Estimate> {
        self.firing_freq
            .iter()
            .find(|e| e.label == label)
            .map(|e| &e.estimate)
    }

    pub fn occupancy_of(&self, state: &[u64]) -> f64 {
        self.occupancy
            .iter()
            .find(|e| e.state == state)
            .map_or(0.0, |e| e.fraction)
    }

    /// Time fraction of states satisfying `pred`.
    pub fn occupancy_where(&self, pred: impl Fn(&[u64]) -> bool) -> f64 {
        self.occupancy
            .iter()
            .filter(|e| pred(&e.state))
            .map(|e| e.fraction)
            .sum()
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Simulates `cfg.cycles` regeneration cycles from the empty state.
///
/// Fails with `BudgetExceededBeforeFirstReturn` when a replica's time budget
/// runs out while it is still waiting for the return to 0 of the cycle in
/// progress; the error carries that replica's `‖x‖` trace.
pub fn run_cycles(
    net: &Network,
    policy: &SchedulerPolicy,
    cfg: &SimConfig,
) -> Result<SimReport, SimError> {
    let replicas = cfg.replicas.max(1);
    let share = |r: usize| {
        cfg.cycles / replicas as u64 + u64::from((r as u64) < cfg.cycles % replicas as u64)
    };
    let mut firsts = Vec::with_capacity(replicas);
    let mut acc = 0;
    for r in 0..replicas {
        firsts.push(acc);
        acc += share(r);
    }
    let outcomes: Vec<Result<ReplicaOutcome, SimError>> = if replicas == 1 {
        vec![run_replica(net, policy, cfg, 0, 0, cfg.cycles)]
    } else {
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..replicas)
                .map(|r| {
                    let first = firsts[r];
                    let count = share(r);
                    scope.spawn(move || run_replica(net, policy, cfg, r, first, count))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("replica panicked"))
                .collect()
        })
    };
    let mut merged = Vec::with_capacity(replicas);
    for outcome in outcomes {
        merged.push(outcome?);
    }
    Ok(build_report(net, cfg, replicas, merged))
}

fn build_report(
    net: &Network,
    cfg: &SimConfig,
    replicas: usize,
    outcomes: Vec<ReplicaOutcome>,
) -> SimReport {
    let sn = SimNetwork::new(net);
    let n = net.n;
    let columns = sn.columns.len();
    let mut batches: BTreeMap<usize, CycleSums> = BTreeMap::new();
    let mut occupancy: BTreeMap<Vec<u64>, f64> = BTreeMap::new();
    let mut histogram: Vec<f64> = Vec::new();
    let mut overflow = 0.0;
    let mut events = 0;
    for outcome in &outcomes {
        for (b, sums) in &outcome.batches {
            batches
                .entry(*b)
                .or_insert_with(|| CycleSums::new(n, columns))
                .add(sums);
        }
        // One addition per state and replica, in replica order.
        for (s, t) in &outcome.occupancy {
            *occupancy.entry(s.clone()).or_insert(0.0) += t;
        }
        if histogram.len() < outcome.histogram.len() {
            histogram.resize(outcome.histogram.len(), 0.0);
        }
        for (h, t) in histogram.iter_mut().zip(&outcome.histogram) {
            *h += t;
        }
        overflow += outcome.overflow;
        events += outcome.events;
    }
    let mut total = CycleSums::new(n, columns);
    for sums in batches.values() {
        total.add(sums);
    }
    let time = total.time;
    let per_time = |s: &CycleSums, f: &dyn Fn(&CycleSums) -> f64| {
        if s.time > 0.0 {
            f(s) / s.time
        } else {
            0.0
        }
    };
    let estimate = |f: &dyn Fn(&CycleSums) -> f64| {
        let point = per_time(&total, f);
        let per_batch: Vec<f64> = batches.values().map(|b| per_time(b, f)).collect();
        batch_means(point, &per_batch)
    };

    let means: Vec<Vec<f64>> = sn
        .columns
        .iter()
        .map(|&(i, a)| sn.actions[i][a].mean(n))
        .collect();
    let arrival_mean = sn.arrival.mean(n);
    let firing_freq = sn
        .column_labels()
        .into_iter()
        .enumerate()
        .map(|(c, label)| LabeledEstimate {
            label,
            estimate: estimate(&|s| s.fired[c]),
        })
        .collect();
    let utilization = (0..n).map(|i| estimate(&|s| s.busy[i])).collect();
    let flow_balance = (0..n)
        .map(|j| {
            let sn = &sn;
            let means = &means;
            let arrival_mean = &arrival_mean;
            estimate(&move |s: &CycleSums| {
                let own: f64 = (0..columns)
                    .filter(|&c| sn.columns[c].0 == j)
                    .map(|c| s.fired[c])
                    .sum();
                let produced: f64 = (0..columns).map(|c| s.fired[c] * means[c][j]).sum();
                own - s.arrivals * arrival_mean[j] - produced
            })
        })
        .collect();
    let utilization_identity = (0..n)
        .map(|i| {
            let sn = &sn;
            estimate(&move |s: &CycleSums| {
                let fired: f64 = (0..columns)
                    .filter(|&c| sn.columns[c].0 == i)
                    .map(|c| s.fired[c])
                    .sum();
                s.busy[i] - fired / sn.mu[i]
            })
        })
        .collect();
    let cycle_means: Vec<f64> = batches
        .values()
        .map(|b| {
            if b.cycles > 0 {
                b.time / b.cycles as f64
            } else {
                0.0
            }
        })
        .collect();
    let mean_return_time = batch_means(
        if total.cycles > 0 {
            time / total.cycles as f64
        } else {
            0.0
        },
        &cycle_means,
    );
    let fraction = |t: f64| if time > 0.0 { t / time } else { 0.0 };
    let occupancy = occupancy
        .into_iter()
        .map(|(state, t)| OccupancyEntry {
            state,
            fraction: fraction(t),
        })
        .filter(|e| e.fraction >= OCCUPANCY_FLOOR)
        .collect();
    let histogram: Vec<f64> = histogram.into_iter().map(fraction).collect();
    let fit_points: Vec<(f64, f64)> = histogram
        .iter()
        .enumerate()
        .skip(1)
        .filter(|(_, h)| **h >= TAIL_FLOOR)
        .map(|(k, h)| (k as f64, *h))
        .collect();
    SimReport {
        seed: cfg.seed,
        replicas,
        cycles: total.cycles,
        events,
        total_time: time,
        batches: batches.len(),
        mean_return_time,
        arrival_freq: estimate(&|s| s.arrivals),
        firing_freq,
        utilization,
        flow_balance,
        utilization_identity,
        occupancy,
        occupancy_overflow: fraction(overflow),
        tail: TailStats {
            fit: fit_geometric(&fit_points),
            histogram,
        },
        trace: outcomes
            .into_iter()
            .next()
            .map(|o| o.trace)
            .unwrap_or_default(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    Finite(f64),
    Diverged,
}

/// `E[exp(δ‖x‖)]` from the time histogram, with the cells beyond the observed
/// range extrapolated from the geometric fit. Normalized so `δ = 0` gives 1;
/// `Diverged` when `δ` reaches the fitted decay rate or no fit exists.
pub fn estimate_exponential_moment(report: &SimReport, delta: f64) -> Moment {
    let Some(fit) = report.tail.fit else {
        return Moment::Diverged;
    };
    if fit.rate <= 0.0 || delta >= fit.rate {
        return Moment::Diverged;
    }
    let h = &report.tail.histogram;
    let last = h.len() as f64;
    let observed: f64 = h.iter().sum();
    let weighted: f64 = h
        .iter()
        .enumerate()
        .map(|(k, p)| (delta * k as f64).exp() * p)
        .sum();
    // Σ_{k ≥ last} exp(a - (rate - δ) k), and its δ = 0 counterpart.
    let tail =
        |d: f64| (fit.intercept - (fit.rate - d) * last).exp() / (1.0 - (d - fit.rate).exp());
    Moment::Finite((weighted + tail(delta)) / (observed + tail(0.0)))
}

/// Writes `trace.csv` (`time,total`), `occupancy.csv` (`x1..xn,fraction`) and
/// `tail.csv` (`total,fraction`) into `dir`.
pub fn write_csv(report: &SimReport, n: usize, dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut f = io::BufWriter::new(std::fs::File::create(dir.join("trace.csv"))?);
    writeln!(f, "time,total")?;
    for (t, x) in &report.trace {
        writeln!(f, "{t},{x}")?;
    }
    f.flush()?;
    let mut f = io::BufWriter::new(std::fs::File::create(dir.join("occupancy.csv"))?);
    let header: Vec<String> = (1..=n).map(|i| format!("x{i}")).collect();
    writeln!(f, "{},fraction", header.join(","))?;
    for e in &report.occupancy {
        let cells: Vec<String> = e.state.iter().map(u64::to_string).collect();
        writeln!(f, "{},{}", cells.join(","), e.fraction)?;
    }
    f.flush()?;
    let mut f = io::BufWriter::new(std::fs::File::create(dir.join("tail.csv"))?);
    writeln!(f, "total,fraction")?;
    for (k, h) in report.tail.histogram.iter().enumerate() {
        writeln!(f, "{k},{h}")?;
    }
    f.flush()
}

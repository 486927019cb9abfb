use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid rational {input:?}: {reason}")]
pub struct ParseRatioError {
    pub input: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetworkError {
    #[error("scheduler references unknown action {id:?} at queue {}", queue + 1)]
    UnknownAction { queue: usize, id: String },
    #[error("scheduler covers {got} queues, network has {expected}")]
    SchedulerArity { expected: usize, got: usize },
    #[error("scheduler distribution at queue {} is invalid: {reason}", queue + 1)]
    BadDistribution { queue: usize, reason: String },
    #[error("queue {} has {count} actions; a purely stochastic network needs exactly one", queue + 1)]
    NotPure { queue: usize, count: usize },
    #[error(
        "self-loop at queue {} needs branching factor {needed} but K = {declared}; allow raising K to accept",
        queue + 1
    )]
    BranchingOverflow {
        queue: usize,
        declared: u32,
        needed: u32,
    },
    #[error("network is invalid: {0}")]
    Invalid(String),
}

/// Why `(I - A)^{-1}` was rejected as a stand-in for the Neumann series.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Divergence {
    #[error("I - A is singular")]
    Singular,
    #[error("(I - A)^-1 has a negative entry at ({}, {})", row + 1, col + 1)]
    NegativeEntry { row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrafficError {
    #[error("traffic equations diverge: {0}")]
    Divergent(#[from] Divergence),
    #[error("queues {} are unreachable from the arrival stream", fmt_queues(.0))]
    Unreachable(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LpError {
    #[error("simplex exceeded its iteration cap of {limit}")]
    IterationCap { limit: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LyapunovError {
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("traffic solution is not deficient at queue {}: lambda = {lambda}, mu = {mu}", queue + 1)]
    NotDeficient {
        queue: usize,
        lambda: String,
        mu: String,
    },
    #[error(
        "drift certification failed on support {} for index {}: margin {margin} > -gamma {gamma}",
        fmt_queues(pattern), index + 1
    )]
    CertificationFailed {
        pattern: Vec<usize>,
        index: usize,
        margin: String,
        gamma: String,
    },
    #[error(transparent)]
    Lp(#[from] LpError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// The time budget ran out while the current excursion away from the
    /// empty state had not yet returned to it.
    #[error(
        "time budget {time_budget} exhausted before the open excursion returned to 0 \
         ({completed_cycles} cycles completed, final total queue size {final_total})"
    )]
    BudgetExceededBeforeFirstReturn {
        time_budget: f64,
        completed_cycles: u64,
        final_total: u64,
        /// Sampled `(time, total queue size)` pairs of the offending replica.
        trace: Vec<(f64, u64)>,
    },
    #[error(transparent)]
    Network(#[from] NetworkError),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("truncation bound {bound} is below the branching factor {branching}")]
    BoundBelowBranching { bound: u32, branching: u32 },
    #[error("empty state is not in a closed communicating class of the truncated chain")]
    NoRecurrentClassAtOrigin,
    #[error("truncated state space of {states} states exceeds the limit {limit}")]
    TooLarge { states: usize, limit: usize },
    #[error("power iteration did not reach tolerance within {iterations} iterations")]
    NotConverged { iterations: usize },
    #[error("no bound up to {max_bound} brings the shell mass below {target}")]
    ShellMassNotReached { max_bound: u32, target: f64 },
}

fn fmt_queues(queues: &[usize]) -> String {
    let labels: Vec<String> = queues.iter().map(|q| (q + 1).to_string()).collect();
    format!("{{{}}}", labels.join(", "))
}

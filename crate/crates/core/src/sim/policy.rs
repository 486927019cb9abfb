use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;

use crate::error::NetworkError;
use crate::network::{Network, StaticScheduler};
use crate::scalar::ratio_to_f64;

use super::EventRecord;

/// What a path-dependent policy sees: the retained event window and the
/// current state.
pub struct History<'a> {
    pub events: &'a VecDeque<EventRecord>,
    pub state: &'a [u64],
}

/// Weights over `net.queues[queue].actions`, given the current state.
pub type MemorylessFn = dyn Fn(&[u64], usize) -> Vec<f64> + Send + Sync;
/// Weights over `net.queues[queue].actions`, given the retained history.
pub type PathFn = dyn Fn(&History<'_>, usize) -> Vec<f64> + Send + Sync;

/// How the firing queue picks its action. The action is drawn when the queue
/// wins the race; only the winner's action affects the transition.
#[derive(Clone)]
pub enum SchedulerPolicy {
    Static(StaticScheduler),
    Memoryless(Arc<MemorylessFn>),
    /// `window: None` keeps the full history, so memory grows with the run.
    PathDependent {
        window: Option<usize>,
        decide: Arc<PathFn>,
    },
}

impl fmt::Debug for SchedulerPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SchedulerPolicy::Static(s) => f.debug_tuple("Static").field(s).finish(),
            SchedulerPolicy::Memoryless(_) => f.write_str("Memoryless(..)"),
            SchedulerPolicy::PathDependent { window, .. } => f
                .debug_struct("PathDependent")
                .field("window", window)
                .finish_non_exhaustive(),
        }
    }
}

impl SchedulerPolicy {
    /// Static point mass on the first action of every queue; the only choice
    /// for purely stochastic networks.
    pub fn first_actions(net: &Network) -> Self {
        SchedulerPolicy::Static(StaticScheduler::deterministic(net, &vec![0; net.n]))
    }

    pub(crate) fn history_window(&self) -> Option<Option<usize>> {
        match self {
            SchedulerPolicy::PathDependent { window, .. } => Some(*window),
            _ => None,
        }
    }
}

/// A policy bound to a network, with static distributions precomputed as
/// cumulative weights.
pub(crate) enum BoundPolicy<'a> {
    Static(Vec<Vec<f64>>),
    Memoryless(&'a MemorylessFn),
    PathDependent(&'a PathFn),
}

impl<'a> BoundPolicy<'a> {
    pub(crate) fn bind(policy: &'a SchedulerPolicy, net: &Network) -> Result<Self, NetworkError> {
        Ok(match policy {
            SchedulerPolicy::Static(s) => BoundPolicy::Static(
                s.aligned(net)?
                    .iter()
                    .map(|w| cumulative(w.iter().map(ratio_to_f64)))
                    .collect(),
            ),
            SchedulerPolicy::Memoryless(f) => BoundPolicy::Memoryless(f.as_ref()),
            SchedulerPolicy::PathDependent { decide, .. } => {
                BoundPolicy::PathDependent(decide.as_ref())
            }
        })
    }

    /// Action index for `queue` from a uniform draw `u ∈ [0, 1)`.
    pub(crate) fn choose(
        &self,
        queue: usize,
        u: f64,
        state: &[u64],
        events: &VecDeque<EventRecord>,
    ) -> usize {
        match self {
            BoundPolicy::Static(cum) => pick(&cum[queue], u),
            BoundPolicy::Memoryless(f) => pick(&cumulative(f(state, queue)), u),
            BoundPolicy::PathDependent(f) => {
                pick(&cumulative(f(&History { events, state }, queue)), u)
            }
        }
    }
}

pub(crate) fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w.max(0.0);
            acc
        })
        .collect()
}

/// Smallest index whose cumulative weight exceeds `u · total`; weights need
/// not be normalized. Zero-weight entries are never picked.
pub(crate) fn pick(cum: &[f64], u: f64) -> usize {
    let total = *cum.last().expect("non-empty distribution");
    let target = u * total;
    cum.iter()
        .position(|&c| target < c)
        .unwrap_or_else(|| cum.iter().rposition(|&c| c > 0.0).unwrap_or(0))
}

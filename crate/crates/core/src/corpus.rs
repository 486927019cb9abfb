//! Seeded generator of small random controlled networks.
//!
//! Every action is subcritical (expected total offspring below one), so any
//! mixture of actions yields an invertible `I - A`. Service rates are drawn
//! independently of the load, so a corpus contains both stabilizable and
//! overloaded networks.

use rand::Rng;

use crate::network::{validate, Action, Network, Production, Queue};
use crate::scalar::{ratio, Ratio};

#[derive(Debug, Clone)]
pub struct CorpusOptions {
    pub max_queues: usize,
    pub max_actions: usize,
    pub branching: u32,
    /// Upper bound on an action's expected total offspring, as `num/den`.
    pub max_mean_offspring: (i64, i64),
}

impl Default for CorpusOptions {
    fn default() -> Self {
        Self {
            max_queues: 3,
            max_actions: 3,
            branching: 2,
            max_mean_offspring: (9, 10),
        }
    }
}

fn random_ratio<R: Rng>(rng: &mut R, lo: i64, hi: i64, den: i64) -> Ratio {
    ratio(rng.random_range(lo..=hi), den)
}

fn random_offspring<R: Rng>(rng: &mut R, n: usize, branching: u32) -> Vec<u32> {
    let mut out = vec![0u32; n];
    let total = rng.random_range(1..=branching.max(1));
    for _ in 0..total {
        out[rng.random_range(0..n)] += 1;
    }
    out
}

/// Distribution with up to three non-empty outcomes plus the empty one.
fn random_production<R: Rng>(
    rng: &mut R,
    n: usize,
    opts: &CorpusOptions,
    with_empty: bool,
) -> Production {
    let limit = ratio(opts.max_mean_offspring.0, opts.max_mean_offspring.1);
    loop {
        let outcomes = rng.random_range(1..=3usize);
        let mut weights: Vec<(Vec<u32>, i64)> = (0..outcomes)
            .map(|_| {
                (
                    random_offspring(rng, n, opts.branching),
                    rng.random_range(1..=6),
                )
            })
            .collect();
        if with_empty {
            weights.push((vec![0; n], rng.random_range(1..=12)));
        }
        let total: i64 = weights.iter().map(|(_, w)| w).sum();
        let production = Production::mixture(
            weights
                .iter()
                .map(|(o, w)| (ratio(*w, total), Production::point(o.clone())))
                .collect::<Vec<_>>()
                .iter()
                .map(|(w, p)| (w.clone(), p)),
        );
        if !with_empty {
            return production;
        }
        let mean: Ratio = production.mean_offspring(n).into_iter().sum();
        if mean <= limit {
            return production;
        }
    }
}

/// Draws a valid network (every queue reachable) from `rng`.
pub fn random_network<R: Rng>(rng: &mut R, opts: &CorpusOptions) -> Network {
    loop {
        let n = rng.random_range(1..=opts.max_queues);
        let queues = (0..n)
            .map(|_| {
                let count = rng.random_range(1..=opts.max_actions);
                Queue::new(
                    random_ratio(rng, 1, 16, 4),
                    (0..count)
                        .map(|a| {
                            Action::new(
                                ((b'a' + a as u8) as char).to_string(),
                                random_production(rng, n, opts, true),
                            )
                        })
                        .collect(),
                )
            })
            .collect();
        let net = Network {
            n,
            branching: opts.branching,
            arrival_rate: random_ratio(rng, 1, 8, 4),
            arrival: random_production(rng, n, opts, false),
            queues,
        };
        if validate(&net).is_ok() {
            return net;
        }
    }
}

/// Draws a valid purely stochastic network.
pub fn random_pure_network<R: Rng>(rng: &mut R, opts: &CorpusOptions) -> Network {
    let single = CorpusOptions {
        max_actions: 1,
        ..opts.clone()
    };
    random_network(rng, &single)
}

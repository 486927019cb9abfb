//! Reference networks. The JSON files under `examples/` describe the same
//! networks and are checked against these constructors.

use crate::network::{Action, Network, Production, ProductionEntry, PureNetwork, Queue};
use crate::scalar::{int, ratio, Ratio};

fn entry(offspring: &[u32], prob: Ratio) -> ProductionEntry {
    ProductionEntry::new(offspring.to_vec(), prob)
}

/// Two queues, `μ0 = 7/30`, `μ = (5/12, 7/20)`;
/// `1 → 2,2` w.p. 1/5, `1 → ε` w.p. 4/5, `2 → 1,2` w.p. 1/6, `2 → ε` w.p. 5/6.
pub fn fig1() -> PureNetwork {
    PureNetwork::from_parts(
        2,
        ratio(7, 30),
        Production::point(vec![1, 0]),
        vec![
            (
                ratio(5, 12),
                Production::new(vec![
                    entry(&[0, 2], ratio(1, 5)),
                    entry(&[0, 0], ratio(4, 5)),
                ]),
            ),
            (
                ratio(7, 20),
                Production::new(vec![
                    entry(&[1, 1], ratio(1, 6)),
                    entry(&[0, 0], ratio(5, 6)),
                ]),
            ),
        ],
    )
}

/// Every arrival creates one job at each of two queues; both queues just
/// finish their jobs. With `μ0 = 1`, `μ = (3, 3)` it has no product form.
pub fn npf() -> PureNetwork {
    npf_with_rates(int(3), int(3))
}

pub fn npf_with_rates(mu1: Ratio, mu2: Ratio) -> PureNetwork {
    PureNetwork::from_parts(
        2,
        int(1),
        Production::point(vec![1, 1]),
        vec![(mu1, Production::empty(2)), (mu2, Production::empty(2))],
    )
}

/// Arrivals (rate 1) go to queue 1 (`μ1 = 4`), which either forwards the job
/// to queue 2 (action `a`) or finishes it (action `b`); queue 2 (`μ2 = 1/2`)
/// finishes its jobs.
pub fn ctrl() -> Network {
    Network {
        n: 2,
        branching: 1,
        arrival_rate: int(1),
        arrival: Production::point(vec![1, 0]),
        queues: vec![
            Queue::new(
                int(4),
                vec![
                    Action::new("a", Production::point(vec![0, 1])),
                    Action::new("b", Production::empty(2)),
                ],
            ),
            Queue::new(ratio(1, 2), vec![Action::new("done", Production::empty(2))]),
        ],
    }
}

/// Single queue fed at rate 2 and served at rate 1.
pub fn overloaded() -> PureNetwork {
    mm1(int(2), int(1))
}

/// M/M/1 queue with arrival rate `arrival` and service rate `service`.
pub fn mm1(arrival: Ratio, service: Ratio) -> PureNetwork {
    PureNetwork::from_parts(
        1,
        arrival,
        Production::point(vec![1]),
        vec![(service, Production::empty(1))],
    )
}

/// Network-processor model: data plane D, control plane C, master M and two
/// slaves S1, S2 (queue order D, C, M, S1, S2), with `q = 0.2`, `b = 0.3`,
/// `d = (0.4, 0.3, 0.3)`, arrival rate 1 and subcritical service rates.
pub fn netproc() -> PureNetwork {
    let q = ratio(1, 5);
    let b = ratio(3, 10);
    let one = int(1);
    PureNetwork::from_parts(
        1,
        int(1),
        Production::new(vec![
            entry(&[1, 0, 0, 0, 0], ratio(2, 5)),
            entry(&[0, 0, 0, 1, 0], ratio(3, 10)),
            entry(&[0, 0, 0, 0, 1], ratio(3, 10)),
        ]),
        vec![
            (
                int(1),
                Production::new(vec![
                    entry(&[0, 0, 1, 0, 0], &one - &q),
                    entry(&[0, 1, 0, 0, 0], q.clone()),
                ]),
            ),
            (ratio(1, 2), Production::point(vec![0, 0, 1, 0, 0])),
            (int(1), Production::empty(5)),
            (
                ratio(1, 2),
                Production::new(vec![
                    entry(&[1, 0, 0, 0, 0], b.clone()),
                    entry(&[0, 0, 0, 0, 0], &one - &b),
                ]),
            ),
            (
                ratio(1, 2),
                Production::new(vec![
                    entry(&[1, 0, 0, 0, 0], b.clone()),
                    entry(&[0, 0, 0, 0, 0], &one - &b),
                ]),
            ),
        ],
    )
}

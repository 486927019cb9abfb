use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::corpus::{random_network, random_pure_network, CorpusOptions};
use crate::fixtures;
use crate::linalg::Matrix;
use crate::scalar::{int, ratio};
use crate::traffic::compute_moments;

fn entry(offspring: &[u32], prob: Ratio) -> ProductionEntry {
    ProductionEntry::new(offspring.to_vec(), prob)
}

#[test]
fn reference_networks_validate() {
    for net in [
        fixtures::fig1().into_network(),
        fixtures::npf().into_network(),
        fixtures::ctrl(),
        fixtures::netproc().into_network(),
    ] {
        let report = validate(&net);
        assert!(report.is_ok(), "{:?}", report.violations);
    }
}

#[test]
fn short_probability_sum_is_named() {
    let mut net = fixtures::fig1().into_network();
    net.queues[0].actions[0].production = Production::new(vec![
        entry(&[0, 2], ratio(1, 5)),
        entry(&[0, 0], ratio(7, 10)),
    ]);
    let report = validate(&net);
    assert!(report.has(ViolationKind::ProbabilitySum));
    let msg = &report.violations[0].message;
    assert!(
        msg.contains("production probabilities sum ≠ 1 at queue 1"),
        "{msg}"
    );
    assert!(msg.contains("9/10"), "{msg}");
}

#[test]
fn empty_arrival_stream_rejected() {
    let mut net = fixtures::fig1().into_network();
    net.arrival = Production::empty(2);
    let report = validate(&net);
    assert!(report.has(ViolationKind::ZeroArrivalStream));
    assert!(report
        .violations
        .iter()
        .any(|v| v.message == "nonzero arrival stream required"));
}

#[test]
fn branching_and_shape_violations() {
    let mut net = fixtures::fig1().into_network();
    net.queues[1].actions[0].production = Production::new(vec![
        entry(&[2, 1], ratio(1, 6)),
        entry(&[0, 0], ratio(5, 6)),
    ]);
    assert!(validate(&net).has(ViolationKind::BranchingExceeded));

    let mut net = fixtures::ctrl();
    net.queues[0].actions[1].id = "a".into();
    assert!(validate(&net).has(ViolationKind::DuplicateActionId));

    let mut net = fixtures::ctrl();
    net.queues[1].rate = int(0);
    assert!(validate(&net).has(ViolationKind::NonPositiveRate));

    let mut net = fixtures::ctrl();
    net.queues[1].actions[0].production = Production::point(vec![0, 0, 0]);
    assert!(validate(&net).has(ViolationKind::OffspringLength));
}

#[test]
fn unreachable_queue_reported() {
    // Queue 1 never forwards to queue 2 and arrivals only enter queue 1.
    let net = PureNetwork::from_parts(
        1,
        int(1),
        Production::point(vec![1, 0]),
        vec![
            (int(2), Production::empty(2)),
            (int(2), Production::empty(2)),
        ],
    )
    .into_network();
    let report = validate(&net);
    assert!(report.has(ViolationKind::UnreachableQueue));
    assert_eq!(
        report.violations[0].message,
        "queue 2 is unreachable from the arrival stream"
    );
}

#[test]
fn float_tolerance_accepts_rounded_sums() {
    let mut net = fixtures::mm1(int(1), int(2)).into_network();
    net.queues[0].actions[0].production = Production::new(vec![
        entry(&[0], ratio(333_333, 1_000_000)),
        entry(&[1], ratio(666_667, 1_000_000) - ratio(1, 10_000_000_000)),
    ]);
    assert!(validate(&net).has(ViolationKind::ProbabilitySum));
    assert!(validate_with(&net, Some(1e-9)).is_ok());
}

#[test]
fn reachable_sets() {
    assert_eq!(
        fixtures::fig1().network().reachable_queues(),
        BTreeSet::from([0, 1])
    );
    assert_eq!(fixtures::netproc().network().reachable_queues().len(), 5);
    let net = fixtures::ctrl();
    assert_eq!(net.reachable_queues(), BTreeSet::from([0, 1]));
    // Under pure `b` queue 2 is cut off.
    let pure = induce_pure_network(&net, &StaticScheduler::deterministic(&net, &[1, 0])).unwrap();
    assert_eq!(reachable_queues(&pure), BTreeSet::from([0]));
}

#[test]
fn induce_deterministic_and_mixed() {
    let net = fixtures::ctrl();
    let pure_a = induce_pure_network(&net, &StaticScheduler::deterministic(&net, &[0, 0])).unwrap();
    assert_eq!(pure_a.production(0), &Production::point(vec![0, 1]));

    let half = StaticScheduler::new(vec![
        BTreeMap::from([
            ("a".to_string(), ratio(1, 2)),
            ("b".to_string(), ratio(1, 2)),
        ]),
        BTreeMap::from([("done".to_string(), int(1))]),
    ]);
    let mixed = induce_pure_network(&net, &half).unwrap();
    let p = mixed.production(0);
    assert_eq!(p.entries.len(), 2);
    assert!(p.entries.iter().all(|e| e.prob == ratio(1, 2)));
    assert_eq!(p.total_prob(), int(1));
}

#[test]
fn induce_merges_equal_offspring() {
    let net = Network {
        n: 2,
        branching: 1,
        arrival_rate: int(1),
        arrival: Production::point(vec![1, 0]),
        queues: vec![
            Queue::new(
                int(3),
                vec![
                    Action::new(
                        "a",
                        Production::new(vec![
                            entry(&[0, 0], ratio(1, 2)),
                            entry(&[0, 1], ratio(1, 2)),
                        ]),
                    ),
                    Action::new("b", Production::empty(2)),
                ],
            ),
            Queue::new(int(2), vec![Action::new("done", Production::empty(2))]),
        ],
    };
    let half = StaticScheduler::new(vec![
        BTreeMap::from([
            ("a".to_string(), ratio(1, 2)),
            ("b".to_string(), ratio(1, 2)),
        ]),
        BTreeMap::from([("done".to_string(), int(1))]),
    ]);
    let p = induce_pure_network(&net, &half)
        .unwrap()
        .production(0)
        .clone();
    let probs: BTreeMap<Vec<u32>, Ratio> = p
        .entries
        .iter()
        .map(|e| (e.offspring.clone(), e.prob.clone()))
        .collect();
    assert_eq!(
        probs,
        BTreeMap::from([(vec![0, 0], ratio(3, 4)), (vec![0, 1], ratio(1, 4))])
    );
}

#[test]
fn scheduler_check_errors() {
    let net = fixtures::ctrl();
    let bad_sum = StaticScheduler::new(vec![
        BTreeMap::from([("a".to_string(), ratio(1, 2))]),
        BTreeMap::from([("done".to_string(), int(1))]),
    ]);
    assert!(matches!(
        bad_sum.check(&net),
        Err(NetworkError::BadDistribution { queue: 0, .. })
    ));
    let unknown = StaticScheduler::new(vec![
        BTreeMap::from([("z".to_string(), int(1))]),
        BTreeMap::from([("done".to_string(), int(1))]),
    ]);
    assert!(matches!(
        unknown.check(&net),
        Err(NetworkError::UnknownAction { .. })
    ));
    assert!(matches!(
        StaticScheduler::new(vec![]).check(&net),
        Err(NetworkError::SchedulerArity {
            expected: 2,
            got: 0
        })
    ));
}

fn two_speed_queue(branching: u32) -> RatedNetwork {
    RatedNetwork {
        n: 1,
        branching,
        arrival_rate: int(1),
        arrival: Production::point(vec![1]),
        queues: vec![vec![
            RatedAction {
                id: "fast".into(),
                rate: int(4),
                production: Production::empty(1),
            },
            RatedAction {
                id: "slow".into(),
                rate: int(3),
                production: Production::empty(1),
            },
        ]],
    }
}

#[test]
fn uniformize_pads_slow_actions_with_self_loops() {
    let net = uniformize(&two_speed_queue(1), false).unwrap();
    assert_eq!(net.queues[0].rate, int(4));
    let slow = &net.queues[0].actions[1].production;
    let probs: BTreeMap<Vec<u32>, Ratio> = slow
        .entries
        .iter()
        .map(|e| (e.offspring.clone(), e.prob.clone()))
        .collect();
    assert_eq!(
        probs,
        BTreeMap::from([(vec![0], ratio(3, 4)), (vec![1], ratio(1, 4))])
    );
    assert_eq!(net.queues[0].actions[0].production, Production::empty(1));
}

#[test]
fn uniformized_holding_time_matches_original_rate() {
    // A slow job leaves after a geometric number of rate-4 firings with
    // success 3/4: E[holding] = Σ_k k (1/4)^{k-1} (3/4) / 4 = 1/3.
    let mut total = 0.0;
    let mut stay = 1.0;
    for k in 1..200 {
        total += k as f64 * stay * 0.75 / 4.0;
        stay *= 0.25;
    }
    assert!((total - 1.0 / 3.0).abs() < 1e-15);
    let net = uniformize(&two_speed_queue(1), false).unwrap();
    let leave: Ratio = net.queues[0].actions[1]
        .production
        .entries
        .iter()
        .filter(|e| e.offspring == vec![0])
        .map(|e| e.prob.clone())
        .sum();
    assert_eq!(int(1) / (leave * &net.queues[0].rate), ratio(1, 3));
}

#[test]
fn uniformize_with_zero_branching() {
    assert!(matches!(
        uniformize(&two_speed_queue(0), false),
        Err(NetworkError::BranchingOverflow {
            declared: 0,
            needed: 1,
            ..
        })
    ));
    assert_eq!(uniformize(&two_speed_queue(0), true).unwrap().branching, 1);
    // Equal rates need no self-loop, so K = 0 stays.
    let net = rated_from_network(fixtures::npf().network());
    assert_eq!(
        uniformize(&net, false).unwrap(),
        fixtures::npf().into_network()
    );
}

#[test]
fn restrict_drops_queues_and_coordinates() {
    let net = PureNetwork::from_parts(
        1,
        int(1),
        Production::point(vec![1, 0, 0]),
        vec![
            (
                int(2),
                Production::new(vec![
                    entry(&[0, 0, 1], ratio(1, 2)),
                    entry(&[0, 0, 0], ratio(1, 2)),
                ]),
            ),
            (int(2), Production::empty(3)),
            (int(3), Production::empty(3)),
        ],
    );
    let r = net.restrict(&[0, 2]);
    assert_eq!(r.n(), 2);
    assert_eq!(r.network().arrival, Production::point(vec![1, 0]));
    assert_eq!(r.production(0).mean_offspring(2), vec![int(0), ratio(1, 2)]);
}

fn corpus_net(seed: u64) -> Network {
    random_network(
        &mut ChaCha8Rng::seed_from_u64(seed),
        &CorpusOptions::default(),
    )
}

fn random_scheduler(net: &Network, seed: u64) -> StaticScheduler {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    StaticScheduler::new(
        net.queues
            .iter()
            .map(|q| {
                let mut w: Vec<i64> = q.actions.iter().map(|_| rng.random_range(0..=3)).collect();
                if w.iter().all(|&x| x == 0) {
                    w[0] = 1;
                }
                let total: i64 = w.iter().sum();
                q.actions
                    .iter()
                    .zip(w)
                    .filter(|(_, x)| *x > 0)
                    .map(|(a, x)| (a.id.clone(), ratio(x, total)))
                    .collect()
            })
            .collect(),
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn reachability_matches_matrix_powers(seed in any::<u64>()) {
        let net = PureNetwork::new(random_pure_network(
            &mut ChaCha8Rng::seed_from_u64(seed),
            &CorpusOptions { max_queues: 5, ..CorpusOptions::default() },
        )).unwrap();
        let (alpha, a) = compute_moments::<Ratio>(&net);
        let n = net.n();
        // Support of α Σ_{j<n} A^j; paths longer than n-1 add nothing new.
        let mut term = alpha.clone();
        let mut support: BTreeSet<usize> = BTreeSet::new();
        for _ in 0..n {
            support.extend((0..n).filter(|&i| term[i] > int(0)));
            term = a.left_mul(&term);
        }
        prop_assert_eq!(reachable_queues(&net), support);
    }

    #[test]
    fn induce_is_affine_in_the_scheduler(seed in any::<u64>(), w in 0i64..=8) {
        let net = corpus_net(seed);
        let p = random_scheduler(&net, seed ^ 1);
        let q = random_scheduler(&net, seed ^ 2);
        let w = ratio(w, 8);
        let blended = induce_pure_network(&net, &p.blend(&q, &w)).unwrap();
        let (_, a_mix): (_, Matrix<Ratio>) = compute_moments(&blended);
        let (_, a_p) = compute_moments::<Ratio>(&induce_pure_network(&net, &p).unwrap());
        let (_, a_q) = compute_moments::<Ratio>(&induce_pure_network(&net, &q).unwrap());
        for i in 0..net.n {
            for j in 0..net.n {
                let expect = &w * &a_p[(i, j)] + (int(1) - &w) * &a_q[(i, j)];
                prop_assert_eq!(&a_mix[(i, j)], &expect);
            }
        }
    }

    #[test]
    fn induced_networks_are_valid(seed in any::<u64>()) {
        let net = corpus_net(seed);
        let sched = random_scheduler(&net, seed.wrapping_add(7));
        let pure = induce_pure_network(&net, &sched).unwrap().into_network();
        let report = validate(&pure);
        // Mixing may cut a queue off; every other check must hold.
        prop_assert!(report.violations.iter().all(|v| v.kind == ViolationKind::UnreachableQueue), "{:?}", report);
    }

    #[test]
    fn uniformization_preserves_drift(seed in any::<u64>(), slow in prop::collection::vec(1i64..=4, 3)) {
        let base = rated_from_network(&corpus_net(seed));
        let mut rated = base.clone();
        for (i, q) in rated.queues.iter_mut().enumerate() {
            for (a, action) in q.iter_mut().enumerate() {
                action.rate = &action.rate * ratio(slow[(i + a) % 3], 4);
            }
        }
        let uni = uniformize(&rated, true).unwrap();
        prop_assert!(validate(&uni).violations.iter().all(|v| v.kind == ViolationKind::UnreachableQueue));
        let n = uni.n;
        for (i, (orig, q)) in rated.queues.iter().zip(&uni.queues).enumerate() {
            for (ra, act) in orig.iter().zip(&q.actions) {
                // μ_i (E[offspring] - e_i) is unchanged by padding.
                let before = ra.production.mean_offspring(n);
                let after = act.production.mean_offspring(n);
                for j in 0..n {
                    let e = if i == j { int(1) } else { int(0) };
                    prop_assert_eq!(&ra.rate * (&before[j] - &e), &q.rate * (&after[j] - &e));
                }
            }
        }
    }

    #[test]
    fn scaling_rates_keeps_offspring_means(seed in any::<u64>(), k in 1i64..=9) {
        let net = corpus_net(seed);
        let scaled = net.scale_rates(&ratio(k, 3));
        prop_assert_eq!(scaled.alpha(), net.alpha().iter().map(|a| a * ratio(k, 3)).collect::<Vec<_>>());
        for (a, b) in net.queues.iter().zip(&scaled.queues) {
            prop_assert_eq!(&a.actions, &b.actions);
        }
    }
}

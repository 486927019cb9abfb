use branchq::corpus::{random_network, random_pure_network, CorpusOptions};
use branchq::linalg::Matrix;
use branchq::network::{induce_pure_network, Action, Network, PureNetwork, StaticScheduler};
use branchq::scalar::{int, ratio, Ratio};
use branchq::traffic::{compute_moments, solve_traffic, solve_traffic_reachable, star_matrix};
use branchq::traffic_lp::{is_stabilizable, synthesize_scheduler};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn pure(seed: u64) -> PureNetwork {
    PureNetwork::new(random_pure_network(
        &mut ChaCha8Rng::seed_from_u64(seed),
        &CorpusOptions::default(),
    ))
    .unwrap()
}

fn controlled(seed: u64) -> Network {
    random_network(
        &mut ChaCha8Rng::seed_from_u64(seed),
        &CorpusOptions::default(),
    )
}

fn max_ratio(net: &PureNetwork) -> Ratio {
    let t = solve_traffic_reachable::<Ratio>(net).unwrap();
    t.lambda
        .iter()
        .zip(net.network().rates())
        .map(|(l, m)| l / m)
        .max()
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn star_matches_neumann_series(seed in any::<u64>()) {
        let (_, a) = compute_moments::<f64>(&pure(seed));
        let n = a.rows();
        let mut sum = Matrix::<f64>::identity(n);
        let mut power = Matrix::<f64>::identity(n);
        for _ in 0..200 {
            power = power.mul(&a);
            for i in 0..n {
                for j in 0..n {
                    sum[(i, j)] += power[(i, j)];
                }
            }
        }
        let star = star_matrix(&a).unwrap();
        prop_assert!(star.max_abs_diff(&sum) <= 1e-8);
    }

    #[test]
    fn traffic_solution_properties(seed in any::<u64>(), c in 1i64..=6) {
        let net = pure(seed);
        let t = solve_traffic::<Ratio>(&net).unwrap();
        prop_assert!(t.residual().iter().all(|r| *r == int(0)));
        prop_assert!(t.col_norms.iter().all(|s| *s >= int(1)));
        // λ is linear in the arrival rate.
        let mut scaled = net.clone().into_network();
        scaled.arrival_rate *= ratio(c, 2);
        let s = solve_traffic::<Ratio>(&PureNetwork::new(scaled).unwrap()).unwrap();
        for (a, b) in t.lambda.iter().zip(&s.lambda) {
            prop_assert_eq!(a * ratio(c, 2), b.clone());
        }
    }

    #[test]
    fn extra_offspring_never_lowers_traffic(seed in any::<u64>()) {
        let net = pure(seed);
        let base = solve_traffic::<Ratio>(&net).unwrap();
        // Turning an empty outcome into a single job at queue 0 adds to A.
        let mut bigger = net.clone().into_network();
        let Some(e) = bigger.queues[0].actions[0]
            .production
            .entries
            .iter_mut()
            .find(|e| e.offspring.iter().all(|&k| k == 0)) else { return Ok(()) };
        e.offspring[0] = 1;
        bigger.queues[0].actions[0].production = bigger.queues[0].actions[0].production.normalized();
        if let Ok(t) = solve_traffic::<Ratio>(&PureNetwork::new(bigger).unwrap()) {
            for (a, b) in base.lambda.iter().zip(&t.lambda) {
                prop_assert!(b >= a);
            }
        }
    }

    #[test]
    fn lp_optimum_bounded_by_deterministic_schedulers(seed in any::<u64>()) {
        let net = controlled(seed);
        let (_, sol) = is_stabilizable::<Ratio>(&net).unwrap();
        prop_assert!(sol.is_optimal());
        for choice in net.deterministic_choices() {
            let induced = induce_pure_network(&net, &StaticScheduler::deterministic(&net, &choice)).unwrap();
            prop_assert!(max_ratio(&induced) >= sol.delta_star);
        }
    }

    #[test]
    fn synthesized_scheduler_attains_the_optimum(seed in any::<u64>()) {
        let net = controlled(seed);
        let (stable, sol) = is_stabilizable::<Ratio>(&net).unwrap();
        let sched = synthesize_scheduler(&net, &sol);
        sched.check(&net).unwrap();
        let induced = induce_pure_network(&net, &sched).unwrap();
        let t = solve_traffic_reachable::<Ratio>(&induced).unwrap();
        prop_assert_eq!(t.lambda, sol.queue_totals(net.n));
        prop_assert_eq!(max_ratio(&induced), sol.delta_star.clone());
        prop_assert_eq!(stable, t.traffic.deficient);
    }

    #[test]
    fn lp_optimum_invariant_under_rate_scaling(seed in any::<u64>(), k in 1i64..=7) {
        let net = controlled(seed);
        let (_, a) = is_stabilizable::<Ratio>(&net).unwrap();
        let (_, b) = is_stabilizable::<Ratio>(&net.scale_rates(&ratio(k, 3))).unwrap();
        prop_assert_eq!(a.delta_star, b.delta_star);
    }

    #[test]
    fn duplicated_action_leaves_optimum(seed in any::<u64>(), which in any::<prop::sample::Index>()) {
        let net = controlled(seed);
        let (_, a) = is_stabilizable::<Ratio>(&net).unwrap();
        let mut dup = net.clone();
        let queue = which.index(net.n);
        let copy = dup.queues[queue].actions[0].production.clone();
        dup.queues[queue].actions.push(Action::new("copy", copy));
        let (_, b) = is_stabilizable::<Ratio>(&dup).unwrap();
        prop_assert_eq!(a.delta_star, b.delta_star);
    }

    #[test]
    fn float_lp_tracks_exact(seed in any::<u64>()) {
        let net = controlled(seed);
        let (_, exact) = is_stabilizable::<Ratio>(&net).unwrap();
        let (_, float) = is_stabilizable::<f64>(&net).unwrap();
        let d: f64 = branchq::scalar::ratio_to_f64(&exact.delta_star);
        prop_assert!((float.delta_star - d).abs() <= 1e-9 * d.max(1.0));
    }
}

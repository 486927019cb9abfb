//! Traffic equations `λ = α + λA` for purely stochastic networks.

use serde_json::{json, Value};

use crate::error::{Divergence, TrafficError};
use crate::linalg::Matrix;
use crate::network::{reachable_queues, PureNetwork};
use crate::scalar::{vec_to_json, Scalar};

/// Float entries of `(I - A)^{-1}` above `-NEGATIVE_SLACK` count as nonnegative.
pub const NEGATIVE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficData<S> {
    /// Expected external arrivals per queue and time unit.
    pub alpha: Vec<S>,
    /// `A_ij`: expected number of j-jobs produced when queue i fires.
    pub mean_matrix: Matrix<S>,
    /// `A* = (I - A)^{-1}`.
    pub star: Matrix<S>,
    /// Column sums of `A*`.
    pub col_norms: Vec<S>,
    pub lambda: Vec<S>,
    pub mu: Vec<S>,
    /// `λ < μ` componentwise.
    pub deficient: bool,
}

impl<S: Scalar> TrafficData<S> {
    pub fn n(&self) -> usize {
        self.alpha.len()
    }

    /// Utilizations `λ_i / μ_i`.
    pub fn ratios(&self) -> Vec<S> {
        self.lambda
            .iter()
            .zip(&self.mu)
            .map(|(l, m)| l.clone() / m.clone())
            .collect()
    }

    /// `λ - α - λA`.
    pub fn residual(&self) -> Vec<S> {
        let flow = self.mean_matrix.left_mul(&self.lambda);
        self.lambda
            .iter()
            .zip(&self.alpha)
            .zip(flow)
            .map(|((l, a), f)| l.clone() - a.clone() - f)
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let matrix =
            |m: &Matrix<S>| Value::Array(m.to_rows().iter().map(|r| vec_to_json(r)).collect());
        json!({
            "alpha": vec_to_json(&self.alpha),
            "mean_matrix": matrix(&self.mean_matrix),
            "star": matrix(&self.star),
            "col_norms": vec_to_json(&self.col_norms),
            "lambda": vec_to_json(&self.lambda),
            "utilization": vec_to_json(&self.ratios()),
            "deficient": self.deficient,
        })
    }
}

/// `α_i = μ0 Σ_r Prob_0(r) r_i` and `A_ij = Σ_r Prob_i(r) r_j`.
pub fn compute_moments<S: Scalar>(net: &PureNetwork) -> (Vec<S>, Matrix<S>) {
    let n = net.n();
    let alpha = net.network().alpha().iter().map(S::from_ratio).collect();
    let rows = (0..n)
        .map(|i| {
            net.production(i)
                .mean_offspring(n)
                .iter()
                .map(S::from_ratio)
                .collect()
        })
        .collect();
    (alpha, Matrix::from_rows(rows))
}

/// `(I - A)^{-1}`, accepted only when it exists and is entrywise nonnegative.
///
/// For nonnegative `A` this stands in for convergence of `Σ_k A^k`.
pub fn star_matrix<S: Scalar>(a: &Matrix<S>) -> Result<Matrix<S>, Divergence> {
    let n = a.rows();
    let inv = Matrix::identity(n)
        .sub(a)
        .inverse()
        .ok_or(Divergence::Singular)?;
    for row in 0..n {
        for col in 0..n {
            if inv[(row, col)] < -S::tol(NEGATIVE_SLACK) {
                return Err(Divergence::NegativeEntry { row, col });
            }
        }
    }
    Ok(inv)
}

/// Solves the traffic equations; every queue must be reachable.
pub fn solve_traffic<S: Scalar>(net: &PureNetwork) -> Result<TrafficData<S>, TrafficError> {
    let reachable = reachable_queues(net);
    let unreachable: Vec<usize> = (0..net.n()).filter(|i| !reachable.contains(i)).collect();
    if !unreachable.is_empty() {
        return Err(TrafficError::Unreachable(unreachable));
    }
    solve_unchecked(net)
}

fn solve_unchecked<S: Scalar>(net: &PureNetwork) -> Result<TrafficData<S>, TrafficError> {
    let (alpha, mean_matrix) = compute_moments::<S>(net);
    let star = star_matrix(&mean_matrix)?;
    let lambda = star.left_mul(&alpha);
    let col_norms = star.column_sums();
    let mu: Vec<S> = net.network().rates().iter().map(S::from_ratio).collect();
    let deficient = lambda.iter().zip(&mu).all(|(l, m)| l < m);
    Ok(TrafficData {
        alpha,
        mean_matrix,
        star,
        col_norms,
        lambda,
        mu,
        deficient,
    })
}

/// Traffic solution on the reachable part of a network.
///
/// Queues outside the reachable set never receive a job when starting empty,
/// so the chain lives on the restricted network and their `λ` is zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ReachableTraffic<S> {
    /// Queue indices of the original network kept in `network`.
    pub kept: Vec<usize>,
    pub network: PureNetwork,
    pub traffic: TrafficData<S>,
    /// `λ` lifted back to the full network.
    pub lambda: Vec<S>,
}

impl<S: Scalar> ReachableTraffic<S> {
    pub fn deficient(&self) -> bool {
        self.traffic.deficient
    }

    pub fn to_json(&self) -> Value {
        let mut v = self.traffic.to_json();
        v["reachable_queues"] = json!(self.kept.iter().map(|k| k + 1).collect::<Vec<_>>());
        v["lambda_full"] = vec_to_json(&self.lambda);
        v
    }
}

pub fn solve_traffic_reachable<S: Scalar>(
    net: &PureNetwork,
) -> Result<ReachableTraffic<S>, TrafficError> {
    let kept: Vec<usize> = reachable_queues(net).into_iter().collect();
    let network = if kept.len() == net.n() {
        net.clone()
    } else {
        net.restrict(&kept)
    };
    let traffic = solve_unchecked::<S>(&network)?;
    let mut lambda = vec![S::zero(); net.n()];
    for (slot, value) in kept.iter().zip(&traffic.lambda) {
        lambda[*slot] = value.clone();
    }
    Ok(ReachableTraffic {
        kept,
        network,
        traffic,
        lambda,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::network::{Production, PureNetwork};
    use crate::scalar::{int, ratio, Ratio};

    #[test]
    fn fig1_moments() {
        let (alpha, a) = compute_moments::<Ratio>(&fixtures::fig1());
        assert_eq!(alpha, vec![ratio(7, 30), int(0)]);
        assert_eq!(
            a,
            Matrix::from_rows(vec![
                vec![int(0), ratio(2, 5)],
                vec![ratio(1, 6), ratio(1, 6)]
            ])
        );
    }

    #[test]
    fn npf_moments() {
        let (alpha, a) = compute_moments::<Ratio>(&fixtures::npf());
        assert_eq!(alpha, vec![int(1), int(1)]);
        assert_eq!(a, Matrix::zeros(2, 2));
    }

    #[test]
    fn empty_production_gives_zero_row() {
        let net = fixtures::mm1(int(1), int(3));
        let (_, a) = compute_moments::<Ratio>(&net);
        assert_eq!(a.row(0), &[int(0)]);
    }

    #[test]
    fn star_of_fig1_matrix() {
        let a = Matrix::from_rows(vec![
            vec![int(0), ratio(2, 5)],
            vec![ratio(1, 6), ratio(1, 6)],
        ]);
        let star = star_matrix(&a).unwrap();
        let expected = Matrix::from_rows(vec![
            vec![ratio(25, 23), ratio(12, 23)],
            vec![ratio(5, 23), ratio(30, 23)],
        ]);
        assert_eq!(star, expected);
        assert_eq!(star.mul(&Matrix::identity(2).sub(&a)), Matrix::identity(2));
    }

    #[test]
    fn star_of_zero_is_identity() {
        assert_eq!(
            star_matrix(&Matrix::<Ratio>::zeros(3, 3)).unwrap(),
            Matrix::identity(3)
        );
    }

    #[test]
    fn critical_single_queue_diverges() {
        let a = Matrix::from_rows(vec![vec![int(1)]]);
        assert_eq!(star_matrix(&a), Err(Divergence::Singular));
        let a = Matrix::from_rows(vec![vec![int(2)]]);
        assert_eq!(
            star_matrix(&a),
            Err(Divergence::NegativeEntry { row: 0, col: 0 })
        );
        assert!(star_matrix(&Matrix::from_rows(vec![vec![1.0]])).is_err());
    }

    #[test]
    fn fig1_traffic_solution() {
        let t = solve_traffic::<Ratio>(&fixtures::fig1()).unwrap();
        assert_eq!(t.lambda, vec![ratio(35, 138), ratio(14, 115)]);
        assert!(t.deficient);
        assert!(t.residual().iter().all(|r| *r == int(0)));
        assert_eq!(t.col_norms, vec![ratio(30, 23), ratio(42, 23)]);
    }

    #[test]
    fn npf_traffic_solution() {
        let t = solve_traffic::<Ratio>(&fixtures::npf()).unwrap();
        assert_eq!(t.lambda, vec![int(1), int(1)]);
        assert!(t.deficient);
        let boundary = solve_traffic::<Ratio>(&fixtures::npf_with_rates(int(1), int(3))).unwrap();
        assert!(!boundary.deficient);
    }

    #[test]
    fn float_mode_matches_exact() {
        let exact = solve_traffic::<Ratio>(&fixtures::fig1()).unwrap();
        let float = solve_traffic::<f64>(&fixtures::fig1()).unwrap();
        for (e, f) in exact.lambda.iter().zip(&float.lambda) {
            assert!((e.to_f64() - f).abs() < 1e-12);
        }
        let residual = float.residual().iter().map(|r| r.abs()).fold(0.0, f64::max);
        assert!(residual <= 1e-10);
    }

    #[test]
    fn unreachable_queue_is_rejected_but_restriction_solves() {
        let net = PureNetwork::from_parts(
            1,
            int(1),
            Production::point(vec![1, 0]),
            vec![
                (int(2), Production::empty(2)),
                (int(1), Production::point(vec![0, 1])),
            ],
        );
        assert_eq!(
            solve_traffic::<Ratio>(&net),
            Err(TrafficError::Unreachable(vec![1]))
        );
        let r = solve_traffic_reachable::<Ratio>(&net).unwrap();
        assert_eq!(r.kept, vec![0]);
        assert_eq!(r.lambda, vec![int(1), int(0)]);
        assert!(r.deficient());
    }
}

//! The piecewise-linear Lyapunov function `V(x) = max_i x·q^(i)` built from
//! the normalized columns of `A*`, the mean velocity `Δ(x)`, and a drift
//! certificate over all support patterns.
//!
//! `Δ` depends only on `supp(x)`, so drift is checked once per nonempty
//! support `S` against each index `i` whose linear piece can attain `V` on
//! that support. On ties the subgradient set is the convex hull of the
//! attaining `q^(i)`, so the per-index inequality covers it by convexity.

use serde_json::{json, Value};

use crate::error::LyapunovError;
use crate::linalg::{dot, Matrix};
use crate::scalar::{vec_to_json, Scalar};
use crate::simplex::{LinearProgram, LpStatus, Relation};
use crate::traffic::TrafficData;

/// Float margins pass when `margin ≤ -γ + DRIFT_SLACK`.
pub const DRIFT_SLACK: f64 = 1e-9;
/// Float values of `V` within this distance of the maximum count as ties.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// Above this many support patterns the certificate is computed in parallel.
const PARALLEL_PATTERNS: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct LyapunovData<S> {
    /// `q^(i)`: column `i` of `A*` divided by its sum.
    pub q: Vec<Vec<S>>,
    /// `min_i (μ_i - λ_i) / ‖a^(i)‖`; positive iff the traffic is deficient.
    pub gamma: S,
    pub traffic: TrafficData<S>,
}

impl<S: Scalar> LyapunovData<S> {
    pub fn new(traffic: TrafficData<S>) -> Self {
        let n = traffic.n();
        let q = (0..n)
            .map(|i| {
                let norm = traffic.col_norms[i].clone();
                traffic
                    .star
                    .column(i)
                    .into_iter()
                    .map(|v| v / norm.clone())
                    .collect()
            })
            .collect();
        let gamma = (0..n)
            .map(|i| {
                (traffic.mu[i].clone() - traffic.lambda[i].clone()) / traffic.col_norms[i].clone()
            })
            .reduce(|a, b| if b < a { b } else { a })
            .unwrap_or_else(S::zero);
        Self { q, gamma, traffic }
    }

    pub fn n(&self) -> usize {
        self.q.len()
    }
}

/// `(V(x), {i : x·q^(i) = V(x)})`.
pub fn lyapunov_value<S: Scalar>(ld: &LyapunovData<S>, x: &[S]) -> (S, Vec<usize>) {
    let values: Vec<S> = ld.q.iter().map(|q| dot(x, q)).collect();
    let best = values
        .iter()
        .cloned()
        .reduce(|a, b| if b > a { b } else { a })
        .unwrap_or_else(S::zero);
    let argmax = values
        .iter()
        .enumerate()
        .filter(|(_, v)| (best.clone() - (*v).clone()) <= S::tol(TIE_TOLERANCE))
        .map(|(i, _)| i)
        .collect();
    (best, argmax)
}

/// `Δ(x) = α + Σ_{i: x_i ≠ 0} μ_i (-e^(i) + A_i)`.
pub fn mean_velocity<S: Scalar>(td: &TrafficData<S>, x: &[S]) -> Vec<S> {
    let support: Vec<usize> = (0..x.len()).filter(|&i| x[i] != S::zero()).collect();
    velocity_for_support(td, &support)
}

pub fn velocity_for_support<S: Scalar>(td: &TrafficData<S>, support: &[usize]) -> Vec<S> {
    let mut v = td.alpha.clone();
    for &i in support {
        let mu = td.mu[i].clone();
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = slot.clone() + mu.clone() * td.mean_matrix[(i, j)].clone();
        }
        v[i] = v[i].clone() - mu;
    }
    v
}

pub fn drift_bound<S: Scalar>(ld: &LyapunovData<S>) -> Result<S, LyapunovError> {
    let td = &ld.traffic;
    if let Some(queue) = (0..ld.n()).find(|&i| td.lambda[i] >= td.mu[i]) {
        return Err(LyapunovError::NotDeficient {
            queue,
            lambda: render(&td.lambda[queue]),
            mu: render(&td.mu[queue]),
        });
    }
    Ok(ld.gamma.clone())
}

fn render<S: Scalar>(v: &S) -> String {
    match v.to_json() {
        Value::String(s) => s,
        other => other.to_string(),
    }
}

/// Which indices are checked per support pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DriftMode {
    /// Every `i ∈ S`, plus any `i ∉ S` for which the max property fails.
    #[default]
    Superset,
    /// Exactly the `i` whose piece attains `V` somewhere on `{supp(x) = S}`.
    ExactRegions,
}

impl DriftMode {
    pub fn name(self) -> &'static str {
        match self {
            DriftMode::Superset => "superset",
            DriftMode::ExactRegions => "exact_regions",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PatternCheck<S> {
    /// Sorted queue indices of the support.
    pub support: Vec<usize>,
    pub velocity: Vec<S>,
    /// `(i, Δ_S · q^(i))` for each checked index.
    pub margins: Vec<(usize, S)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriftCertificate<S> {
    pub mode: DriftMode,
    pub gamma: S,
    pub q: Vec<Vec<S>>,
    /// `Δ(0) = α`, for reference; the certificate concerns `x ≠ 0`.
    pub origin_velocity: Vec<S>,
    pub patterns: Vec<PatternCheck<S>>,
    pub passed: bool,
}

impl<S: Scalar> DriftCertificate<S> {
    pub fn all_margins(&self) -> impl Iterator<Item = &S> {
        self.patterns
            .iter()
            .flat_map(|p| p.margins.iter().map(|(_, m)| m))
    }

    pub fn pattern(&self, support: &[usize]) -> Option<&PatternCheck<S>> {
        self.patterns.iter().find(|p| p.support == support)
    }

    pub fn to_json(&self) -> Value {
        let labels = |s: &[usize]| s.iter().map(|i| i + 1).collect::<Vec<_>>();
        json!({
            "mode": self.mode.name(),
            "passed": self.passed,
            "gamma": self.gamma.to_json(),
            "q": self.q.iter().map(|v| vec_to_json(v)).collect::<Vec<_>>(),
            "origin_velocity": vec_to_json(&self.origin_velocity),
            "patterns": self.patterns.iter().map(|p| json!({
                "support": labels(&p.support),
                "velocity": vec_to_json(&p.velocity),
                "margins": p.margins.iter().map(|(i, m)| json!({
                    "index": i + 1,
                    "margin": m.to_json(),
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        })
    }
}

fn support_of(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask >> i & 1 == 1).collect()
}

/// Maps `f` over `0..count` in order, splitting across threads when large.
fn ordered_map<T: Send>(count: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let threads = std::thread::available_parallelism().map_or(1, |t| t.get());
    if count < PARALLEL_PATTERNS || threads == 1 {
        return (0..count).map(f).collect();
    }
    let chunk = count.div_ceil(threads);
    std::thread::scope(|scope| {
        let handles: Vec<_> = (0..count)
            .step_by(chunk)
            .map(|start| {
                let f = &f;
                scope.spawn(move || {
                    (start..(start + chunk).min(count))
                        .map(f)
                        .collect::<Vec<T>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .flat_map(|h| h.join().expect("pattern worker panicked"))
            .collect()
    })
}

/// `Δ_S · q^(i)` for every nonempty `S` and every `i ∈ S`, with no
/// precondition on the traffic solution. For `i ∈ S` this equals
/// `(λ_i - μ_i)/‖a^(i)‖`, so all margins are negative iff `λ < μ`.
pub fn drift_margins<S: Scalar>(ld: &LyapunovData<S>) -> Vec<PatternCheck<S>> {
    let n = ld.n();
    ordered_map((1usize << n) - 1, |k| {
        let support = support_of(k + 1, n);
        let velocity = velocity_for_support(&ld.traffic, &support);
        let margins = support
            .iter()
            .map(|&i| (i, dot(&velocity, &ld.q[i])))
            .collect();
        PatternCheck {
            support,
            velocity,
            margins,
        }
    })
}

/// Is `{x : x_j > 0 for j ∈ S, x_j = 0 otherwise, x·q^(i) ≥ x·q^(k) ∀k}`
/// nonempty? By homogeneity `x_j > 0` is replaced with `x_j ≥ 1`.
pub fn piece_attains_on_support<S: Scalar>(
    ld: &LyapunovData<S>,
    support: &[usize],
    i: usize,
) -> bool {
    let n = ld.n();
    let mut lp = LinearProgram::new(n);
    for j in 0..n {
        let mut row = vec![S::zero(); n];
        row[j] = S::one();
        if support.contains(&j) {
            lp.add(row, Relation::Ge, S::one());
        } else {
            lp.add(row, Relation::Eq, S::zero());
        }
    }
    add_dominance_rows(&mut lp, ld, i);
    matches!(lp.solve(), Ok(out) if out.status == LpStatus::Optimal)
}

fn add_dominance_rows<S: Scalar>(lp: &mut LinearProgram<S>, ld: &LyapunovData<S>, i: usize) {
    for k in (0..ld.n()).filter(|&k| k != i) {
        let row = ld.q[i]
            .iter()
            .zip(&ld.q[k])
            .map(|(a, b)| a.clone() - b.clone())
            .collect();
        lp.add(row, Relation::Ge, S::zero());
    }
}

pub fn certify_drift<S: Scalar>(
    ld: &LyapunovData<S>,
    mode: DriftMode,
) -> Result<DriftCertificate<S>, LyapunovError> {
    let gamma = drift_bound(ld)?;
    let n = ld.n();
    let max_property = check_max_property(ld);
    let extra: Vec<usize> = max_property
        .iter()
        .enumerate()
        .filter(|(_, r)| !r.holds)
        .map(|(i, _)| i)
        .collect();
    let patterns = ordered_map((1usize << n) - 1, |k| {
        let support = support_of(k + 1, n);
        let velocity = velocity_for_support(&ld.traffic, &support);
        let indices: Vec<usize> = match mode {
            DriftMode::Superset => {
                let mut all: Vec<usize> = support.iter().chain(&extra).copied().collect();
                all.sort_unstable();
                all.dedup();
                all
            }
            DriftMode::ExactRegions => (0..n)
                .filter(|&i| piece_attains_on_support(ld, &support, i))
                .collect(),
        };
        let margins = indices
            .into_iter()
            .map(|i| (i, dot(&velocity, &ld.q[i])))
            .collect();
        PatternCheck {
            support,
            velocity,
            margins,
        }
    });
    let bound = S::tol(DRIFT_SLACK) - gamma.clone();
    let failure = patterns
        .iter()
        .flat_map(|p| p.margins.iter().map(move |(i, m)| (p, *i, m)))
        .find(|(_, _, m)| **m > bound);
    if let Some((p, index, margin)) = failure {
        return Err(LyapunovError::CertificationFailed {
            pattern: p.support.clone(),
            index,
            margin: render(margin),
            gamma: render(&gamma),
        });
    }
    Ok(DriftCertificate {
        mode,
        gamma,
        q: ld.q.clone(),
        origin_velocity: ld.traffic.alpha.clone(),
        patterns,
        passed: true,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MaxPropertyCheck<S> {
    /// No `x ≥ 0`, `Σx = 1`, `x_i = 0` lets `q^(i)` attain `V`.
    pub holds: bool,
    pub witness: Option<Vec<S>>,
}

/// For each `i`: an LP feasibility test for a nonzero `x` with `x_i = 0` at
/// which `x·q^(i)` is maximal. A witness would be a defect.
pub fn check_max_property<S: Scalar>(ld: &LyapunovData<S>) -> Vec<MaxPropertyCheck<S>> {
    let n = ld.n();
    (0..n)
        .map(|i| {
            let mut lp = LinearProgram::new(n);
            let mut pin = vec![S::zero(); n];
            pin[i] = S::one();
            lp.add(pin, Relation::Eq, S::zero());
            lp.add(vec![S::one(); n], Relation::Eq, S::one());
            add_dominance_rows(&mut lp, ld, i);
            match lp.solve() {
                Ok(out) if out.status == LpStatus::Optimal => MaxPropertyCheck {
                    holds: false,
                    witness: Some(out.values),
                },
                _ => MaxPropertyCheck {
                    holds: true,
                    witness: None,
                },
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CancellationReport<S> {
    /// `(-e^(i) + A_i) · q^(j)` at `(i, j)`.
    pub values: Matrix<S>,
    /// `values - expected`, expected being `-1/‖a^(j)‖` on the diagonal, 0 off it.
    pub residuals: Matrix<S>,
}

impl<S: Scalar> CancellationReport<S> {
    pub fn max_residual(&self) -> f64 {
        self.residuals
            .max_abs_diff(&Matrix::zeros(self.residuals.rows(), self.residuals.cols()))
    }
}

pub fn cancellation_identities<S: Scalar>(ld: &LyapunovData<S>) -> CancellationReport<S> {
    let n = ld.n();
    let td = &ld.traffic;
    let mut values = Matrix::zeros(n, n);
    let mut residuals = Matrix::zeros(n, n);
    for i in 0..n {
        let mut row = td.mean_matrix.row(i).to_vec();
        row[i] = row[i].clone() - S::one();
        for j in 0..n {
            let v = dot(&row, &ld.q[j]);
            let expected = if i == j {
                -(S::one() / td.col_norms[j].clone())
            } else {
                S::zero()
            };
            residuals[(i, j)] = v.clone() - expected;
            values[(i, j)] = v;
        }
    }
    CancellationReport { values, residuals }
}

/// `α·q^(i) - λ_i/‖a^(i)‖` per `i`; zero because `α = λ(I - A)`.
pub fn expansion_residuals<S: Scalar>(ld: &LyapunovData<S>) -> Vec<S> {
    let td = &ld.traffic;
    (0..ld.n())
        .map(|i| dot(&td.alpha, &ld.q[i]) - td.lambda[i].clone() / td.col_norms[i].clone())
        .collect()
}

pub fn lyapunov_json<S: Scalar>(ld: &LyapunovData<S>) -> Value {
    json!({
        "q": ld.q.iter().map(|v| vec_to_json(v)).collect::<Vec<_>>(),
        "gamma": ld.gamma.to_json(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::scalar::{int, ratio, Ratio};
    use crate::traffic::solve_traffic;

    fn fig1() -> LyapunovData<Ratio> {
        LyapunovData::new(solve_traffic(&fixtures::fig1()).unwrap())
    }

    #[test]
    fn fig1_pieces_and_gamma() {
        let ld = fig1();
        assert_eq!(
            ld.q,
            vec![
                vec![ratio(5, 6), ratio(1, 6)],
                vec![ratio(2, 7), ratio(5, 7)]
            ]
        );
        assert_eq!(drift_bound(&ld).unwrap(), ratio(1, 8));
        for q in &ld.q {
            assert_eq!(q.iter().cloned().sum::<Ratio>(), int(1));
        }
    }

    #[test]
    fn fig1_values() {
        let ld = fig1();
        assert_eq!(
            lyapunov_value(&ld, &[int(1), int(0)]),
            (ratio(5, 6), vec![0])
        );
        assert_eq!(lyapunov_value(&ld, &[int(1), int(1)]), (int(1), vec![0, 1]));
        assert_eq!(lyapunov_value(&ld, &[int(0), int(0)]), (int(0), vec![0, 1]));
    }

    #[test]
    fn fig1_velocities() {
        let td = solve_traffic::<Ratio>(&fixtures::fig1()).unwrap();
        assert_eq!(
            mean_velocity(&td, &[int(0), int(0)]),
            vec![ratio(7, 30), int(0)]
        );
        assert_eq!(
            mean_velocity(&td, &[int(3), int(0)]),
            vec![ratio(-11, 60), ratio(1, 6)]
        );
        assert_eq!(
            mean_velocity(&td, &[int(0), int(2)]),
            vec![ratio(7, 24), ratio(-7, 24)]
        );
        assert_eq!(
            mean_velocity(&td, &[int(2), int(5)]),
            vec![ratio(-1, 8), ratio(-1, 8)]
        );
    }

    #[test]
    fn fig1_certificate_margins_are_exactly_minus_gamma() {
        let ld = fig1();
        for mode in [DriftMode::Superset, DriftMode::ExactRegions] {
            let cert = certify_drift(&ld, mode).unwrap();
            assert!(cert.passed);
            assert!(cert.all_margins().count() >= 3);
            assert!(cert.all_margins().all(|m| *m == ratio(-1, 8)));
        }
    }

    #[test]
    fn exact_regions_drop_unattainable_pieces() {
        let ld = fig1();
        let cert = certify_drift(&ld, DriftMode::ExactRegions).unwrap();
        let indices = |s: &[usize]| -> Vec<usize> {
            cert.pattern(s)
                .unwrap()
                .margins
                .iter()
                .map(|(i, _)| *i)
                .collect()
        };
        assert_eq!(indices(&[0]), vec![0]);
        assert_eq!(indices(&[1]), vec![1]);
        assert_eq!(indices(&[0, 1]), vec![0, 1]);
    }

    #[test]
    fn npf_certificate() {
        let ld = LyapunovData::<Ratio>::new(solve_traffic(&fixtures::npf()).unwrap());
        assert_eq!(drift_bound(&ld).unwrap(), int(2));
        let cert = certify_drift(&ld, DriftMode::Superset).unwrap();
        assert!(cert.all_margins().all(|m| *m <= int(-2)));
        assert_eq!(
            cert.pattern(&[0, 1]).unwrap().velocity,
            vec![int(-2), int(-2)]
        );
    }

    #[test]
    fn overloaded_is_not_deficient() {
        let ld = LyapunovData::<Ratio>::new(solve_traffic(&fixtures::overloaded()).unwrap());
        assert!(matches!(
            drift_bound(&ld),
            Err(LyapunovError::NotDeficient { queue: 0, .. })
        ));
        assert!(certify_drift(&ld, DriftMode::Superset).is_err());
        assert!(drift_margins(&ld)
            .iter()
            .all(|p| p.margins.iter().all(|(_, m)| *m > int(0))));
        let critical =
            LyapunovData::<Ratio>::new(solve_traffic(&fixtures::mm1(int(1), int(1))).unwrap());
        assert!(drift_bound(&critical).is_err());
    }

    #[test]
    fn max_property_on_fig1_and_single_queue() {
        assert!(check_max_property(&fig1()).iter().all(|c| c.holds));
        let single =
            LyapunovData::<Ratio>::new(solve_traffic(&fixtures::mm1(int(1), int(3))).unwrap());
        assert!(check_max_property(&single)[0].holds);
    }

    #[test]
    fn cancellation_on_fig1() {
        let report = cancellation_identities(&fig1());
        assert_eq!(report.values[(0, 0)], ratio(-23, 30));
        assert_eq!(report.values[(1, 0)], int(0));
        assert_eq!(report.max_residual(), 0.0);
        assert!(expansion_residuals(&fig1()).iter().all(|r| *r == int(0)));
    }

    #[test]
    fn cancellation_without_branching() {
        let ld = LyapunovData::<Ratio>::new(solve_traffic(&fixtures::npf()).unwrap());
        let report = cancellation_identities(&ld);
        assert_eq!(
            report.values,
            Matrix::from_rows(vec![vec![int(-1), int(0)], vec![int(0), int(-1)]])
        );
    }

    #[test]
    fn float_mode_certificate() {
        let ld = LyapunovData::<f64>::new(solve_traffic(&fixtures::fig1()).unwrap());
        let cert = certify_drift(&ld, DriftMode::Superset).unwrap();
        assert!(cert.all_margins().all(|m| (m + 0.125).abs() < 1e-12));
    }
}

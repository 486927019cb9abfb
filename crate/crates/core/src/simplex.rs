//! Dense two-phase primal simplex with Bland's anti-cycling rule.
//!
//! The tableau is generic over [`Scalar`]: with rationals every pivot is exact
//! and the returned basis is a certificate; with `f64` comparisons use
//! [`FLOAT_TOLERANCE`].

use serde::Serialize;

use crate::error::LpError;
use crate::scalar::Scalar;

pub const FLOAT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Constraint<S> {
    pub coeffs: Vec<S>,
    pub relation: Relation,
    pub rhs: S,
}

/// `minimize objective · x` subject to `constraints` and `x ≥ 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearProgram<S> {
    pub num_vars: usize,
    pub objective: Vec<S>,
    pub constraints: Vec<Constraint<S>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpOutcome<S> {
    pub status: LpStatus,
    /// Values of the structural variables (meaningful when `Optimal`).
    pub values: Vec<S>,
    pub objective: S,
    /// Basic columns: structural variables are `0..num_vars`, slack or
    /// surplus of constraint `k` is `num_vars + k`.
    pub basis: Vec<usize>,
    pub iterations: usize,
}

impl<S: Scalar> LinearProgram<S> {
    pub fn new(num_vars: usize) -> Self {
        Self {
            num_vars,
            objective: vec![S::zero(); num_vars],
            constraints: Vec::new(),
        }
    }

    pub fn add(&mut self, coeffs: Vec<S>, relation: Relation, rhs: S) {
        assert_eq!(coeffs.len(), self.num_vars, "constraint width");
        self.constraints.push(Constraint {
            coeffs,
            relation,
            rhs,
        });
    }

    /// Whether `x` satisfies every constraint and bound within `eps` (zero
    /// in exact mode).
    pub fn is_feasible(&self, x: &[S], eps: f64) -> bool {
        let tol = S::tol(eps);
        x.iter().all(|v| *v >= -tol.clone())
            && self.constraints.iter().all(|c| {
                let lhs = c
                    .coeffs
                    .iter()
                    .zip(x)
                    .fold(S::zero(), |acc, (a, v)| acc + a.clone() * v.clone());
                match c.relation {
                    Relation::Le => lhs <= c.rhs.clone() + tol.clone(),
                    Relation::Ge => lhs >= c.rhs.clone() - tol.clone(),
                    Relation::Eq => (lhs - c.rhs.clone()).abs() <= tol.clone(),
                }
            })
    }

    pub fn solve(&self) -> Result<LpOutcome<S>, LpError> {
        Tableau::build(self).run(self)
    }
}

struct Tableau<S> {
    /// Each row holds `width` coefficients followed by the right-hand side.
    rows: Vec<Vec<S>>,
    basis: Vec<usize>,
    width: usize,
    structural: usize,
    /// Columns from here on are artificial.
    first_artificial: usize,
    iterations: usize,
    limit: usize,
}

enum Phase {
    Optimal,
    Unbounded,
}

impl<S: Scalar> Tableau<S> {
    fn build(lp: &LinearProgram<S>) -> Self {
        let m = lp.constraints.len();
        let n = lp.num_vars;
        let slack_count = lp
            .constraints
            .iter()
            .filter(|c| c.relation != Relation::Eq)
            .count();
        let artificial_count = lp
            .constraints
            .iter()
            .filter(|c| {
                let flipped = c.rhs < S::zero();
                match c.relation {
                    Relation::Eq => true,
                    Relation::Le => flipped,
                    Relation::Ge => !flipped,
                }
            })
            .count();
        let first_artificial = n + slack_count;
        let width = first_artificial + artificial_count;
        let mut rows = Vec::with_capacity(m);
        let mut basis = Vec::with_capacity(m);
        let mut slack = n;
        let mut artificial = first_artificial;
        for c in &lp.constraints {
            let flip = c.rhs < S::zero();
            let sign = |v: &S| if flip { -v.clone() } else { v.clone() };
            let mut row: Vec<S> = c.coeffs.iter().map(sign).collect();
            row.resize(width + 1, S::zero());
            row[width] = sign(&c.rhs);
            let relation = match (c.relation, flip) {
                (Relation::Le, true) => Relation::Ge,
                (Relation::Ge, true) => Relation::Le,
                (r, _) => r,
            };
            if c.relation != Relation::Eq {
                // The slack keeps its column even when the row is flipped.
                row[slack] = if relation == Relation::Le {
                    S::one()
                } else {
                    -S::one()
                };
                if relation == Relation::Le {
                    basis.push(slack);
                }
                slack += 1;
            }
            if relation != Relation::Le {
                row[artificial] = S::one();
                basis.push(artificial);
                artificial += 1;
            }
            rows.push(row);
        }
        let limit = 10 * (m + width).pow(2).max(1);
        Self {
            rows,
            basis,
            width,
            structural: n,
            first_artificial,
            iterations: 0,
            limit,
        }
    }

    fn tol() -> S {
        S::tol(FLOAT_TOLERANCE)
    }

    fn pivot(&mut self, r: usize, c: usize, costs: &mut [S]) {
        let p = self.rows[r][c].clone();
        for v in self.rows[r].iter_mut() {
            *v = v.clone() / p.clone();
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r || row[c] == S::zero() {
                continue;
            }
            let f = row[c].clone();
            for (v, pv) in row.iter_mut().zip(&pivot_row) {
                if *pv != S::zero() {
                    *v = v.clone() - f.clone() * pv.clone();
                }
            }
        }
        let f = costs[c].clone();
        if f != S::zero() {
            for (v, pv) in costs.iter_mut().zip(&pivot_row) {
                *v = v.clone() - f.clone() * pv.clone();
            }
        }
        self.basis[r] = c;
    }

    /// Reduced-cost row (last entry is minus the objective value).
    fn reduced_costs(&self, cost: &[S]) -> Vec<S> {
        let mut d: Vec<S> = cost.to_vec();
        d.push(S::zero());
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            let cb = cost[b].clone();
            if cb == S::zero() {
                continue;
            }
            for (v, a) in d.iter_mut().zip(row) {
                *v = v.clone() - cb.clone() * a.clone();
            }
        }
        d
    }

    fn optimize(&mut self, d: &mut [S], allowed: usize) -> Result<Phase, LpError> {
        let tol = Self::tol();
        loop {
            // Bland: lowest-index improving column.
            let Some(c) = (0..allowed).find(|&j| d[j] < -tol.clone()) else {
                return Ok(Phase::Optimal);
            };
            self.iterations += 1;
            if self.iterations > self.limit {
                return Err(LpError::IterationCap { limit: self.limit });
            }
            let mut leave: Option<(usize, S)> = None;
            for (r, row) in self.rows.iter().enumerate() {
                if row[c] <= tol {
                    continue;
                }
                let ratio = row[self.width].clone() / row[c].clone();
                leave = match leave {
                    None => Some((r, ratio)),
                    Some((br, best)) => {
                        let diff = ratio.clone() - best.clone();
                        if diff < -tol.clone()
                            || (diff.abs() <= tol && self.basis[r] < self.basis[br])
                        {
                            Some((r, ratio))
                        } else {
                            Some((br, best))
                        }
                    }
                };
            }
            let Some((r, _)) = leave else {
                return Ok(Phase::Unbounded);
            };
            self.pivot(r, c, d);
        }
    }

    fn run(mut self, lp: &LinearProgram<S>) -> Result<LpOutcome<S>, LpError> {
        let tol = Self::tol();
        let infeasible = |iterations| LpOutcome {
            status: LpStatus::Infeasible,
            values: vec![S::zero(); lp.num_vars],
            objective: S::zero(),
            basis: Vec::new(),
            iterations,
        };

        if self.first_artificial < self.width {
            let mut cost = vec![S::zero(); self.width];
            for c in cost.iter_mut().skip(self.first_artificial) {
                *c = S::one();
            }
            let mut d = self.reduced_costs(&cost);
            self.optimize(&mut d, self.width)?;
            let phase1 = -d[self.width].clone();
            if phase1 > tol {
                return Ok(infeasible(self.iterations));
            }
            // Drive remaining artificials out of the basis or drop their rows.
            let mut r = 0;
            while r < self.rows.len() {
                if self.basis[r] < self.first_artificial {
                    r += 1;
                    continue;
                }
                let entering = (0..self.first_artificial).find(|&j| self.rows[r][j].abs() > tol);
                match entering {
                    Some(j) => {
                        let mut scratch = vec![S::zero(); self.width + 1];
                        self.pivot(r, j, &mut scratch);
                        r += 1;
                    }
                    None => {
                        self.rows.remove(r);
                        self.basis.remove(r);
                    }
                }
            }
        }

        let mut cost = vec![S::zero(); self.width];
        cost[..self.structural].clone_from_slice(&lp.objective);
        let mut d = self.reduced_costs(&cost);
        let phase = self.optimize(&mut d, self.first_artificial)?;
        let mut values = vec![S::zero(); lp.num_vars];
        for (row, &b) in self.rows.iter().zip(&self.basis) {
            if b < self.structural {
                values[b] = row[self.width].clone();
            }
        }
        let status = match phase {
            Phase::Optimal => LpStatus::Optimal,
            Phase::Unbounded => LpStatus::Unbounded,
        };
        let objective = lp
            .objective
            .iter()
            .zip(&values)
            .fold(S::zero(), |acc, (c, v)| acc + c.clone() * v.clone());
        let mut basis: Vec<usize> = self.basis.clone();
        basis.sort_unstable();
        Ok(LpOutcome {
            status,
            values,
            objective,
            basis,
            iterations: self.iterations,
        })
    }
}

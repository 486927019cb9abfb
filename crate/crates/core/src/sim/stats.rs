use serde::Serialize;
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

/// Point estimate with a 95% confidence half-width (`None` with fewer than
/// two batches).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub value: f64,
    pub half_width: Option<f64>,
}

impl Estimate {
    /// `|value - target| ≤ k · half_width`.
    pub fn within(&self, target: f64, k: f64) -> bool {
        match self.half_width {
            Some(hw) => (self.value - target).abs() <= k * hw,
            None => false,
        }
    }
}

/// `(value, half-width)` from equally weighted batch estimates at 95%.
pub fn batch_means(point: f64, batches: &[f64]) -> Estimate {
    let b = batches.len();
    if b < 2 {
        return Estimate {
            value: point,
            half_width: None,
        };
    }
    let mean = batches.iter().sum::<f64>() / b as f64;
    let var = batches.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (b - 1) as f64;
    let t = StudentsT::new(0.0, 1.0, (b - 1) as f64)
        .expect("positive degrees of freedom")
        .inverse_cdf(0.975);
    Estimate {
        value: point,
        half_width: Some(t * (var / b as f64).sqrt()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Pearson goodness of fit. Cells with expected count below 5 are pooled
/// into one cell (dropped if the pool itself stays below 5).
pub fn chi_square(observed: &[u64], probs: &[f64]) -> ChiSquareTest {
    assert_eq!(observed.len(), probs.len());
    let total: u64 = observed.iter().sum();
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut pool = (0.0, 0.0);
    for (&o, &p) in observed.iter().zip(probs) {
        let e = p * n;
        if e < 5.0 {
            pool.0 += o as f64;
            pool.1 += e;
        } else {
            cells.push((o as f64, e));
        }
    }
    if pool.1 >= 5.0 {
        cells.push(pool);
    } else if let Some(last) = cells.last_mut() {
        last.0 += pool.0;
        last.1 += pool.1;
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len().saturating_sub(1);
    let p_value = if dof == 0 {
        1.0
    } else {
        1.0 - ChiSquared::new(dof as f64)
            .expect("positive dof")
            .cdf(statistic)
    };
    ChiSquareTest {
        statistic,
        dof,
        p_value,
    }
}

/// Least-squares fit `ln h_k ≈ a - rate · k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GeometricFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

pub fn fit_geometric(points: &[(f64, f64)]) -> Option<GeometricFit> {
    if points.len() < 2 {
        return None;
    }
    let m = points.len() as f64;
    let (sx, sy) = points
        .iter()
        .fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y.ln()));
    let (mx, my) = (sx / m, sy / m);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for (x, y) in points {
        let (dx, dy) = (x - mx, y.ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 {
        1.0
    } else {
        sxy * sxy / (sxx * syy)
    };
    Some(GeometricFit {
        rate: -slope,
        intercept: my - slope * mx,
        r_squared,
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batch_means_half_width() {
        let e = batch_means(2.0, &[1.0, 2.0, 3.0]);
        // t_{0.975, 2} = 4.302653, sd = 1.
        assert!((e.half_width.unwrap() - 4.302653 / 3f64.sqrt()).abs() < 1e-5);
        assert_eq!(batch_means(1.0, &[1.0]).half_width, None);
    }

    #[test]
    fn chi_square_perfect_fit() {
        let t = chi_square(&[250, 250, 500], &[0.25, 0.25, 0.5]);
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.dof, 2);
        assert!((t.p_value - 1.0).abs() < 1e-12);
        let bad = chi_square(&[400, 100, 500], &[0.25, 0.25, 0.5]);
        assert!(bad.p_value < 1e-10);
    }

    #[test]
    fn geometric_fit_recovers_rate() {
        let pts: Vec<(f64, f64)> = (1..10)
            .map(|k| (k as f64, 0.5 * (-0.7 * k as f64).exp()))
            .collect();
        let fit = fit_geometric(&pts).unwrap();
        assert!((fit.rate - 0.7).abs() < 1e-12);
        assert!((fit.intercept - 0.5f64.ln()).abs() < 1e-12);
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
    }
}

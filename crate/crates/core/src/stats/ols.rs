use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative pivot size below which X'X is treated as rank deficient.
const RANK_TOL: f64 = 1e-10;
/// Ridge added to the non-intercept diagonal when X'X is rank deficient.
pub const RIDGE_FALLBACK: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub weights: Vec<f64>,
    pub intercept: Option<f64>,
    /// Set when the ridge fallback was used.
    pub ill_conditioned: bool,
}

impl OlsFit {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept.unwrap_or(0.0) + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Least squares via the normal equations. Rows of `x` are observations.
/// When an intercept is requested it is left out of the ridge penalty, so a
/// fit on constant predictors returns the mean of `y` as intercept.
pub fn ols_fit(x: &[Vec<f64>], y: &[f64], intercept: bool) -> Result<OlsFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::shape(format!("{} targets", n), y.len()));
    }
    let p = x.first().map_or(0, |r| r.len());
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::shape(format!("rows of width {p}"), "ragged rows"));
    }
    let cols = p + usize::from(intercept);
    if cols == 0 || n < cols {
        return Err(Error::shape(format!("at least {cols} observations"), n));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::DegenerateInput("non-finite OLS input"));
    }
    let design = DMatrix::from_fn(n, cols, |i, j| {
        if intercept && j == p {
            1.0
        } else {
            x[i][j]
        }
    });
    let yv = DVector::from_column_slice(y);
    let xtx = design.transpose() * &design;
    let xty = design.transpose() * &yv;

    let (beta, ill_conditioned) = match solve_spd(&xtx, &xty) {
        Some(b) => (b, false),
        None => {
            let mut reg = xtx.clone();
            for j in 0..p {
                reg[(j, j)] += RIDGE_FALLBACK;
            }
            let b = solve_spd(&reg, &xty)
                .or_else(|| reg.clone().lu().solve(&xty))
                .ok_or(Error::DegenerateInput("OLS system is singular even with ridge"))?;
            (b, true)
        }
    };
    Ok(OlsFit {
        weights: beta.iter().take(p).copied().collect(),
        intercept: intercept.then(|| beta[p]),
        ill_conditioned,
    })
}

/// Cholesky solve that refuses near-singular systems.
fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let chol = a.clone().cholesky()?;
    let l = chol.l();
    for j in 0..a.nrows() {
        let scale = a[(j, j)].abs().max(f64::MIN_POSITIVE);
        if l[(j, j)].powi(2) < RANK_TOL * scale {
            return None;
        }
    }
    Some(chol.solve(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn exact_fit_without_intercept() {
        let fit = ols_fit(&[vec![1.0], vec![2.0], vec![3.0]], &[2.0, 4.0, 6.0], false).unwrap();
        assert_abs_diff_eq!(fit.weights[0], 2.0, epsilon = 1e-12);
        assert!(!fit.ill_conditioned);
        assert!(fit.intercept.is_none());
    }

    #[test]
    fn noise_target_gives_mean_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x: Vec<Vec<f64>> = (0..4000).map(|_| vec![rng.random::<f64>()]).collect();
        let y: Vec<f64> = (0..4000).map(|_| 3.0 + rng.random::<f64>() - 0.5).collect();
        let fit = ols_fit(&x, &y, true).unwrap();
        // Brute-force grid oracle over (w, b) for the same data.
        let sse = |w: f64, b: f64| x.iter().zip(&y).map(|(r, t)| (w * r[0] + b - t).powi(2)).sum::<f64>();
        let mut best = (f64::INFINITY, 0.0, 0.0);
        for i in -20..=20 {
            for j in -20..=20 {
                let (w, b) = (i as f64 * 0.01, 3.0 + j as f64 * 0.01);
                let s = sse(w, b);
                if s < best.0 {
                    best = (s, w, b);
                }
            }
        }
        assert!(fit.weights[0].abs() < 0.05);
        assert!((fit.weights[0] - best.1).abs() <= 0.011);
        assert!((fit.intercept.unwrap() - best.2).abs() <= 0.011);
        assert_abs_diff_eq!(fit.intercept.unwrap(), crate::stats::mean(&y), epsilon = 0.03);
    }

    #[test]
    fn duplicated_column_flags_and_keeps_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let base: Vec<f64> = (0..50).map(|_| rng.random::<f64>()).collect();
        let y: Vec<f64> = base.iter().map(|v| 1.5 * v + 0.2 + 0.01 * rng.random::<f64>()).collect();
        let single: Vec<Vec<f64>> = base.iter().map(|v| vec![*v]).collect();
        let dup: Vec<Vec<f64>> = base.iter().map(|v| vec![*v, *v]).collect();
        let f1 = ols_fit(&single, &y, true).unwrap();
        let f2 = ols_fit(&dup, &y, true).unwrap();
        assert!(!f1.ill_conditioned);
        assert!(f2.ill_conditioned);
        for r in &single {
            assert_abs_diff_eq!(f1.predict(r), f2.predict(&[r[0], r[0]]), epsilon = 1e-6);
        }
    }

    #[test]
    fn constant_predictors_give_mean() {
        let x = vec![vec![1.0, 2.0, 3.0]; 10];
        let y: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let fit = ols_fit(&x, &y, true).unwrap();
        assert!(fit.ill_conditioned);
        assert_abs_diff_eq!(fit.predict(&x[0]), 4.5, epsilon = 1e-6);
    }

    #[test]
    fn residuals_are_orthogonal_to_columns() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.random_range(8..40);
            let p = rng.random_range(1..5);
            let x: Vec<Vec<f64>> = (0..n).map(|_| (0..p).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
            let fit = ols_fit(&x, &y, true).unwrap();
            let ynorm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
            let resid: Vec<f64> = x.iter().zip(&y).map(|(r, t)| t - fit.predict(r)).collect();
            for j in 0..p {
                let dot: f64 = x.iter().zip(&resid).map(|(r, e)| r[j] * e).sum();
                assert!(dot.abs() < 1e-8 * ynorm, "column {j}: {dot}");
            }
            assert!(resid.iter().sum::<f64>().abs() < 1e-8 * ynorm);
        }
    }
}

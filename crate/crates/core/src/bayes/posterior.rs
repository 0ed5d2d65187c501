use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::design::Design;
use crate::error::{Error, Result};

/// Default weakly informative priors, scaled by the data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriorConfig {
    /// Coefficient prior sd in units of `sd(y) / sd(x_j)`.
    pub coef_scale: f64,
    /// Intercept prior sd in units of `sd(y)`, centred on `mean(y)`.
    pub intercept_scale: f64,
    /// Inverse-gamma shape and scale of the noise variance.
    pub a0: f64,
    pub b0: f64,
}

impl Default for PriorConfig {
    fn default() -> Self {
        PriorConfig {
            coef_scale: 2.5,
            intercept_scale: 10.0,
            a0: 1.0,
            b0: 1.0,
        }
    }
}

impl PriorConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.coef_scale, self.intercept_scale, self.a0, self.b0].iter().any(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::ConfigInvalid(format!("prior parameters must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// Location-scale Student t.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TDist {
    pub location: f64,
    pub scale: f64,
    pub df: f64,
}

impl TDist {
    fn dist(&self) -> StudentsT {
        StudentsT::new(self.location, self.scale, self.df).expect("positive scale and degrees of freedom")
    }

    pub fn cdf(&self, x: f64) -> f64 {
        self.dist().cdf(x)
    }

    pub fn sf(&self, x: f64) -> f64 {
        self.dist().sf(x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        self.dist().inverse_cdf(p)
    }

    pub fn sd(&self) -> f64 {
        if self.df > 2.0 {
            self.scale * (self.df / (self.df - 2.0)).sqrt()
        } else {
            f64::INFINITY
        }
    }
}

/// Normal-inverse-gamma model `beta | s2 ~ N(m, s2 V)`, `s2 ~ IG(a, b)`,
/// holding both the prior and the closed-form posterior.
#[derive(Debug, Clone)]
pub struct NigPosterior {
    pub names: Vec<String>,
    pub prior_mean: DVector<f64>,
    /// Diagonal of the prior `V`.
    pub prior_v: DVector<f64>,
    pub a0: f64,
    pub b0: f64,
    pub mean: DVector<f64>,
    pub v: DMatrix<f64>,
    pub a: f64,
    pub b: f64,
}

impl NigPosterior {
    /// Marginal posterior of `c · beta`.
    pub fn contrast(&self, c: &[f64]) -> TDist {
        let c = DVector::from_column_slice(c);
        TDist {
            location: c.dot(&self.mean),
            scale: ((self.b / self.a) * (c.transpose() * &self.v * &c)[(0, 0)]).sqrt(),
            df: 2.0 * self.a,
        }
    }

    /// Marginal prior of `c · beta`.
    pub fn prior_contrast(&self, c: &[f64]) -> TDist {
        let c = DVector::from_column_slice(c);
        let q: f64 = c.iter().zip(self.prior_v.iter()).map(|(ci, vi)| ci * ci * vi).sum();
        TDist {
            location: c.dot(&self.prior_mean),
            scale: ((self.b0 / self.a0) * q).sqrt(),
            df: 2.0 * self.a0,
        }
    }

    pub fn coefficient(&self, j: usize) -> TDist {
        let mut c = vec![0.0; self.mean.len()];
        c[j] = 1.0;
        self.contrast(&c)
    }
}

/// Prior covariance is `s2 V0` with `V0` chosen so that at `s2 = var(y)` the
/// coefficient sds equal the configured defaults; this keeps the model
/// conjugate while matching the usual data-scaled default priors.
pub fn posterior(design: &Design, prior: &PriorConfig) -> Result<NigPosterior> {
    prior.validate()?;
    let n = design.n();
    let p = design.n_columns();
    if n <= p {
        return Err(Error::shape(format!("more than {p} observations"), n));
    }
    let y = DVector::from_column_slice(&design.y);
    let mean_y = y.mean();
    let var_y = y.iter().map(|v| (v - mean_y).powi(2)).sum::<f64>() / (n - 1) as f64;
    if !(var_y > 0.0) {
        return Err(Error::DegenerateInput("response has zero variance"));
    }
    let mut m0 = DVector::zeros(p);
    let mut v0 = DVector::zeros(p);
    for j in 0..p {
        let col = design.x.column(j);
        let mu = col.mean();
        let var = col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / (n - 1) as f64;
        if var > 0.0 {
            v0[j] = prior.coef_scale.powi(2) / var;
        } else {
            // Constant column: the intercept.
            m0[j] = mean_y / mu;
            v0[j] = (prior.intercept_scale / mu).powi(2);
        }
    }
    let v0_inv = DMatrix::from_diagonal(&v0.map(|v| 1.0 / v));
    let xt = design.x.transpose();
    let precision = &v0_inv + &xt * &design.x;
    let v = precision
        .clone()
        .cholesky()
        .ok_or(Error::DegenerateInput("posterior precision is not positive definite"))?
        .inverse();
    let mean = &v * (&v0_inv * &m0 + &xt * &y);
    let quad = y.dot(&y) + m0.dot(&(&v0_inv * &m0)) - mean.dot(&(&precision * &mean));
    Ok(NigPosterior {
        names: design.column_names.clone(),
        prior_mean: m0,
        prior_v: v0,
        a0: prior.a0,
        b0: prior.b0,
        mean,
        v,
        a: prior.a0 + n as f64 / 2.0,
        b: prior.b0 + 0.5 * quad.max(0.0),
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::bayes::design::Factor;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Two crossed factors with known sum-coded effects.
    pub(crate) fn synthetic(effects: &[f64], noise: f64, reps: usize, seed: u64) -> Design {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n01 = Normal::new(0.0, 1.0).unwrap();
        let (mut a, mut b, mut y) = (Vec::new(), Vec::new(), Vec::new());
        for i in 0..3 {
            for j in 0..2 {
                for _ in 0..reps {
                    a.push(i);
                    b.push(j);
                    y.push(0.0);
                }
            }
        }
        let factors = [
            Factor {
                name: "a".into(),
                levels: vec!["a0".into(), "a1".into(), "a2".into()],
                index: a,
            },
            Factor {
                name: "b".into(),
                levels: vec!["b0".into(), "b1".into()],
                index: b,
            },
        ];
        let skeleton = Design::from_factors(y, &factors).unwrap();
        let y = (0..skeleton.n())
            .map(|i| skeleton.x.row(i).iter().zip(effects).map(|(x, e)| x * e).sum::<f64>() + noise * n01.sample(&mut rng))
            .collect();
        Design::from_factors(y, &factors).unwrap()
    }

    #[test]
    fn recovers_known_coefficients() {
        let truth = [0.4, 0.3, -0.2, 0.25, 0.0, 0.1];
        let d = synthetic(&truth, 0.1, 15, 3);
        let post = posterior(&d, &PriorConfig::default()).unwrap();
        for (j, t) in truth.iter().enumerate() {
            let m = post.coefficient(j);
            assert!((m.location - t).abs() < 2.0 * m.sd(), "{j}: {} vs {t} (sd {})", m.location, m.sd());
        }
    }

    #[test]
    fn zero_variance_response_is_degenerate() {
        let mut d = synthetic(&[0.0; 6], 0.0, 3, 1);
        d.y.iter_mut().for_each(|v| *v = 0.5);
        assert!(matches!(posterior(&d, &PriorConfig::default()), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn vague_prior_approaches_least_squares() {
        let d = synthetic(&[0.4, 0.3, -0.2, 0.25, 0.0, 0.1], 0.2, 10, 8);
        let vague = PriorConfig { coef_scale: 1e6, intercept_scale: 1e6, ..PriorConfig::default() };
        let post = posterior(&d, &vague).unwrap();
        let ols = d.x.clone().svd(true, true).solve(&DVector::from_column_slice(&d.y), 1e-12).unwrap();
        for j in 0..d.n_columns() {
            assert!((post.mean[j] - ols[j]).abs() < 1e-6);
        }
    }
}

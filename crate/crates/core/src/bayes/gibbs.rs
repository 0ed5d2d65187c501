use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::design::Design;
use super::posterior::NigPosterior;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GibbsConfig {
    pub chains: usize,
    /// Iterations per chain, warm-up included.
    pub iterations: usize,
    pub warmup: usize,
    pub seed: u64,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            chains: 4,
            iterations: 40_000,
            warmup: 20_000,
            seed: 1,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<()> {
        if self.chains < 2 || self.warmup >= self.iterations || self.iterations - self.warmup < 4 {
            return Err(Error::ConfigInvalid(format!("need at least 2 chains and 4 kept draws: {self:?}")));
        }
        Ok(())
    }
}

/// Kept draws per chain, row-major `draws x (coefficients, sigma2)`.
#[derive(Debug, Clone)]
pub struct Samples {
    pub names: Vec<String>,
    pub n_coef: usize,
    pub chains: Vec<Vec<f64>>,
}

impl Samples {
    pub fn n_draws(&self) -> usize {
        self.chains.first().map_or(0, |c| c.len() / (self.n_coef + 1))
    }

    /// Per-chain draws of `c · beta`.
    pub fn contrast(&self, c: &[f64]) -> Vec<Vec<f64>> {
        let w = self.n_coef + 1;
        self.chains
            .iter()
            .map(|ch| ch.chunks_exact(w).map(|d| d[..self.n_coef].iter().zip(c).map(|(b, ci)| b * ci).sum()).collect())
            .collect()
    }

    /// Per-chain draws of parameter `j`; `n_coef` is the noise variance.
    pub fn parameter(&self, j: usize) -> Vec<Vec<f64>> {
        let w = self.n_coef + 1;
        self.chains.iter().map(|ch| ch.chunks_exact(w).map(|d| d[j]).collect()).collect()
    }
}

/// Gibbs sampling of the conjugate model with exact conditionals:
/// `beta | s2, y` is normal and `s2 | beta, y` inverse-gamma. Chains start
/// from dispersed noise variances and run in parallel on derived seeds.
pub fn sample(design: &Design, post: &NigPosterior, cfg: &GibbsConfig) -> Result<Samples> {
    cfg.validate()?;
    let p = design.n_columns();
    let n = design.n();
    let chol = post.v.clone().cholesky().ok_or(Error::DegenerateInput("posterior covariance is not positive definite"))?;
    let l = chol.l();
    let y = DVector::from_column_slice(&design.y);
    let shape = post.a0 + (n + p) as f64 / 2.0;
    let centre = post.b / post.a;
    let chains = (0..cfg.chains)
        .into_par_iter()
        .map(|c| {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(cfg.seed, &[c as u64]));
            let n01 = Normal::new(0.0, 1.0).expect("valid normal");
            let mut s2 = centre * 4f64.powf(c as f64 / (cfg.chains - 1) as f64 * 2.0 - 1.0);
            let mut out = Vec::with_capacity((cfg.iterations - cfg.warmup) * (p + 1));
            for it in 0..cfg.iterations {
                let z = DVector::from_fn(p, |_, _| n01.sample(&mut rng));
                let beta = &post.mean + &l * z * s2.sqrt();
                let resid = &y - &design.x * &beta;
                let dev = &beta - &post.prior_mean;
                let prior_quad: f64 = dev.iter().zip(post.prior_v.iter()).map(|(d, v)| d * d / v).sum();
                let rate = post.b0 + 0.5 * (resid.dot(&resid) + prior_quad);
                let g = Gamma::new(shape, 1.0 / rate).expect("positive gamma parameters");
                s2 = 1.0 / g.sample(&mut rng);
                if it >= cfg.warmup {
                    out.extend(beta.iter());
                    out.push(s2);
                }
            }
            out
        })
        .collect();
    Ok(Samples {
        names: design.column_names.iter().cloned().chain(std::iter::once("sigma2".to_string())).collect(),
        n_coef: p,
        chains,
    })
}

/// Sum in sorted order, so the result does not depend on input order.
pub(crate) fn stable_sum(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s.iter().sum()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn halves(chains: &[Vec<f64>]) -> Vec<&[f64]> {
    chains
        .iter()
        .flat_map(|c| {
            let h = c.len() / 2;
            [&c[..h], &c[h..2 * h]]
        })
        .collect()
}

/// Within-chain variance and pooled variance estimate over split chains.
fn variance_components(seqs: &[&[f64]]) -> (f64, f64, Vec<(f64, f64)>) {
    let n = seqs[0].len() as f64;
    let stats: Vec<(f64, f64)> = seqs.iter().map(|s| mean_var(s)).collect();
    let m = stats.len() as f64;
    let w = stable_sum(&stats.iter().map(|s| s.1).collect::<Vec<_>>()) / m;
    let grand = stable_sum(&stats.iter().map(|s| s.0).collect::<Vec<_>>()) / m;
    let b_over_n = stable_sum(&stats.iter().map(|s| (s.0 - grand).powi(2)).collect::<Vec<_>>()) / (m - 1.0);
    ((n - 1.0) / n * w + b_over_n, w, stats)
}

/// Split R-hat: chains are halved and the pooled variance compared with the
/// mean within-half variance.
pub fn split_rhat(chains: &[Vec<f64>]) -> f64 {
    let seqs = halves(chains);
    let (var_plus, w, _) = variance_components(&seqs);
    if w <= 0.0 {
        return if var_plus <= 0.0 { 1.0 } else { f64::INFINITY };
    }
    (var_plus / w).sqrt()
}

/// Effective sample size from multi-chain autocorrelations truncated with
/// Geyer's initial monotone sequence.
pub fn ess(chains: &[Vec<f64>]) -> f64 {
    let seqs = halves(chains);
    let (var_plus, _, stats) = variance_components(&seqs);
    let n = seqs[0].len();
    let total = (n * seqs.len()) as f64;
    if var_plus <= 0.0 {
        return total;
    }
    let autocov = |lag: usize| -> f64 {
        let per: Vec<f64> = seqs
            .iter()
            .zip(&stats)
            .map(|(s, (m, _))| (0..n - lag).map(|t| (s[t] - m) * (s[t + lag] - m)).sum::<f64>() / n as f64)
            .collect();
        stable_sum(&per) / seqs.len() as f64
    };
    let w = stable_sum(&stats.iter().map(|s| s.1).collect::<Vec<_>>()) / stats.len() as f64;
    let rho = |lag: usize| 1.0 - (w - autocov(lag)) / var_plus;
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < n {
        let mut pair = rho(2 * k) + rho(2 * k + 1);
        if pair <= 0.0 {
            break;
        }
        pair = pair.min(prev);
        prev = pair;
        sum += pair;
        k += 1;
    }
    // tau = -1 + 2 * (sum of pair sums), floored as in common practice.
    let tau = (2.0 * sum - 1.0).max(1.0 / total.log10().max(1.0));
    total / tau
}

/// Pooled mean and type-7 quantiles, invariant to the order of chains.
pub fn pooled_summary(chains: &[Vec<f64>], probs: &[f64]) -> (f64, Vec<f64>) {
    let mut all: Vec<f64> = chains.iter().flatten().copied().collect();
    all.sort_by(f64::total_cmp);
    let mean = stable_sum(&all) / all.len() as f64;
    let q = probs
        .iter()
        .map(|&p| {
            let h = (all.len() - 1) as f64 * p;
            let (lo, frac) = (h.floor() as usize, h - h.floor());
            all[lo] + frac * (all[(lo + 1).min(all.len() - 1)] - all[lo])
        })
        .collect();
    (mean, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::posterior::{posterior, PriorConfig};

    fn ar1(n: usize, phi: f64, seed: u64, offset: f64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n01 = Normal::new(0.0, 1.0).unwrap();
        let mut x = 0.0;
        (0..n)
            .map(|_| {
                x = phi * x + (1.0 - phi * phi).sqrt() * n01.sample(&mut rng);
                x + offset
            })
            .collect()
    }

    #[test]
    fn rhat_detects_disagreeing_chains() {
        let good: Vec<_> = (0..4).map(|c| ar1(2000, 0.5, c, 0.0)).collect();
        assert!(split_rhat(&good) < 1.01);
        let bad: Vec<_> = (0..4).map(|c| ar1(2000, 0.5, c, c as f64)).collect();
        assert!(split_rhat(&bad) > 1.5);
    }

    #[test]
    fn ess_tracks_autocorrelation() {
        let iid: Vec<_> = (0..4).map(|c| ar1(4000, 0.0, c, 0.0)).collect();
        let e = ess(&iid);
        assert!((e / 16000.0 - 1.0).abs() < 0.15, "{e}");
        // AR(1) with phi = 0.9 has ESS n (1 - phi) / (1 + phi).
        let sticky: Vec<_> = (0..4).map(|c| ar1(4000, 0.9, 10 + c, 0.0)).collect();
        let e = ess(&sticky);
        let expected = 16000.0 * 0.1 / 1.9;
        assert!((e / expected - 1.0).abs() < 0.3, "{e} vs {expected}");
    }

    #[test]
    fn chain_order_does_not_change_summaries() {
        let chains: Vec<_> = (0..4).map(|c| ar1(1000, 0.3, c, 0.1 * c as f64)).collect();
        let mut rev = chains.clone();
        rev.reverse();
        assert_eq!(pooled_summary(&chains, &[0.025, 0.5, 0.975]), pooled_summary(&rev, &[0.025, 0.5, 0.975]));
        assert_eq!(split_rhat(&chains), split_rhat(&rev));
        assert_eq!(ess(&chains), ess(&rev));
    }

    #[test]
    fn gibbs_matches_analytic_posterior() {
        let d = crate::bayes::posterior::tests::synthetic(&[0.4, 0.3, -0.2, 0.25, 0.0, 0.1], 0.15, 8, 5);
        let post = posterior(&d, &PriorConfig::default()).unwrap();
        let cfg = GibbsConfig { iterations: 8000, warmup: 2000, ..GibbsConfig::default() };
        let s = sample(&d, &post, &cfg).unwrap();
        for j in 0..d.n_columns() {
            let t = post.coefficient(j);
            let draws = s.parameter(j);
            let (m, q) = pooled_summary(&draws, &[0.025, 0.975]);
            assert!((m - t.location).abs() < 0.03 * t.sd(), "coef {j}");
            assert!((q[0] - t.quantile(0.025)).abs() < 0.1 * t.sd());
            assert!((q[1] - t.quantile(0.975)).abs() < 0.1 * t.sd());
            assert!(split_rhat(&draws) < 1.01);
        }
        let (s2, _) = pooled_summary(&s.parameter(d.n_columns()), &[]);
        let expected = post.b / (post.a - 1.0);
        assert!((s2 / expected - 1.0).abs() < 0.03);
    }
}

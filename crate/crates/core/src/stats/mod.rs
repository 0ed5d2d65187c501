//! Statistical kernels shared by the analysis, training and evaluation code.
//!
//! Degenerate inputs (zero variance) are reported as
//! [`Error::DegenerateInput`] rather than silently mapped to 0; each caller
//! decides whether to skip or fail.

mod ols;

pub use ols::{ols_fit, OlsFit};

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub r: f64,
    pub n: usize,
    /// Two-sided p-value from the t distribution with n - 2 degrees of freedom.
    pub p_two_sided: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectThresholdConfig {
    /// Minimum standardized effect (Cohen's d).
    pub d_min: f64,
    pub alpha: f64,
}

impl Default for EffectThresholdConfig {
    fn default() -> Self {
        EffectThresholdConfig {
            d_min: 0.2,
            alpha: 0.05,
        }
    }
}

fn check_pair(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(Error::shape(format!("equal lengths ({})", x.len()), y.len()));
    }
    if x.len() < 2 {
        return Err(Error::shape("at least 2 observations", x.len()));
    }
    Ok(())
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sd_sample(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

/// Means and centred sums of products. A sum of squares at the level of
/// rounding error in the mean is reported as exactly 0, so constant inputs
/// such as `[0.2; 10]` are recognised as degenerate.
fn centered_sums(x: &[f64], y: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mx, my) = (mean(x), mean(y));
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let n = x.len() as f64;
    let floor = |m: f64| n * m * m * 1e-26;
    if sxx <= floor(mx) {
        sxx = 0.0;
        sxy = 0.0;
    }
    if syy <= floor(my) {
        syy = 0.0;
        sxy = 0.0;
    }
    (mx, my, sxy, sxx, syy)
}

/// Pearson correlation with a two-sided t-test.
pub fn pcc(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    check_pair(x, y)?;
    let (_, _, sxy, sxx, syy) = centered_sums(x, y);
    if sxx <= 0.0 || syy <= 0.0 {
        return Err(Error::DegenerateInput("zero variance in PCC input"));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    let n = x.len();
    Ok(CorrelationResult {
        r,
        n,
        p_two_sided: pcc_p_value(r, n),
    })
}

/// Two-sided p-value of a correlation `r` over `n` pairs.
pub fn pcc_p_value(r: f64, n: usize) -> f64 {
    if n <= 2 {
        return 1.0;
    }
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r.abs() * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * dist.sf(t)).clamp(0.0, 1.0)
}

/// Lin's concordance correlation coefficient with population (1/N) moments.
pub fn ccc(x: &[f64], y: &[f64]) -> Result<f64> {
    check_pair(x, y)?;
    let n = x.len() as f64;
    let (mx, my, sxy, sxx, syy) = centered_sums(x, y);
    let denom = sxx / n + syy / n + (mx - my).powi(2);
    if denom <= 0.0 {
        return Err(Error::DegenerateInput("CCC of two identical constants"));
    }
    Ok(2.0 * (sxy / n) / denom)
}

pub fn fisher_z(r: f64) -> Result<f64> {
    if !(r.abs() < 1.0) {
        return Err(Error::OutOfDomain(r));
    }
    Ok(r.atanh())
}

pub fn fisher_z_inv(z: f64) -> f64 {
    z.tanh()
}

/// Mean of per-class recalls of `pred` against `reference`.
pub fn uar_binary(pred: &[bool], reference: &[bool]) -> Result<f64> {
    if pred.len() != reference.len() {
        return Err(Error::shape(format!("equal lengths ({})", reference.len()), pred.len()));
    }
    let (mut tp, mut pos, mut tn, mut neg) = (0usize, 0usize, 0usize, 0usize);
    for (p, r) in pred.iter().zip(reference) {
        if *r {
            pos += 1;
            tp += usize::from(*p);
        } else {
            neg += 1;
            tn += usize::from(!*p);
        }
    }
    if pos == 0 || neg == 0 {
        return Err(Error::SingleClassReference);
    }
    Ok(0.5 * (tp as f64 / pos as f64 + tn as f64 / neg as f64))
}

/// Upper two-sided critical value of the UAR of a chance-level rater over
/// `n` items (normal approximation, null UAR = 0.5 with variance 0.25/n).
pub fn uar_chance_threshold(n: usize, alpha: f64) -> f64 {
    0.5 + normal_quantile(1.0 - alpha / 2.0) * (0.25 / n.max(1) as f64).sqrt()
}

pub fn normal_quantile(p: f64) -> f64 {
    Normal::new(0.0, 1.0).expect("unit normal").inverse_cdf(p)
}

/// Rule for the minimum label frequency counted as a "small" effect.
pub trait FrequencyThresholdRule {
    fn threshold(&self, freqs: &[f64], cfg: &EffectThresholdConfig) -> f64;
}

/// `mean + d_min * sd` over the label frequencies.
#[derive(Debug, Clone, Copy, Default)]
pub struct MeanPlusEffectSd;

impl FrequencyThresholdRule for MeanPlusEffectSd {
    fn threshold(&self, freqs: &[f64], cfg: &EffectThresholdConfig) -> f64 {
        mean(freqs) + cfg.d_min * sd_sample(freqs)
    }
}

pub fn frequency_effect_threshold(freqs: &[usize], cfg: &EffectThresholdConfig) -> f64 {
    let f: Vec<f64> = freqs.iter().map(|v| *v as f64).collect();
    MeanPlusEffectSd.threshold(&f, cfg)
}

/// `p_i < alpha / m` for each of the `m` p-values.
pub fn bonferroni(p: &[f64], alpha: f64) -> Vec<bool> {
    let m = p.len().max(1) as f64;
    p.iter().map(|pi| *pi < alpha / m).collect()
}

/// Formats a coefficient in [-1, 1] with three decimals and no leading
/// zero (`.252`, `-.030`); NaN renders as `NA`.
pub fn fmt_coef(v: f64) -> String {
    if v.is_nan() {
        return "NA".into();
    }
    let s = format!("{:.3}", v);
    if let Some(rest) = s.strip_prefix("-0.") {
        if rest == "000" {
            ".000".into()
        } else {
            format!("-.{rest}")
        }
    } else if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn coefficient_formatting() {
        assert_eq!(fmt_coef(0.2524), ".252");
        assert_eq!(fmt_coef(-0.03), "-.030");
        assert_eq!(fmt_coef(-0.0001), ".000");
        assert_eq!(fmt_coef(1.0), "1.000");
        assert_eq!(fmt_coef(f64::NAN), "NA");
    }
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn pcc_hand_cases() {
        assert_abs_diff_eq!(pcc(&[1.0, 2.0, 3.0], &[2.0, 4.0, 6.0]).unwrap().r, 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(pcc(&[0.0, 1.0], &[1.0, 0.0]).unwrap().r, -1.0, epsilon = 1e-15);
        // dx = [-1.5,-.5,.5,1.5], dy = [-.5,-1.5,1.5,.5] -> sxy = 3, sxx = syy = 5
        assert_abs_diff_eq!(pcc(&[1.0, 2.0, 3.0, 4.0], &[2.0, 1.0, 4.0, 3.0]).unwrap().r, 0.6, epsilon = 1e-15);
        assert!(matches!(pcc(&[1.0, 1.0], &[0.0, 1.0]), Err(Error::DegenerateInput(_))));
    }

    #[test]
    fn pcc_p_value_matches_t_table() {
        // r = .5, n = 20: t = .5*sqrt(18/.75) = 2.4495, df 18 -> p = 0.024770 (two-sided)
        assert_abs_diff_eq!(pcc_p_value(0.5, 20), 0.024770, epsilon = 1e-6);
        assert!(pcc_p_value(0.2, 30) > pcc_p_value(0.4, 30));
    }

    #[test]
    fn ccc_hand_cases() {
        assert_abs_diff_eq!(ccc(&[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0]).unwrap(), 1.0);
        // var_x = var_y = 2/3, cov = 2/3, mean diff 2 -> 4/3 / (4/3 + 4) = .25
        assert_abs_diff_eq!(ccc(&[0.0, 1.0, 2.0], &[2.0, 3.0, 4.0]).unwrap(), 0.25, epsilon = 1e-15);
        assert_abs_diff_eq!(ccc(&[0.0, 1.0], &[1.0, 0.0]).unwrap(), -1.0, epsilon = 1e-15);
        assert!(ccc(&[2.0, 2.0], &[2.0, 2.0]).is_err());
        assert_eq!(ccc(&[2.0, 2.0], &[3.0, 3.0]).unwrap(), 0.0);
    }

    #[test]
    fn fisher_pairs() {
        assert_eq!(fisher_z(0.0).unwrap(), 0.0);
        assert_abs_diff_eq!(fisher_z(0.5).unwrap(), 0.549306, epsilon = 1e-6);
        assert_abs_diff_eq!(fisher_z_inv(fisher_z(0.25).unwrap()), 0.25, epsilon = 1e-12);
        assert!(matches!(fisher_z(1.0), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn uar_hand_cases() {
        let r = [true, false, true, false];
        assert_eq!(uar_binary(&r, &r).unwrap(), 1.0);
        assert_eq!(uar_binary(&[true, true, false, false], &r).unwrap(), 0.5);
        assert_eq!(uar_binary(&[true; 4], &r).unwrap(), 0.5);
        assert!(matches!(uar_binary(&[true, false], &[true, true]), Err(Error::SingleClassReference)));
    }

    #[test]
    fn chance_threshold() {
        assert_abs_diff_eq!(uar_chance_threshold(1067, 0.05), 0.530, epsilon = 5e-4);
        assert_abs_diff_eq!(uar_chance_threshold(100, 0.05), 0.598, epsilon = 5e-4);
        assert!(uar_chance_threshold(10_000_000, 0.05) - 0.5 < 1e-3);
    }

    #[test]
    fn frequency_threshold_cases() {
        let cfg = EffectThresholdConfig::default();
        assert_abs_diff_eq!(frequency_effect_threshold(&[7, 7, 7], &cfg), 7.0);
        assert_abs_diff_eq!(frequency_effect_threshold(&[0, 10], &cfg), 5.0 + 0.2 * 50f64.sqrt(), epsilon = 1e-12);
    }

    #[test]
    fn bonferroni_cases() {
        assert_eq!(bonferroni(&[0.001, 0.04], 0.05), vec![true, false]);
        assert_eq!(bonferroni(&[0.049], 0.05), vec![true]);
        assert_eq!(bonferroni(&[1.0, 1.0, 1.0], 0.05), vec![false; 3]);
    }

    proptest! {
        #[test]
        fn ccc_symmetric_and_self_one(x in prop::collection::vec(-5.0f64..5.0, 3..30), c in 0.1f64..3.0) {
            prop_assume!(sd_sample(&x) > 1e-3);
            let y: Vec<f64> = x.iter().rev().copied().collect();
            prop_assert!((ccc(&x, &y).unwrap() - ccc(&y, &x).unwrap()).abs() < 1e-12);
            prop_assert!((ccc(&x, &x).unwrap() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = x.iter().map(|v| v + c).collect();
            prop_assert!(ccc(&x, &shifted).unwrap() < 1.0);
            prop_assert!((pcc(&x, &shifted).unwrap().r - 1.0).abs() < 1e-9);
        }

        #[test]
        fn fisher_is_odd(r in -0.999f64..0.999) {
            prop_assert!((fisher_z(-r).unwrap() + fisher_z(r).unwrap()).abs() < 1e-12);
        }

        #[test]
        fn p_value_monotone_in_abs_r(a in 0.0f64..0.99, b in 0.0f64..0.99, n in 3usize..200) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            prop_assert!(pcc_p_value(hi, n) <= pcc_p_value(lo, n) + 1e-15);
        }
    }
}

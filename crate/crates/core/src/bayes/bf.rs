use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::design::Design;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Evidence {
    Inconclusive,
    Moderate,
    Strong,
    Decisive,
}

impl Evidence {
    /// Bands at 3, 10 and 100.
    pub fn of(bf: f64) -> Self {
        match bf {
            b if b >= 100.0 => Evidence::Decisive,
            b if b >= 10.0 => Evidence::Strong,
            b if b >= 3.0 => Evidence::Moderate,
            _ => Evidence::Inconclusive,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    #[serde(rename = "BF10")]
    Bf10,
    #[serde(rename = "BF01")]
    Bf01,
}

/// Evidence for (BF10) or against (BF01) including a block of columns.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BayesFactor {
    pub log_bf10: f64,
    /// Whichever side exceeds 1.
    pub side: Side,
    pub value: f64,
    pub evidence: Evidence,
}

impl BayesFactor {
    pub fn from_log(log_bf10: f64) -> Self {
        let (side, value) = if log_bf10 >= 0.0 { (Side::Bf10, log_bf10.exp()) } else { (Side::Bf01, (-log_bf10).exp()) };
        BayesFactor {
            log_bf10,
            side,
            value,
            evidence: Evidence::of(value),
        }
    }

    pub fn bf10(&self) -> f64 {
        self.log_bf10.exp()
    }

    pub fn bf01(&self) -> f64 {
        (-self.log_bf10).exp()
    }
}

fn r_squared(design: &Design, columns: &[usize]) -> Result<f64> {
    let y = DVector::from_column_slice(&design.y);
    let mean = y.mean();
    let sst: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if !(sst > 0.0) {
        return Err(Error::DegenerateInput("response has zero variance"));
    }
    let x = DMatrix::from_fn(design.n(), columns.len(), |i, j| design.x[(i, columns[j])]);
    let beta = x.clone().svd(true, true).solve(&y, 1e-12).map_err(|_| Error::DegenerateInput("least squares failed"))?;
    let resid = &y - &x * beta;
    Ok((1.0 - resid.dot(&resid) / sst).clamp(0.0, 1.0))
}

/// Log Bayes factor of a model with `p` predictors and fit `r2` against the
/// intercept-only model under Zellner's g-prior.
fn log_bf_null(r2: f64, n: usize, p: usize, g: f64) -> f64 {
    let n = n as f64;
    0.5 * (n - 1.0 - p as f64) * g.ln_1p() - 0.5 * (n - 1.0) * (g * (1.0 - r2)).ln_1p()
}

/// Compares the full design with the design lacking `drop`, under a
/// unit-information g-prior (`g = n`) on the non-intercept coefficients.
pub fn bf_columns(design: &Design, drop: &[usize]) -> Result<BayesFactor> {
    if drop.is_empty() || drop.iter().any(|&c| c == 0 || c >= design.n_columns()) {
        return Err(Error::DegenerateInput("dropped columns must be non-intercept design columns"));
    }
    let n = design.n();
    let full: Vec<usize> = (0..design.n_columns()).collect();
    let reduced: Vec<usize> = full.iter().copied().filter(|c| !drop.contains(c)).collect();
    if n <= full.len() {
        return Err(Error::shape(format!("more than {} observations", full.len()), n));
    }
    let g = n as f64;
    let l1 = log_bf_null(r_squared(design, &full)?, n, full.len() - 1, g);
    let l0 = if reduced.len() > 1 { log_bf_null(r_squared(design, &reduced)?, n, reduced.len() - 1, g) } else { 0.0 };
    Ok(BayesFactor::from_log(l1 - l0))
}

pub fn bf_effect(design: &Design, block: &str) -> Result<BayesFactor> {
    let b = design.block(block).ok_or_else(|| Error::ConfigInvalid(format!("unknown effect `{block}`")))?;
    bf_columns(design, &b.columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::posterior::tests::synthetic;

    // Columns: intercept, a[a0], a[a1], b[b0], a:b[a0:b0], a:b[a1:b0].
    #[test]
    fn one_sd_block_effect_is_decisive() {
        let d = synthetic(&[0.0, 0.0, 0.0, 1.0, 0.0, 0.0], 1.0, 15, 21);
        let bf = bf_effect(&d, "b").unwrap();
        assert_eq!(bf.side, Side::Bf10);
        assert!(bf.value > 100.0, "{bf:?}");
        assert_eq!(bf.evidence, Evidence::Decisive);
    }

    #[test]
    fn null_block_supports_exclusion() {
        let d = synthetic(&[0.3, 0.5, -0.4, 0.8, 0.0, 0.0], 1.0, 15, 4);
        let bf = bf_effect(&d, "a:b").unwrap();
        assert_eq!(bf.side, Side::Bf01);
        assert!(bf.value > 3.0, "{bf:?}");
    }

    #[test]
    fn reciprocal_sides_multiply_to_one() {
        for seed in 0..5 {
            let d = synthetic(&[0.1, 0.2, 0.1, 0.3, 0.1, 0.0], 1.0, 10, seed);
            for b in ["a", "b", "a:b"] {
                let bf = bf_effect(&d, b).unwrap();
                assert!((bf.bf10() * bf.bf01() - 1.0).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn evidence_bands() {
        assert_eq!(Evidence::of(2.9), Evidence::Inconclusive);
        assert_eq!(Evidence::of(3.0), Evidence::Moderate);
        assert_eq!(Evidence::of(10.0), Evidence::Strong);
        assert_eq!(Evidence::of(1000.0), Evidence::Decisive);
    }
}

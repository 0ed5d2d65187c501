use serde::{Deserialize, Serialize};

use super::posterior::{NigPosterior, TDist};
use crate::error::{Error, Result};

/// Region of practical equivalence around zero, set on the correlation
/// scale and applied on the Fisher-z scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RopeSpec {
    pub half_width_ccc: f64,
}

impl Default for RopeSpec {
    fn default() -> Self {
        RopeSpec { half_width_ccc: 0.1 }
    }
}

impl RopeSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.half_width_ccc > 0.0 && self.half_width_ccc < 1.0) {
            return Err(Error::RangeViolation {
                context: "ROPE half width".into(),
                value: self.half_width_ccc,
                range: "(0, 1)",
            });
        }
        Ok(())
    }

    pub fn bound_z(&self) -> f64 {
        self.half_width_ccc.atanh()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RopeDecision {
    /// Equivalence BF of at least 3, median inside the ROPE.
    Equivalent,
    /// Evidence of at least 3 against the ROPE, median above it.
    Superior,
    Inferior,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RopeResult {
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub p_in: f64,
    pub prior_p_in: f64,
    /// Posterior over prior odds of lying inside the ROPE.
    pub bf_rope: f64,
    pub decision: RopeDecision,
}

impl RopeResult {
    /// Evidence in the usual reporting form: BF01 for equivalence, BF10
    /// otherwise.
    pub fn reported_bf(&self) -> (&'static str, f64) {
        if self.bf_rope >= 1.0 {
            ("BF01", self.bf_rope)
        } else {
            ("BF10", 1.0 / self.bf_rope)
        }
    }
}

/// Probability mass outside `[-b, b]`, kept away from zero.
fn mass_outside(t: &TDist, b: f64) -> f64 {
    (t.cdf(-b) + t.sf(b)).clamp(1e-300, 1.0)
}

pub fn rope_from(post: TDist, prior: TDist, rope: &RopeSpec) -> Result<RopeResult> {
    rope.validate()?;
    let b = rope.bound_z();
    let out = mass_outside(&post, b);
    let prior_out = mass_outside(&prior, b);
    let (p_in, prior_p_in) = (1.0 - out, 1.0 - prior_out);
    let bf_rope = ((1.0 - out) / out) / ((1.0 - prior_out).max(1e-300) / prior_out);
    let median = post.location;
    // A wide prior puts so little mass inside the ROPE that the odds ratio
    // can favour it while most of the posterior lies outside; each verdict
    // also needs the median on its side of the bound.
    let decision = if bf_rope >= 3.0 && median.abs() <= b {
        RopeDecision::Equivalent
    } else if bf_rope <= 1.0 / 3.0 && median > b {
        RopeDecision::Superior
    } else if bf_rope <= 1.0 / 3.0 && median < -b {
        RopeDecision::Inferior
    } else {
        RopeDecision::Inconclusive
    };
    Ok(RopeResult {
        median,
        ci_low: post.quantile(0.025),
        ci_high: post.quantile(0.975),
        p_in,
        prior_p_in,
        bf_rope,
        decision,
    })
}

/// ROPE analysis of the contrast `c · beta`.
pub fn rope_contrast(post: &NigPosterior, contrast: &[f64], rope: &RopeSpec) -> Result<RopeResult> {
    if contrast.len() != post.mean.len() {
        return Err(Error::shape(format!("{} contrast weights", post.mean.len()), contrast.len()));
    }
    rope_from(post.contrast(contrast), post.prior_contrast(contrast), rope)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn tight(location: f64) -> TDist {
        TDist { location, scale: 0.02, df: 80.0 }
    }

    fn wide() -> TDist {
        TDist { location: 0.0, scale: 2.0, df: 2.0 }
    }

    #[test]
    fn bounds_are_fisher_z_of_point_one() {
        assert!((RopeSpec::default().bound_z() - 0.100_335).abs() < 1e-6);
    }

    #[test]
    fn clear_effect_is_superior() {
        let r = rope_from(tight(0.5), wide(), &RopeSpec::default()).unwrap();
        assert!(r.p_in < 1e-6);
        assert_eq!(r.decision, RopeDecision::Superior);
        assert!(r.reported_bf().1 > 100.0);
    }

    #[test]
    fn null_effect_is_equivalent() {
        let r = rope_from(tight(0.0), wide(), &RopeSpec::default()).unwrap();
        assert!(r.p_in > 0.999);
        assert_eq!(r.decision, RopeDecision::Equivalent);
        assert_eq!(r.reported_bf().0, "BF01");
        assert!(r.ci_low <= r.median && r.median <= r.ci_high);
    }

    #[test]
    fn odds_gain_outside_the_rope_is_not_equivalence() {
        // Posterior mostly above the bound, prior nearly all outside it.
        let prior = TDist { location: 0.0, scale: 40.0, df: 2.0 };
        let r = rope_from(TDist { location: 0.26, scale: 0.077, df: 144.0 }, prior, &RopeSpec::default()).unwrap();
        assert!(r.bf_rope >= 3.0 && r.p_in < 0.05);
        assert_eq!(r.decision, RopeDecision::Inconclusive);
    }

    #[test]
    fn invalid_rope_is_rejected() {
        assert!(rope_from(tight(0.0), wide(), &RopeSpec { half_width_ccc: 0.0 }).is_err());
    }

    proptest! {
        #[test]
        fn p_in_decreases_with_effect_size(a in 0.0f64..0.6, d in 0.001f64..0.6, scale in 0.01f64..0.3) {
            let r1 = rope_from(TDist { location: a, scale, df: 30.0 }, wide(), &RopeSpec::default()).unwrap();
            let r2 = rope_from(TDist { location: a + d, scale, df: 30.0 }, wide(), &RopeSpec::default()).unwrap();
            prop_assert!(r2.p_in <= r1.p_in + 1e-12);
            prop_assert!((0.0..=1.0).contains(&r1.p_in));
        }
    }
}

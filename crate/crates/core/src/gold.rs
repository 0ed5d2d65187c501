//! Gold standards: fusing several annotators into one training target.
//!
//! Label intensities and dimension summaries are averaged over annotators.
//! Time-continuous dimension traces are fused with the Evaluator Weighted
//! Estimator: each annotator is weighted by the correlation of its trace
//! with the mean of the other annotators' traces.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DimensionId, LabelId, Sequence, TimeSeries};
use crate::error::{Error, Result};
use crate::stats::pcc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "target")]
pub enum GoldTask {
    LabelIntensity(LabelId),
    DimSummary(DimensionId),
    DimContinuous(DimensionId),
}

impl std::fmt::Display for GoldTask {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            GoldTask::LabelIntensity(l) => write!(f, "label_intensity:{l}"),
            GoldTask::DimSummary(d) => write!(f, "dim_summary:{d}"),
            GoldTask::DimContinuous(d) => write!(f, "dim_continuous:{d}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Fused {
    Scalar(f64),
    Trace(TimeSeries),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldStandard {
    pub task: GoldTask,
    /// One scalar per annotator (static tasks).
    pub per_annotator: Vec<f64>,
    pub fused: Fused,
    /// Present for continuous tasks only.
    pub ewe_weights: Option<EweWeights>,
}

pub fn mean_gold(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "mean_gold needs at least one value");
    values.iter().sum::<f64>() / values.len() as f64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EweWeights {
    pub weights: Vec<f64>,
    /// Set when no annotator had a positive consensus correlation and
    /// uniform weights were used instead.
    pub uniform_fallback: bool,
}

/// Strategy for weighting raters when fusing aligned traces.
pub trait RaterWeighting {
    fn weights(&self, traces: &[&[f64]]) -> Result<EweWeights>;
}

/// Correlation with the mean of the other raters, negatives clipped to 0,
/// normalized to sum to 1.
#[derive(Debug, Clone, Copy, Default)]
pub struct ConsensusCorrelation;

impl RaterWeighting for ConsensusCorrelation {
    fn weights(&self, traces: &[&[f64]]) -> Result<EweWeights> {
        let k = traces.len();
        if k < 2 {
            return Err(Error::shape("at least 2 traces", k));
        }
        let len = traces[0].len();
        if traces.iter().any(|t| t.len() != len) {
            return Err(Error::shape(format!("aligned traces of length {len}"), "ragged traces"));
        }
        let total: Vec<f64> = (0..len).map(|t| traces.iter().map(|tr| tr[t]).sum()).collect();
        let mut r = Vec::with_capacity(k);
        for tr in traces {
            let others: Vec<f64> = total
                .iter()
                .zip(tr.iter())
                .map(|(s, v)| (s - v) / (k - 1) as f64)
                .collect();
            let rk = pcc(tr, &others).map(|c| c.r).unwrap_or(0.0);
            r.push(if rk.is_finite() && rk > 0.0 { rk } else { 0.0 });
        }
        let sum: f64 = r.iter().sum();
        if sum <= 0.0 {
            return Ok(EweWeights {
                weights: vec![1.0 / k as f64; k],
                uniform_fallback: true,
            });
        }
        Ok(EweWeights {
            weights: r.iter().map(|v| v / sum).collect(),
            uniform_fallback: false,
        })
    }
}

pub fn ewe_weights(traces: &[&[f64]]) -> Result<EweWeights> {
    ConsensusCorrelation.weights(traces)
}

/// Pointwise weighted sum of aligned traces.
pub fn weighted_trace(traces: &[&[f64]], weights: &[f64]) -> Vec<f64> {
    let len = traces.first().map_or(0, |t| t.len());
    (0..len)
        .map(|t| traces.iter().zip(weights).map(|(tr, w)| w * tr[t]).sum())
        .collect()
}

pub fn ewe_gold(traces: &[&[f64]]) -> Result<(Vec<f64>, EweWeights)> {
    let w = ewe_weights(traces)?;
    Ok((weighted_trace(traces, &w.weights), w))
}

/// Linear interpolation of `values` sampled at `from_hz` onto `n` samples at
/// `to_hz`, holding the last value past the end.
pub fn resample_linear(values: &[f64], from_hz: f64, to_hz: f64, n: usize) -> Vec<f64> {
    let last = values.len().saturating_sub(1);
    (0..n)
        .map(|i| {
            let pos = i as f64 / to_hz * from_hz;
            let lo = (pos.floor() as usize).min(last);
            let hi = (lo + 1).min(last);
            let frac = (pos - lo as f64).clamp(0.0, 1.0);
            values[lo] * (1.0 - frac) + values[hi] * frac
        })
        .collect()
}

/// Resamples traces to `target_rate` over their common time span, clipped
/// to [-1, 1].
pub fn align_traces(traces: &[&TimeSeries], target_rate: f64) -> Result<Vec<TimeSeries>> {
    if traces.iter().any(|t| t.len() < 2) {
        return Err(Error::shape("traces with at least 2 samples", "shorter trace"));
    }
    let span = traces.iter().map(|t| t.span_s()).fold(f64::INFINITY, f64::min);
    if !span.is_finite() || span * target_rate < 1.0 - 1e-9 {
        return Err(Error::EmptyOverlap);
    }
    let n = (span * target_rate + 1e-9).floor() as usize + 1;
    Ok(traces
        .iter()
        .map(|t| {
            let values = if (t.sample_rate_hz - target_rate).abs() < 1e-12 {
                t.values[..n].to_vec()
            } else {
                resample_linear(&t.values, t.sample_rate_hz, target_rate, n)
            };
            TimeSeries::new(target_rate, values.into_iter().map(|v| v.clamp(-1.0, 1.0)).collect())
        })
        .collect())
}

/// Gold standard of one task on one sequence.
pub fn gold_for_sequence(seq: &Sequence, task: GoldTask, trace_rate: f64) -> Result<GoldStandard> {
    let ann = &seq.annotations;
    match task {
        GoldTask::LabelIntensity(l) => {
            let v = ann.intensities(l);
            Ok(GoldStandard {
                task,
                fused: Fused::Scalar(mean_gold(&v)),
                per_annotator: v,
                ewe_weights: None,
            })
        }
        GoldTask::DimSummary(d) => {
            let v = ann.summaries(d);
            Ok(GoldStandard {
                task,
                fused: Fused::Scalar(mean_gold(&v)),
                per_annotator: v,
                ewe_weights: None,
            })
        }
        GoldTask::DimContinuous(d) => {
            let aligned = align_traces(&ann.traces(d), trace_rate)?;
            let refs: Vec<&[f64]> = aligned.iter().map(|t| t.values.as_slice()).collect();
            let (fused, w) = ewe_gold(&refs)?;
            Ok(GoldStandard {
                task,
                per_annotator: Vec::new(),
                fused: Fused::Trace(TimeSeries::new(trace_rate, fused)),
                ewe_weights: Some(w),
            })
        }
    }
}

/// Gold-standard cache as CSV: `corpus_id,sequence_id,task,index,value`.
/// Static tasks write one row with index 0; traces write one row per sample.
pub fn gold_cache_csv(c: &Corpus, tasks: &[GoldTask]) -> Result<String> {
    let mut out = String::from("corpus_id,sequence_id,task,index,value\n");
    for task in tasks {
        for seq in &c.sequences {
            let g = gold_for_sequence(seq, *task, c.trace_rate_hz)?;
            match &g.fused {
                Fused::Scalar(v) => {
                    let _ = writeln!(out, "{},{},{task},0,{v}", c.corpus_id, seq.sequence_id);
                }
                Fused::Trace(ts) => {
                    for (i, v) in ts.values.iter().enumerate() {
                        let _ = writeln!(out, "{},{},{task},{i},{v}", c.corpus_id, seq.sequence_id);
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn refs(v: &[Vec<f64>]) -> Vec<&[f64]> {
        v.iter().map(|t| t.as_slice()).collect()
    }

    #[test]
    fn mean_gold_cases() {
        assert_eq!(mean_gold(&[0.0; 6]), 0.0);
        assert_eq!(mean_gold(&[1.0; 6]), 1.0);
        assert_abs_diff_eq!(mean_gold(&[0.0, 0.2, 0.4, 0.6, 0.8, 1.0]), 0.5, epsilon = 1e-15);
    }

    #[test]
    fn identical_traces_get_uniform_weights_and_identity_fusion() {
        let t: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin() * 0.7).collect();
        let traces = vec![t.clone(); 6];
        let (fused, w) = ewe_gold(&refs(&traces)).unwrap();
        for wk in &w.weights {
            assert_abs_diff_eq!(*wk, 1.0 / 6.0, epsilon = 1e-15);
        }
        for (a, b) in fused.iter().zip(&t) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-15);
        }
    }

    #[test]
    fn anti_correlated_annotator_gets_zero() {
        let t: Vec<f64> = (0..40).map(|i| (i as f64 * 0.2).sin() * 0.5).collect();
        let neg: Vec<f64> = t.iter().map(|v| -v).collect();
        let traces = vec![t.clone(), t.clone(), t.clone(), neg];
        let w = ewe_weights(&refs(&traces)).unwrap();
        assert_eq!(w.weights[3], 0.0);
        assert!(!w.uniform_fallback);
    }

    #[test]
    fn constant_traces_fall_back_to_uniform() {
        let traces = vec![vec![0.2; 10]; 3];
        let w = ewe_weights(&refs(&traces)).unwrap();
        assert!(w.uniform_fallback);
        assert_eq!(w.weights, vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn noise_annotator_weight_is_small() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let n = Normal::new(0.0, 1.0).unwrap();
        let signal: Vec<f64> = (0..2000).map(|i| (i as f64 * 0.05).sin()).collect();
        let mut traces: Vec<Vec<f64>> = (0..5)
            .map(|_| signal.iter().map(|s| s + 0.3 * n.sample(&mut rng)).collect())
            .collect();
        traces.push((0..2000).map(|_| n.sample(&mut rng)).collect());
        let w = ewe_weights(&refs(&traces)).unwrap();
        assert!(w.weights[5] < 0.05, "{:?}", w.weights);
    }

    #[test]
    fn ewe_gold_matches_direct_weighted_sum() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let traces: Vec<Vec<f64>> = (0..4).map(|_| (0..30).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        let (fused, w) = ewe_gold(&refs(&traces)).unwrap();
        for t in 0..30 {
            let mut direct = 0.0;
            for k in 0..4 {
                direct += w.weights[k] * traces[k][t];
            }
            assert_abs_diff_eq!(fused[t], direct, epsilon = 1e-12);
        }
        let one_hot = weighted_trace(&refs(&traces), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(one_hot, traces[0]);
    }

    #[test]
    fn align_cases() {
        let t = TimeSeries::new(10.0, vec![0.0, 0.1, 0.2, 0.3]);
        let same = align_traces(&[&t], 10.0).unwrap();
        assert_eq!(same[0].values, t.values);

        let up = align_traces(&[&t], 20.0).unwrap();
        assert_eq!(up[0].len(), 7);
        for i in 0..3 {
            assert_abs_diff_eq!(up[0].values[2 * i + 1], 0.5 * (t.values[i] + t.values[i + 1]), epsilon = 1e-12);
        }

        let c = TimeSeries::new(7.0, vec![0.4; 15]);
        for v in &align_traces(&[&c], 25.0).unwrap()[0].values {
            assert_abs_diff_eq!(*v, 0.4, epsilon = 1e-15);
        }

        let short = TimeSeries::new(100.0, vec![0.0, 0.0]);
        assert!(matches!(align_traces(&[&t, &short], 10.0), Err(Error::EmptyOverlap)));
    }

    proptest! {
        #[test]
        fn ewe_invariants(seed in any::<u64>(), k in 2usize..7, len in 5usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let base: Vec<f64> = (0..len).map(|_| rng.random::<f64>() - 0.5).collect();
            let traces: Vec<Vec<f64>> = (0..k)
                .map(|_| base.iter().map(|b| (b + 0.5 * (rng.random::<f64>() - 0.5)).clamp(-1.0, 1.0)).collect())
                .collect();
            let (fused, w) = ewe_gold(&refs(&traces)).unwrap();
            prop_assert!((w.weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert!(w.weights.iter().all(|v| *v >= 0.0));
            for t in 0..len {
                let lo = traces.iter().map(|tr| tr[t]).fold(f64::INFINITY, f64::min);
                let hi = traces.iter().map(|tr| tr[t]).fold(f64::NEG_INFINITY, f64::max);
                prop_assert!(fused[t] >= lo - 1e-12 && fused[t] <= hi + 1e-12);
            }
            // Reversing annotator order permutes the weights accordingly.
            let rev: Vec<Vec<f64>> = traces.iter().rev().cloned().collect();
            let wr = ewe_weights(&refs(&rev)).unwrap();
            for i in 0..k {
                prop_assert!((w.weights[i] - wr.weights[k - 1 - i]).abs() < 1e-12);
            }
            // Duplicating annotator 0 never lowers its combined share.
            let mut dup = traces.clone();
            dup.push(traces[0].clone());
            let wd = ewe_weights(&refs(&dup)).unwrap();
            if !w.uniform_fallback && !wd.uniform_fallback {
                prop_assert!(wd.weights[0] + wd.weights[k] >= w.weights[0] - 1e-12);
            }
        }
    }
}

//! Gold standards: mean fusion of static ratings and evaluator-weighted
//! fusion of continuous traces, including a noisy annotator whose weight
//! collapses.

use affect_eval::corpus::{DimensionId, LabelId};
use affect_eval::gold::{ewe_gold, gold_for_sequence, Fused, GoldTask};
use affect_eval::synth::{generate_pair, SynthConfig};

fn main() -> affect_eval::Result<()> {
    let mut cfg = SynthConfig {
        n_subjects: 5,
        ..SynthConfig::default()
    };
    // Annotator 6 is ten times as noisy as the others.
    cfg.annotator_noise_scale = vec![1.0, 1.0, 1.0, 1.0, 1.0, 10.0];
    let (young, _) = generate_pair(&cfg)?;
    let seq = &young.sequences[0];

    let label = gold_for_sequence(seq, GoldTask::LabelIntensity(LabelId::Relaxed), young.trace_rate_hz)?;
    if let Fused::Scalar(v) = label.fused {
        println!("relaxed intensity per annotator {:?} -> gold {v:.3}", label.per_annotator);
    }

    let dim = DimensionId::ALL[1];
    let trace = gold_for_sequence(seq, GoldTask::DimContinuous(dim), young.trace_rate_hz)?;
    if let (Fused::Trace(ts), Some(w)) = (&trace.fused, &trace.ewe_weights) {
        let weights: Vec<String> = w.weights.iter().map(|v| format!("{v:.3}")).collect();
        println!("{dim} trace: {} samples, EWE weights [{}]", ts.len(), weights.join(", "));
    }

    // Three identical raters and one opposed rater.
    let base = [0.0, 0.2, 0.5, 0.3, -0.1, -0.4];
    let flipped: Vec<f64> = base.iter().map(|v| -v).collect();
    let (fused, w) = ewe_gold(&[&base, &base, &base, &flipped])?;
    let gap = fused.iter().zip(&base).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    println!("opposed rater weight {:.3}, largest gap to the agreeing raters {gap:.1e}", w.weights[3]);
    Ok(())
}

//! Trains the three-layer GRU on time-continuous audio features of one
//! appraisal dimension and saves the checkpoint.

use affect_eval::corpus::{DimensionId, FeatureKind, Modality};
use affect_eval::gold::{gold_for_sequence, Fused, GoldTask};
use affect_eval::nn::{predict_continuous, train_continuous, ContinuousSample, GruConfig, ModelCheckpoint, TrainConfig};
use affect_eval::stats::ccc;
use affect_eval::synth::{generate_pair, SynthConfig};

fn main() -> affect_eval::Result<()> {
    let cfg = SynthConfig {
        n_subjects: 8,
        ..SynthConfig::default()
    };
    let (young, _) = generate_pair(&cfg)?;
    let task = GoldTask::DimContinuous(DimensionId::ALL[1]);
    let mut samples = Vec::new();
    for seq in &young.sequences {
        let Fused::Trace(gold) = gold_for_sequence(seq, task, young.trace_rate_hz)?.fused else { unreachable!("traces") };
        let fm = seq.feature(Modality::Audio, FeatureKind::Deep).expect("audio features");
        // Features share the trace rate in the synthetic corpus.
        let n = gold.len().min(fm.n_frames);
        samples.push(ContinuousSample {
            frames: fm.data[..n * fm.dim].to_vec(),
            n_frames: n,
            gold: gold.values[..n].to_vec(),
        });
    }
    let test = samples.split_off(samples.len() - 10);
    let val = samples.split_off(samples.len() - 10);
    let d = samples[0].frames.len() / samples[0].n_frames;

    let tcfg = TrainConfig {
        max_epochs: 15,
        ..TrainConfig::continuous_task(1)
    };
    let ck = train_continuous(GruConfig::for_features(d, FeatureKind::Deep), &samples, &val, &tcfg, None, None)?;
    let (mut pred, mut gold) = (Vec::new(), Vec::new());
    for s in &test {
        pred.extend(predict_continuous(&ck, &s.frames, s.n_frames)?);
        gold.extend_from_slice(&s.gold);
    }
    println!("best epoch {} of {}, test CCC {:.3}", ck.best_epoch, ck.log.len(), ccc(&pred, &gold)?);

    let path = std::env::temp_dir().join("affect_eval_gru.json");
    ck.save(&path)?;
    let back = ModelCheckpoint::load(&path)?;
    println!("checkpoint round trip ok: {}", back == ck);
    Ok(())
}

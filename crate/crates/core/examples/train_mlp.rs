//! Trains the static regressor on pooled text features of one label and
//! reports the per-epoch log and held-out CCC.

use affect_eval::corpus::{FeatureKind, LabelId, Modality};
use affect_eval::gold::{gold_for_sequence, Fused, GoldTask};
use affect_eval::nn::{predict_static, train_static, MlpConfig, StaticSample, TrainConfig};
use affect_eval::stats::ccc;
use affect_eval::synth::{generate_pair, SynthConfig};

fn main() -> affect_eval::Result<()> {
    let (young, _) = generate_pair(&SynthConfig::default())?;
    let task = GoldTask::LabelIntensity(LabelId::Relaxed);
    let mut samples = Vec::new();
    for seq in &young.sequences {
        let g = gold_for_sequence(seq, task, young.trace_rate_hz)?;
        let Fused::Scalar(gold) = g.fused else { unreachable!("label golds are scalar") };
        let x = seq.feature(Modality::Text, FeatureKind::Deep).expect("text features").mean_pooled();
        samples.push((seq.subject_id.clone(), StaticSample { x, y: g.per_annotator, gold }));
    }
    // Subjects 0-13 train, 14-16 validate, 17-19 test.
    let group = |s: &str| young.subjects.iter().position(|x| x == s).unwrap_or(0);
    let pick = |lo: usize, hi: usize| -> Vec<StaticSample> {
        samples.iter().filter(|(s, _)| (lo..hi).contains(&group(s))).map(|(_, x)| x.clone()).collect()
    };
    let (train, val, test) = (pick(0, 14), pick(14, 17), pick(17, 20));

    let d = train[0].x.len();
    let ck = train_static(MlpConfig::new(d, train[0].y.len()), &train, &val, &TrainConfig::static_task(1))?;
    for e in &ck.log {
        println!("epoch {:2}  loss {:.4}  val ccc {}", e.epoch, e.train_loss, e.val_ccc.map_or("NA".into(), |v| format!("{v:.3}")));
    }
    let pred: Vec<f64> = test
        .iter()
        .map(|s| predict_static(&ck, &s.x).map(|o| o.iter().sum::<f64>() / o.len() as f64))
        .collect::<affect_eval::Result<_>>()?;
    let gold: Vec<f64> = test.iter().map(|s| s.gold).collect();
    println!("best epoch {}, test CCC {:.3}", ck.best_epoch, ccc(&pred, &gold)?);
    Ok(())
}

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use super::{config_hash, Cell, ExperimentPlan, ExperimentResult, ExperimentSpec, ResultMeta, Strategy, Target, CROSS_VALIDATION_GROUPS};
use crate::corpus::{corpus_hash, Corpus, FoldAssignment, Sequence};
use crate::error::{Error, Result};
use crate::fusion::{apply_continuous_fusion, apply_static_fusion, fit_continuous_fusion, fit_static_fusion, Split, Tagged};
use crate::gold::{gold_for_sequence, resample_linear, Fused, GoldTask};
use crate::nn::{
    predict_continuous, predict_static, train_continuous, train_static, ContinuousSample, GruConfig, MlpConfig, ModelCheckpoint, StaticSample,
    TrainConfig,
};
use crate::stats::ccc;

/// Model inputs and gold values of one sequence for one spec.
struct Item {
    /// Index into the corpora of the run.
    corpus: usize,
    subject: String,
    /// Per modality: pooled features, or `n_frames x D` frames at the trace rate.
    x: Vec<Vec<f64>>,
    n_frames: usize,
    /// Per target: per-annotator values (static representations only).
    y: Vec<Vec<f64>>,
    /// Per target: one fused value, or the fused trace.
    gold: Vec<Vec<f64>>,
}

fn gold_task(target: Target, continuous: bool) -> GoldTask {
    match (target, continuous) {
        (Target::Label(l), _) => GoldTask::LabelIntensity(l),
        (Target::Dimension(d), false) => GoldTask::DimSummary(d),
        (Target::Dimension(d), true) => GoldTask::DimContinuous(d),
    }
}

fn prepare_sequence(corpus: usize, c: &Corpus, seq: &Sequence, spec: &ExperimentSpec, targets: &[Target]) -> Result<Item> {
    let continuous = spec.representation.is_continuous();
    let mut y = Vec::with_capacity(targets.len());
    let mut gold = Vec::with_capacity(targets.len());
    for &t in targets {
        let g = gold_for_sequence(seq, gold_task(t, continuous), c.trace_rate_hz)?;
        y.push(g.per_annotator);
        gold.push(match g.fused {
            Fused::Scalar(v) => vec![v],
            Fused::Trace(ts) => ts.values,
        });
    }
    // Continuous golds share the shortest common length.
    let n_frames = if continuous { gold.iter().map(Vec::len).min().unwrap_or(0) } else { 1 };
    if continuous {
        gold.iter_mut().for_each(|g| g.truncate(n_frames));
    }
    let mut x = Vec::with_capacity(spec.modalities.len());
    for &m in &spec.modalities {
        let fm = seq.feature(m, spec.kind).ok_or_else(|| {
            Error::ConfigInvalid(format!("sequence `{}` of `{}` has no {m} {} features", seq.sequence_id, c.corpus_id, spec.kind))
        })?;
        if !continuous {
            x.push(fm.mean_pooled());
            continue;
        }
        if fm.frame_rate_hz == 0.0 {
            // A pooled vector is held constant over the trace.
            x.push(fm.data.iter().copied().cycle().take(n_frames * fm.dim).collect());
            continue;
        }
        let same_rate = (fm.frame_rate_hz - c.trace_rate_hz).abs() < 1e-12;
        if same_rate && fm.n_frames >= n_frames {
            x.push(fm.data[..n_frames * fm.dim].to_vec());
            continue;
        }
        let cols: Vec<Vec<f64>> = (0..fm.dim)
            .map(|j| {
                let col: Vec<f64> = fm.frames().map(|f| f[j]).collect();
                resample_linear(&col, fm.frame_rate_hz, c.trace_rate_hz, n_frames)
            })
            .collect();
        x.push((0..n_frames).flat_map(|t| cols.iter().map(move |col| col[t])).collect());
    }
    Ok(Item {
        corpus,
        subject: seq.subject_id.clone(),
        x,
        n_frames,
        y,
        gold,
    })
}

fn prepare(corpus: usize, c: &Corpus, spec: &ExperimentSpec, targets: &[Target]) -> Result<Vec<Item>> {
    c.sequences.iter().map(|s| prepare_sequence(corpus, c, s, spec, targets)).collect()
}

/// Indices into the item list.
struct Partition {
    train: Vec<usize>,
    val: Vec<usize>,
    test: Vec<usize>,
}

/// Per target and channel, one prediction vector per test item.
type Predictions = Vec<Vec<std::result::Result<Vec<Vec<f64>>, String>>>;

fn static_samples(items: &[Item], idx: &[usize], m: usize, t: usize) -> Vec<StaticSample> {
    idx.iter()
        .map(|&i| StaticSample {
            x: items[i].x[m].clone(),
            y: items[i].y[t].clone(),
            gold: items[i].gold[t][0],
        })
        .collect()
}

fn continuous_samples(items: &[Item], idx: &[usize], m: usize, t: usize) -> Vec<ContinuousSample> {
    idx.iter()
        .map(|&i| ContinuousSample {
            frames: items[i].x[m].clone(),
            n_frames: items[i].n_frames,
            gold: items[i].gold[t].clone(),
        })
        .collect()
}

/// Unimodal predictions on the train, validation and test items.
struct Unimodal {
    train: Vec<Vec<f64>>,
    val: Vec<Vec<f64>>,
    test: Vec<Vec<f64>>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn fit_unimodal(spec: &ExperimentSpec, items: &[Item], p: &Partition, m: usize, t: usize, seed: u64) -> Result<Unimodal> {
    if spec.representation.is_continuous() {
        let (tr, va) = (continuous_samples(items, &p.train, m, t), continuous_samples(items, &p.val, m, t));
        let d = tr.first().map(|s| s.frames.len() / s.n_frames.max(1)).unwrap_or(0);
        let ck = train_continuous(GruConfig::for_features(d, spec.kind), &tr, &va, &TrainConfig::continuous_task(seed), None, None)?;
        let predict = |idx: &[usize]| -> Result<Vec<Vec<f64>>> {
            idx.iter().map(|&i| predict_continuous(&ck, &items[i].x[m], items[i].n_frames)).collect()
        };
        // Training-set predictions feed the temporal fusion layer only.
        let train = if spec.multimodal { predict(&p.train)? } else { Vec::new() };
        Ok(Unimodal {
            train,
            val: predict(&p.val)?,
            test: predict(&p.test)?,
        })
    } else {
        let (tr, va) = (static_samples(items, &p.train, m, t), static_samples(items, &p.val, m, t));
        let (d, k) = tr.first().map(|s| (s.x.len(), s.y.len())).unwrap_or((0, 0));
        let ck = train_static(MlpConfig::new(d, k), &tr, &va, &TrainConfig::static_task(seed))?;
        let predict = |idx: &[usize]| -> Result<Vec<Vec<f64>>> {
            idx.iter().map(|&i| predict_static(&ck, &items[i].x[m]).map(|o| vec![mean(&o)])).collect()
        };
        Ok(Unimodal {
            train: Vec::new(),
            val: predict(&p.val)?,
            test: predict(&p.test)?,
        })
    }
}

/// Row-major `n x M` frames from M aligned prediction traces.
fn interleave(streams: &[&Vec<f64>]) -> Vec<f64> {
    let n = streams[0].len();
    (0..n).flat_map(|t| streams.iter().map(move |s| s[t])).collect()
}

fn fit_fusion(spec: &ExperimentSpec, items: &[Item], p: &Partition, uni: &[Unimodal], t: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    let m = uni.len();
    if spec.representation.is_continuous() {
        let samples = |idx: &[usize], pick: &dyn Fn(&Unimodal) -> &Vec<Vec<f64>>| -> Vec<ContinuousSample> {
            idx.iter()
                .enumerate()
                .map(|(j, &i)| {
                    let streams: Vec<&Vec<f64>> = uni.iter().map(|u| &pick(u)[j]).collect();
                    ContinuousSample {
                        frames: interleave(&streams),
                        n_frames: items[i].n_frames,
                        gold: items[i].gold[t].clone(),
                    }
                })
                .collect()
        };
        let train = Tagged::new(Split::Train, samples(&p.train, &|u| &u.train));
        let val = Tagged::new(Split::Validation, samples(&p.val, &|u| &u.val));
        let model = fit_continuous_fusion(&train, &val, &TrainConfig::continuous_task(seed))?;
        p.test
            .iter()
            .enumerate()
            .map(|(j, &i)| {
                let streams: Vec<&Vec<f64>> = uni.iter().map(|u| &u.test[j]).collect();
                apply_continuous_fusion(&model, &interleave(&streams), items[i].n_frames)
            })
            .collect()
    } else {
        // Fusion weights come from held-out validation predictions, which
        // reflect test-time reliability better than fitted training outputs.
        let rows = |pick: &dyn Fn(&Unimodal) -> &Vec<Vec<f64>>, n: usize| -> Vec<Vec<f64>> {
            (0..n).map(|j| (0..m).map(|k| pick(&uni[k])[j][0]).collect()).collect()
        };
        let golds: Vec<f64> = p.val.iter().map(|&i| items[i].gold[t][0]).collect();
        let model = fit_static_fusion(&Tagged::new(Split::Validation, rows(&|u| &u.val, p.val.len())), &Tagged::new(Split::Validation, golds))?;
        rows(&|u| &u.test, p.test.len()).iter().map(|r| apply_static_fusion(&model, r).map(|v| vec![v])).collect()
    }
}

fn strategy_tag(s: Strategy) -> u64 {
    match s {
        Strategy::Within => 1,
        Strategy::Cross => 2,
        Strategy::Mixed => 3,
    }
}

fn fit_partition(spec: &ExperimentSpec, items: &[Item], p: &Partition, n_targets: usize, seed: u64) -> Predictions {
    (0..n_targets)
        .map(|t| {
            let uni: Vec<Result<Unimodal>> = (0..spec.modalities.len())
                .map(|m| fit_unimodal(spec, items, p, m, t, crate::seed::derive(seed, &[t as u64, m as u64])))
                .collect();
            let mut out: Vec<std::result::Result<Vec<Vec<f64>>, String>> =
                uni.iter().map(|u| u.as_ref().map(|u| u.test.clone()).map_err(|e| e.to_string())).collect();
            if spec.multimodal {
                let fused = match uni.into_iter().collect::<Result<Vec<_>>>() {
                    Ok(u) => fit_fusion(spec, items, p, &u, t, crate::seed::derive(seed, &[t as u64, 99])).map_err(|e| e.to_string()),
                    Err(e) => Err(format!("unimodal model failed: {e}")),
                };
                out.push(fused);
            }
            out
        })
        .collect()
}

/// Trains every partition and scores the concatenated test predictions per
/// target, channel and test corpus.
fn evaluate(spec: &ExperimentSpec, targets: &[Target], items: &[Item], partitions: &[Partition], corpus_ids: &[&str]) -> Vec<Cell> {
    let base = crate::seed::derive(spec.seed, &[strategy_tag(spec.strategy)]);
    let preds: Vec<Predictions> = partitions
        .par_iter()
        .enumerate()
        .map(|(f, p)| fit_partition(spec, items, p, targets.len(), crate::seed::derive(base, &[f as u64])))
        .collect();
    let test_corpora: BTreeSet<usize> = partitions.iter().flat_map(|p| p.test.iter().map(|&i| items[i].corpus)).collect();
    let channels = spec.channels();
    let mut cells = Vec::new();
    for (t, target) in targets.iter().enumerate() {
        for (ch, &channel) in channels.iter().enumerate() {
            for &corpus in &test_corpora {
                let (mut pred, mut gold, mut error) = (Vec::new(), Vec::new(), None);
                for (p, fold_preds) in partitions.iter().zip(&preds) {
                    match &fold_preds[t][ch] {
                        Ok(values) => {
                            for (&i, v) in p.test.iter().zip(values) {
                                if items[i].corpus == corpus {
                                    pred.extend_from_slice(v);
                                    gold.extend_from_slice(&items[i].gold[t]);
                                }
                            }
                        }
                        Err(e) => {
                            error.get_or_insert_with(|| e.clone());
                        }
                    }
                }
                let ccc_value = match (&error, ccc(&pred, &gold)) {
                    (None, Ok(v)) if v.is_finite() => Some(v.clamp(-1.0, 1.0)),
                    (None, Ok(_)) => None,
                    (None, Err(e)) => {
                        error = Some(e.to_string());
                        None
                    }
                    (Some(_), _) => None,
                };
                if let Some(e) = &error {
                    log::warn!("cell {} {} {channel} on {} failed: {e}", spec.representation, target.name(), corpus_ids[corpus]);
                }
                cells.push(Cell {
                    representation: spec.representation,
                    kind: spec.kind,
                    target: target.name().to_string(),
                    channel,
                    strategy: spec.strategy,
                    source: spec.source.clone(),
                    test_corpus: corpus_ids[corpus].to_string(),
                    ccc: ccc_value,
                    n_values: if error.is_some() { 0 } else { pred.len() },
                    error,
                });
            }
        }
    }
    cells
}

/// k-fold partitions over subjects: test fold f, validation fold f + 1.
fn cv_partitions(items: &[Item], folds: &FoldAssignment) -> Vec<Partition> {
    let k = folds.k;
    (0..k)
        .map(|f| {
            let mut p = Partition {
                train: Vec::new(),
                val: Vec::new(),
                test: Vec::new(),
            };
            for (i, item) in items.iter().enumerate() {
                let g = folds.fold_of(&item.subject).expect("every subject has a fold");
                if g == f {
                    p.test.push(i);
                } else if g == (f + 1) % k {
                    p.val.push(i);
                } else {
                    p.train.push(i);
                }
            }
            p
        })
        .collect()
}

fn meta(spec: &impl serde::Serialize, seed: u64, corpora: &[&Corpus]) -> Result<ResultMeta> {
    let hashes = corpora.iter().map(|c| corpus_hash(c)).collect::<Result<Vec<_>>>()?;
    Ok(ResultMeta {
        seed,
        config_hash: config_hash(spec, &hashes)?,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
    })
}

fn within_cells(spec: &ExperimentSpec, c: &Corpus) -> Result<Vec<Cell>> {
    let targets = spec.resolved_targets()?;
    let items = prepare(0, c, spec, &targets)?;
    let folds = FoldAssignment::balanced(&c.subjects, spec.k, spec.seed)?;
    Ok(evaluate(spec, &targets, &items, &cv_partitions(&items, &folds), &[&c.corpus_id]))
}

fn cross_cells(spec: &ExperimentSpec, source: &Corpus, test: &Corpus) -> Result<Vec<Cell>> {
    let targets = spec.resolved_targets()?;
    let mut items = prepare(0, source, spec, &targets)?;
    let n_source = items.len();
    items.extend(prepare(1, test, spec, &targets)?);
    let groups = FoldAssignment::balanced(&source.subjects, CROSS_VALIDATION_GROUPS, crate::seed::derive(spec.seed, &[strategy_tag(Strategy::Cross)]))?;
    let mut p = Partition {
        train: Vec::new(),
        val: Vec::new(),
        test: (n_source..items.len()).collect(),
    };
    for (i, item) in items[..n_source].iter().enumerate() {
        if groups.fold_of(&item.subject) == Some(0) {
            p.val.push(i);
        } else {
            p.train.push(i);
        }
    }
    Ok(evaluate(spec, &targets, &items, &[p], &[&source.corpus_id, &test.corpus_id]))
}

/// Cells for both corpora of the pool.
fn mixed_cells(spec: &ExperimentSpec, a: &Corpus, b: &Corpus) -> Result<Vec<Cell>> {
    for (empty, other) in [(a, b), (b, a)] {
        if empty.sequences.is_empty() {
            log::warn!("corpus `{}` is empty; mixed-corpus training reduces to within-corpus on `{}`", empty.corpus_id, other.corpus_id);
            return within_cells(spec, other);
        }
    }
    let targets = spec.resolved_targets()?;
    let mut items = prepare(0, a, spec, &targets)?;
    items.extend(prepare(1, b, spec, &targets)?);
    let mut pool: Vec<String> = a.subjects.clone();
    for s in &b.subjects {
        if a.subjects.contains(s) {
            return Err(Error::DuplicateId(format!("subject `{s}` appears in both `{}` and `{}`", a.corpus_id, b.corpus_id)));
        }
        pool.push(s.clone());
    }
    let folds = FoldAssignment::balanced(&pool, spec.k, spec.seed)?;
    Ok(evaluate(spec, &targets, &items, &cv_partitions(&items, &folds), &[&a.corpus_id, &b.corpus_id]))
}

fn check_ids(spec: &ExperimentSpec, source: &Corpus, test: &Corpus) -> Result<()> {
    spec.validate()?;
    if source.corpus_id != spec.source || test.corpus_id != spec.test {
        return Err(Error::ConfigInvalid(format!(
            "spec names `{}` -> `{}` but corpora `{}` -> `{}` were given",
            spec.source, spec.test, source.corpus_id, test.corpus_id
        )));
    }
    Ok(())
}

/// k-fold subject-independent cross-validation on one corpus.
pub fn run_within(spec: &ExperimentSpec, c: &Corpus) -> Result<ExperimentResult> {
    if spec.strategy != Strategy::Within {
        return Err(Error::ConfigInvalid(format!("run_within called with a {} spec", spec.strategy)));
    }
    check_ids(spec, c, c)?;
    Ok(ExperimentResult {
        meta: meta(spec, spec.seed, &[c])?,
        cells: within_cells(spec, c)?,
    })
}

/// Trains on all of `source` (one subject group held out for early
/// stopping) and tests on every sequence of `test`.
pub fn run_cross(spec: &ExperimentSpec, source: &Corpus, test: &Corpus) -> Result<ExperimentResult> {
    if spec.strategy != Strategy::Cross {
        return Err(Error::ConfigInvalid(format!("run_cross called with a {} spec", spec.strategy)));
    }
    check_ids(spec, source, test)?;
    Ok(ExperimentResult {
        meta: meta(spec, spec.seed, &[source, test])?,
        cells: cross_cells(spec, source, test)?,
    })
}

/// Cross-validation over the pooled subjects of both corpora, scored on the
/// sequences of `test`.
pub fn run_mixed(spec: &ExperimentSpec, source: &Corpus, test: &Corpus) -> Result<ExperimentResult> {
    if spec.strategy != Strategy::Mixed {
        return Err(Error::ConfigInvalid(format!("run_mixed called with a {} spec", spec.strategy)));
    }
    check_ids(spec, source, test)?;
    let cells = mixed_cells(spec, source, test)?.into_iter().filter(|c| c.test_corpus == test.corpus_id).collect();
    Ok(ExperimentResult {
        meta: meta(spec, spec.seed, &[source, test])?,
        cells,
    })
}

/// Trains one model for a within-corpus spec with a single modality and a
/// single target on all subjects of `c`, one subject group held out for
/// early stopping.
pub fn train_single(spec: &ExperimentSpec, c: &Corpus) -> Result<ModelCheckpoint> {
    check_ids(spec, c, c)?;
    if spec.strategy != Strategy::Within {
        return Err(Error::ConfigInvalid(format!("training a single model needs a within spec, got {}", spec.strategy)));
    }
    let targets = spec.resolved_targets()?;
    if spec.modalities.len() != 1 || targets.len() != 1 {
        return Err(Error::ConfigInvalid("training a single model needs exactly one modality and one target".into()));
    }
    let items = prepare(0, c, spec, &targets)?;
    let groups = FoldAssignment::balanced(&c.subjects, CROSS_VALIDATION_GROUPS, spec.seed)?;
    let (val, train): (Vec<usize>, Vec<usize>) = (0..items.len()).partition(|&i| groups.fold_of(&items[i].subject) == Some(0));
    let seed = crate::seed::derive(spec.seed, &[strategy_tag(Strategy::Within)]);
    let mut ck = if spec.representation.is_continuous() {
        let (tr, va) = (continuous_samples(&items, &train, 0, 0), continuous_samples(&items, &val, 0, 0));
        let d = tr.first().map(|s| s.frames.len() / s.n_frames.max(1)).unwrap_or(0);
        train_continuous(GruConfig::for_features(d, spec.kind), &tr, &va, &TrainConfig::continuous_task(seed), None, None)?
    } else {
        let (tr, va) = (static_samples(&items, &train, 0, 0), static_samples(&items, &val, 0, 0));
        let (d, k) = tr.first().map(|s| (s.x.len(), s.y.len())).unwrap_or((0, 0));
        train_static(MlpConfig::new(d, k), &tr, &va, &TrainConfig::static_task(seed))?
    };
    for (k, v) in [
        ("corpus", c.corpus_id.clone()),
        ("representation", spec.representation.to_string()),
        ("target", targets[0].name().to_string()),
        ("modality", spec.modalities[0].to_string()),
        ("kind", spec.kind.to_string()),
    ] {
        ck.tags.insert(k.into(), v);
    }
    Ok(ck)
}

/// Runs every spec of a plan. Mixed-corpus models are trained once per
/// representation and scored on both corpora. With `cache_dir`, the cells of
/// each training job are stored under a hash of the job and its corpora and
/// reused on later runs.
pub fn run_plan(plan: &ExperimentPlan, corpora: &[Corpus], cache_dir: Option<&Path>) -> Result<ExperimentResult> {
    let specs = plan.specs()?;
    let by_id: BTreeMap<&str, &Corpus> = corpora.iter().map(|c| (c.corpus_id.as_str(), c)).collect();
    let find = |id: &str| by_id.get(id).copied().ok_or_else(|| Error::ConfigInvalid(format!("no corpus with id `{id}` was loaded")));
    let used: Vec<&Corpus> = plan.corpora.iter().map(|id| find(id)).collect::<Result<_>>()?;
    let hashes: BTreeMap<&str, String> = used.iter().map(|c| Ok((c.corpus_id.as_str(), corpus_hash(c)?))).collect::<Result<_>>()?;

    let mut cells = Vec::new();
    let mut mixed_done: BTreeMap<String, Vec<Cell>> = BTreeMap::new();
    for spec in &specs {
        let (source, test) = (find(&spec.source)?, find(&spec.test)?);
        // Mixed jobs are keyed by the unordered corpus pair.
        let job = match spec.strategy {
            Strategy::Mixed => {
                let mut pair = [spec.source.as_str(), spec.test.as_str()];
                pair.sort();
                let mut s = spec.clone();
                (s.source, s.test) = (pair[0].to_string(), pair[1].to_string());
                s
            }
            _ => spec.clone(),
        };
        let key = config_hash(&job, &[hashes[job.source.as_str()].clone(), hashes[job.test.as_str()].clone()])?;
        let job_cells = if let Some(c) = mixed_done.get(&key) {
            c.clone()
        } else {
            let cached = cache_dir.map(|d| d.join(format!("{key}.json"))).filter(|p| p.exists());
            let c = match cached {
                Some(path) => {
                    log::info!("reusing cached cells {}", path.display());
                    serde_json::from_str(&std::fs::read_to_string(&path)?)?
                }
                None => {
                    log::info!("running {} {} {} -> {}", spec.representation, spec.strategy, spec.source, spec.test);
                    let c = match spec.strategy {
                        Strategy::Within => within_cells(spec, test)?,
                        Strategy::Cross => cross_cells(spec, source, test)?,
                        Strategy::Mixed => mixed_cells(&job, find(&job.source)?, find(&job.test)?)?,
                    };
                    if let Some(dir) = cache_dir {
                        std::fs::create_dir_all(dir)?;
                        std::fs::write(dir.join(format!("{key}.json")), serde_json::to_string(&c)?)?;
                    }
                    c
                }
            };
            if spec.strategy == Strategy::Mixed {
                mixed_done.insert(key, c.clone());
            }
            c
        };
        cells.extend(job_cells.into_iter().filter(|c| c.test_corpus == spec.test).map(|mut c| {
            c.source = spec.source.clone();
            c
        }));
    }
    Ok(ExperimentResult {
        meta: ResultMeta {
            seed: plan.seed,
            config_hash: config_hash(plan, &hashes.values().cloned().collect::<Vec<_>>())?,
            code_version: env!("CARGO_PKG_VERSION").to_string(),
        },
        cells,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{FeatureKind, Modality};
    use crate::experiment::{Channel, Representation};
    use crate::synth::{generate_pair, SynthConfig};

    fn small_pair(signal: f64) -> (Corpus, Corpus) {
        let cfg = SynthConfig {
            n_subjects: 10,
            n_sequences_per_subject: 6,
            modality_signal: Modality::ALL.iter().map(|&m| (m, signal)).collect(),
            features: Modality::ALL
                .iter()
                .map(|&modality| crate::synth::FeatureSpec {
                    modality,
                    kind: FeatureKind::Deep,
                    dim: 6,
                })
                .collect(),
            ..SynthConfig::default()
        };
        generate_pair(&cfg).unwrap()
    }

    fn spec(representation: Representation, strategy: Strategy, source: &str, test: &str) -> ExperimentSpec {
        ExperimentSpec {
            representation,
            targets: Vec::new(),
            modalities: vec![Modality::Text, Modality::Audio],
            multimodal: true,
            kind: FeatureKind::Deep,
            strategy,
            source: source.into(),
            test: test.into(),
            k: 5,
            seed: 3,
        }
    }

    #[test]
    fn within_reports_every_cell_and_is_repeatable() {
        let (y, _) = small_pair(0.8);
        let s = spec(Representation::DimSummary, Strategy::Within, "young", "young");
        let a = run_within(&s, &y).unwrap();
        assert_eq!(a.cells.len(), 5 * 3);
        assert!(a.failed().next().is_none(), "{:?}", a.failed().next());
        assert!(a.cells.iter().all(|c| c.n_values == y.sequences.len()));
        assert_eq!(a, run_within(&s, &y).unwrap());
    }

    #[test]
    fn null_signal_gives_chance_ccc() {
        let (y, _) = small_pair(0.0);
        let s = spec(Representation::DimSummary, Strategy::Within, "young", "young");
        let r = run_within(&s, &y).unwrap();
        let m = r.target_mean(Representation::DimSummary, Channel::Text, Strategy::Within, "young").unwrap();
        assert!(m.abs() < 0.1, "{m}");
    }

    #[test]
    fn cross_runs_in_both_directions() {
        let (y, o) = small_pair(0.8);
        let a = run_cross(&spec(Representation::Labels, Strategy::Cross, "young", "older"), &y, &o).unwrap();
        let b = run_cross(&spec(Representation::Labels, Strategy::Cross, "older", "young"), &o, &y).unwrap();
        assert!(a.cells.iter().all(|c| c.test_corpus == "older" && c.n_values == o.sequences.len()));
        assert!(b.cells.iter().all(|c| c.test_corpus == "young"));
        assert!(run_cross(&spec(Representation::Labels, Strategy::Cross, "young", "older"), &o, &y).is_err());
    }

    #[test]
    fn continuous_cells_cover_all_frames() {
        let (y, _) = small_pair(0.8);
        let mut s = spec(Representation::DimContinuous, Strategy::Within, "young", "young");
        s.targets = vec!["arousal".into()];
        let r = run_within(&s, &y).unwrap();
        let frames: usize = y.sequences.iter().map(|q| q.annotations.dim_trace[0][4].len()).sum();
        assert!(r.failed().next().is_none(), "{:?}", r.failed().next());
        assert!(r.cells.iter().all(|c| c.n_values == frames));
    }

    #[test]
    fn mixed_with_empty_partner_reduces_to_within() {
        let (y, mut o) = small_pair(0.8);
        o.sequences.clear();
        let s = spec(Representation::DimSummary, Strategy::Mixed, "older", "young");
        let mixed = run_mixed(&s, &o, &y).unwrap();
        assert!(mixed.cells.iter().all(|c| c.test_corpus == "young" && c.n_values == y.sequences.len()));
    }

    #[test]
    fn plan_uses_cache_and_matches_uncached_run() {
        let (y, o) = small_pair(0.8);
        let plan = ExperimentPlan {
            representations: vec![Representation::DimSummary],
            modalities: vec![Modality::Text],
            multimodal: false,
            ..ExperimentPlan::default()
        };
        let dir = tempfile::tempdir().unwrap();
        let a = run_plan(&plan, &[y.clone(), o.clone()], Some(dir.path())).unwrap();
        assert_eq!(a.cells.len(), 3 * 2 * 5);
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 5);
        let b = run_plan(&plan, &[y.clone(), o.clone()], Some(dir.path())).unwrap();
        let c = run_plan(&plan, &[y, o], None).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
    }
}

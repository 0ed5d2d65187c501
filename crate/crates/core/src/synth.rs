//! Seeded generator of paired synthetic corpora (young, older).
//!
//! Each sequence has a latent state of 5 appraisal coordinates `u` and 3
//! label-expression factors `e`. Every coordinate is a per-sequence mean
//! plus an Ornstein-Uhlenbeck process, each contributing half of a unit
//! variance.
//!
//! * Dimension traces are `0.5 u(t)` plus smooth annotator noise; summaries
//!   are `0.5 mean(u)` plus annotator noise.
//! * Label scores mix the appraisal mean and the expression factors,
//!   `beta a·ū + sqrt(1 - beta²) b·ē`, blend in a small share of
//!   per-sequence context no feature carries, and are thresholded into
//!   intensities.
//! * Features per modality are `rho s(t) + sqrt(1 - rho²) n(t)` where `s` is a
//!   fixed unit-variance linear image of the latent state and `n` is
//!   unit-variance frame noise without a per-sequence level.
//!
//! The older corpus expresses `e` (and optionally `u`) through different
//! feature directions, mixed by the configured shifts. Labels keep their
//! meaning in terms of the latent state, but features trained on one corpus
//! no longer carry the label factors the same way in the other.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};

use crate::corpus::{
    trace_len, AgeGroup, AnnotationBundle, Corpus, FeatureKind, FeatureMatrix, LabelId, Modality,
    Sequence, TimeSeries, N_DIMENSIONS, N_LABELS,
};
use crate::error::{Error, Result};
use crate::gold::resample_linear;

pub const GENERATOR_VERSION: &str = "affect-eval-synth/1";

const N_EXPR: usize = 3;
const N_LATENT: usize = N_DIMENSIONS + N_EXPR;
const CONTEXT_SD: f64 = 0.8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSpec {
    pub modality: Modality,
    pub kind: FeatureKind,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthConfig {
    pub seed: u64,
    pub n_subjects: usize,
    pub n_sequences_per_subject: usize,
    pub sessions_per_subject: usize,
    pub duration_mean_s: f64,
    pub duration_sd_s: f64,
    pub trace_rate_hz: f64,
    pub feature_rate_hz: f64,
    pub n_annotators: usize,
    /// Trace noise sd relative to the trace signal, see [`noise_sd_for_pcc`].
    pub annotator_noise_sd: f64,
    pub summary_noise_sd: f64,
    pub label_noise_sd: f64,
    /// Per-annotator multipliers of all annotation noise; empty means 1.
    pub annotator_noise_scale: Vec<f64>,
    /// Feature signal strength per modality, in [0, 1].
    pub modality_signal: BTreeMap<Modality, f64>,
    pub features: Vec<FeatureSpec>,
    /// Weight of the appraisal state in label scores, in [0, 1].
    pub label_dimension_coupling: f64,
    /// Share of label-score variance from per-sequence context that
    /// annotators perceive but no feature carries, in [0, 1].
    pub label_context_share: f64,
    /// 0 shares the expression of label factors across corpora, 1 makes it
    /// unrelated in the older corpus.
    pub label_map_shift: f64,
    /// Same for the appraisal state.
    pub dimension_map_shift: f64,
    /// Correlation time of the latent process and of annotator trace noise.
    pub ou_tau_s: f64,
    /// Correlation time of feature noise, which has no per-sequence level.
    pub feature_noise_tau_s: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            seed: 1,
            n_subjects: 20,
            n_sequences_per_subject: 10,
            sessions_per_subject: 2,
            duration_mean_s: 8.37,
            duration_sd_s: 4.62,
            trace_rate_hz: 5.0,
            feature_rate_hz: 5.0,
            n_annotators: 6,
            annotator_noise_sd: noise_sd_for_pcc(0.566),
            summary_noise_sd: 0.3,
            label_noise_sd: 0.5,
            annotator_noise_scale: Vec::new(),
            modality_signal: [(Modality::Text, 0.6), (Modality::Audio, 0.4), (Modality::Video, 0.2)].into_iter().collect(),
            features: Modality::ALL
                .iter()
                .map(|&modality| FeatureSpec {
                    modality,
                    kind: FeatureKind::Deep,
                    dim: 12,
                })
                .collect(),
            label_dimension_coupling: 0.3,
            label_context_share: 0.1,
            label_map_shift: 0.0,
            dimension_map_shift: 0.0,
            ou_tau_s: 1.5,
            feature_noise_tau_s: 1.0,
        }
    }
}

/// Trace noise sd giving an expected within-sequence pair PCC of `target`
/// when the trace signal is `0.5 u` and `u` has dynamic variance 0.5.
pub fn noise_sd_for_pcc(target: f64) -> f64 {
    0.5 * 0.5f64.sqrt() * (1.0 / target - 1.0).sqrt()
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::ConfigInvalid(m));
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if self.n_subjects == 0 || self.n_sequences_per_subject == 0 || self.sessions_per_subject == 0 {
            return bad("subjects, sequences and sessions must be positive".into());
        }
        if self.sessions_per_subject > self.n_sequences_per_subject {
            return bad("more sessions than sequences per subject".into());
        }
        if self.n_annotators < 2 {
            return bad("at least 2 annotators are required".into());
        }
        if !(self.duration_mean_s > 0.0) || !(self.duration_sd_s >= 0.0) {
            return bad("duration mean must be positive and sd non-negative".into());
        }
        if !(self.trace_rate_hz > 0.0) || !(self.feature_rate_hz > 0.0) || !(self.ou_tau_s > 0.0) || !(self.feature_noise_tau_s > 0.0) {
            return bad("rates and correlation time must be positive".into());
        }
        for (name, v) in [
            ("annotator_noise_sd", self.annotator_noise_sd),
            ("summary_noise_sd", self.summary_noise_sd),
            ("label_noise_sd", self.label_noise_sd),
        ] {
            if !(v >= 0.0) {
                return bad(format!("{name} must be non-negative"));
            }
        }
        if !self.annotator_noise_scale.is_empty() && self.annotator_noise_scale.len() != self.n_annotators {
            return bad("annotator_noise_scale needs one entry per annotator".into());
        }
        if self.annotator_noise_scale.iter().any(|v| !(*v >= 0.0)) {
            return bad("annotator noise multipliers must be non-negative".into());
        }
        for (m, rho) in &self.modality_signal {
            if !unit(*rho) {
                return bad(format!("signal of {m} must lie in [0, 1]"));
            }
        }
        for (name, v) in [
            ("label_dimension_coupling", self.label_dimension_coupling),
            ("label_context_share", self.label_context_share),
            ("label_map_shift", self.label_map_shift),
            ("dimension_map_shift", self.dimension_map_shift),
        ] {
            if !unit(v) {
                return bad(format!("{name} must lie in [0, 1]"));
            }
        }
        let mut seen = std::collections::BTreeSet::new();
        for f in &self.features {
            if f.dim == 0 || !seen.insert((f.modality, f.kind)) {
                return bad(format!("feature {} {:?} is duplicated or has zero width", f.modality, f.kind));
            }
        }
        Ok(())
    }

    fn noise_scale(&self, annotator: usize) -> f64 {
        self.annotator_noise_scale.get(annotator).copied().unwrap_or(1.0)
    }
}

/// Provenance record embedded in generated manifests.
pub fn describe(cfg: &SynthConfig) -> serde_json::Value {
    serde_json::json!({
        "generator": GENERATOR_VERSION,
        "seed": cfg.seed,
        "config": cfg,
    })
}

/// Appraisal loadings per label in the order novelty, pleasantness, goal
/// conduciveness, coping, arousal.
fn appraisal_loadings(l: LabelId) -> [f64; N_DIMENSIONS] {
    use LabelId::*;
    match l {
        Relaxed => [0.0, 1.0, 0.5, 1.0, -1.0],
        Interested => [0.5, 1.0, 1.0, 0.5, 0.5],
        Curious => [1.0, 0.5, 0.5, 0.0, 0.5],
        Confident => [0.0, 0.5, 1.0, 1.0, 0.0],
        Happy => [0.0, 1.0, 1.0, 0.5, 0.5],
        Satisfied => [0.0, 1.0, 1.0, 0.5, 0.0],
        Proud => [0.0, 0.5, 1.0, 1.0, 0.5],
        Hopeful => [0.0, 0.5, 1.0, 0.0, 0.0],
        Excited => [0.5, 1.0, 0.5, 0.0, 1.0],
        Surprised => [1.0, 0.0, 0.0, 0.0, 0.5],
        Angry => [0.0, -1.0, -1.0, 0.0, 1.0],
        Annoyed => [0.0, -1.0, -1.0, -0.5, 0.5],
        Frustrated => [0.0, -0.5, -1.0, -1.0, 0.5],
        Impatient => [0.0, -0.5, -1.0, 0.0, 1.0],
        Anxious => [0.5, -0.5, -0.5, -1.0, 0.5],
        Desperate => [0.0, -1.0, -1.0, -1.0, 0.0],
        Disappointed => [0.0, -1.0, -1.0, 0.0, -0.5],
        Sad => [0.0, -1.0, -0.5, -0.5, -1.0],
        Upset => [0.0, -1.0, -1.0, -0.5, 0.5],
        Embarrassed => [0.5, -1.0, 0.0, -1.0, 0.5],
        Ashamed => [0.0, -1.0, -0.5, -1.0, 0.0],
        Guilty => [0.0, -1.0, 0.0, -0.5, 0.0],
        Contemptuous => [0.0, -1.0, 0.0, 0.5, 0.0],
    }
}

/// Share of sequences in which a single annotator marks each label.
fn marking_rate(l: LabelId) -> f64 {
    use LabelId::*;
    match l {
        Relaxed => 0.32,
        Interested => 0.30,
        Frustrated => 0.28,
        Embarrassed => 0.27,
        Annoyed => 0.26,
        Disappointed => 0.24,
        Surprised => 0.23,
        Anxious => 0.18,
        Confident => 0.17,
        Ashamed => 0.16,
        Angry | Happy | Desperate => 0.15,
        Satisfied => 0.12,
        Guilty | Curious => 0.09,
        Proud => 0.08,
        Contemptuous => 0.07,
        Upset => 0.06,
        Impatient => 0.04,
        Excited => 0.035,
        Hopeful => 0.03,
        Sad => 0.025,
    }
}

/// Population law shared by both corpora, plus the older corpus' shifted
/// feature directions.
struct Law {
    /// Per label: unit-norm appraisal loadings and expression loadings.
    label_a: Vec<[f64; N_DIMENSIONS]>,
    label_b: Vec<[f64; N_EXPR]>,
    threshold: Vec<f64>,
    /// Per feature spec: D x N_LATENT mixing for each corpus.
    mixing: Vec<[Vec<f64>; 2]>,
}

/// `k` random unit vectors of length `d`, orthogonal to `against` and to
/// each other for as long as the space allows.
fn orthonormal_columns(rng: &mut ChaCha8Rng, d: usize, k: usize, against: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = Normal::new(0.0, 1.0).expect("valid normal");
    let mut basis: Vec<Vec<f64>> = against.to_vec();
    let mut out = Vec::with_capacity(k);
    while out.len() < k {
        if basis.len() >= d {
            basis.clear();
        }
        let mut v: Vec<f64> = (0..d).map(|_| n.sample(rng)).collect();
        for b in &basis {
            let dot: f64 = v.iter().zip(b).map(|(x, y)| x * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= dot * y);
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-8 {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v.clone());
            out.push(v);
        }
    }
    out
}

/// Column-wise `(1 - s) a + sqrt(1 - (1 - s)²) b`; unit norm when `a` and
/// `b` are orthonormal to each other.
fn shift_columns(a: &[Vec<f64>], b: &[Vec<f64>], s: f64) -> Vec<Vec<f64>> {
    let keep = 1.0 - s;
    let other = (1.0 - keep * keep).max(0.0).sqrt();
    a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(u, v)| keep * u + other * v).collect()).collect()
}

/// Row-major `D x N_LATENT` mixing from appraisal and expression columns,
/// rows scaled to unit norm so every feature has unit signal variance.
fn mixing_rows(p: &[Vec<f64>], q: &[Vec<f64>]) -> Vec<f64> {
    let d = p[0].len();
    let mut m = Vec::with_capacity(d * N_LATENT);
    for i in 0..d {
        let row: Vec<f64> = p.iter().chain(q).map(|c| c[i]).collect();
        let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
        m.extend(row.iter().map(|v| v / norm));
    }
    m
}

impl Law {
    fn new(cfg: &SynthConfig) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::mix(cfg.seed, 1));
        let n = Normal::new(0.0, 1.0).expect("valid normal");
        let label_a = LabelId::ALL
            .iter()
            .map(|&l| {
                let a = appraisal_loadings(l);
                let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
                a.map(|v| v / norm)
            })
            .collect();
        let label_b = (0..N_LABELS)
            .map(|_| {
                let b: [f64; N_EXPR] = std::array::from_fn(|_| n.sample(&mut rng));
                let norm = b.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                b.map(|v| v / norm)
            })
            .collect();
        // Scores have roughly unit variance; the threshold puts each label at
        // its marking rate given the annotator noise.
        let total_sd = (1.0 + cfg.label_noise_sd.powi(2)).sqrt();
        let threshold = LabelId::ALL
            .iter()
            .map(|&l| total_sd * crate::stats::normal_quantile(1.0 - marking_rate(l)))
            .collect();
        // Orthonormal columns express every latent coordinate equally well;
        // the older corpus' alternative directions avoid the young ones
        // whenever the feature width leaves room.
        let mixing = cfg
            .features
            .iter()
            .map(|f| {
                let d = f.dim;
                let p = orthonormal_columns(&mut rng, d, N_DIMENSIONS, &[]);
                let q = orthonormal_columns(&mut rng, d, N_EXPR, if d >= N_LATENT { &p } else { &[] });
                let both: Vec<Vec<f64>> = p.iter().chain(&q).cloned().collect();
                let q_alt = match d {
                    _ if d >= N_LATENT + N_EXPR => orthonormal_columns(&mut rng, d, q.len(), &both),
                    _ if d >= 2 * N_EXPR => orthonormal_columns(&mut rng, d, q.len(), &q),
                    _ => orthonormal_columns(&mut rng, d, q.len(), &[]),
                };
                let p_alt = match d {
                    _ if d >= N_LATENT + N_DIMENSIONS => orthonormal_columns(&mut rng, d, p.len(), &both),
                    _ if d >= 2 * N_DIMENSIONS => orthonormal_columns(&mut rng, d, p.len(), &p),
                    _ => orthonormal_columns(&mut rng, d, p.len(), &[]),
                };
                let p_old = shift_columns(&p, &p_alt, cfg.dimension_map_shift);
                let q_old = shift_columns(&q, &q_alt, cfg.label_map_shift);
                [mixing_rows(&p, &q), mixing_rows(&p_old, &q_old)]
            })
            .collect();
        Law {
            label_a,
            label_b,
            threshold,
            mixing,
        }
    }
}

/// Static mean plus OU process, each with variance 0.5; `len` samples at `rate`.
fn latent_process(rng: &mut ChaCha8Rng, len: usize, rate: f64, tau: f64) -> Vec<f64> {
    let half = 0.5f64.sqrt();
    let n = Normal::new(0.0, 1.0).expect("valid normal");
    let phi = (-1.0 / (tau * rate)).exp();
    let innov = (1.0 - phi * phi).sqrt();
    let level = half * n.sample(rng);
    let mut x = half * n.sample(rng);
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(level + x);
        x = phi * x + innov * half * n.sample(rng);
    }
    out
}

/// Unit-variance OU process.
fn ou_process(rng: &mut ChaCha8Rng, len: usize, rate: f64, tau: f64) -> Vec<f64> {
    let n = Normal::new(0.0, 1.0).expect("valid normal");
    let phi = (-1.0 / (tau * rate)).exp();
    let innov = (1.0 - phi * phi).sqrt();
    let mut x = n.sample(rng);
    (0..len)
        .map(|_| {
            let v = x;
            x = phi * x + innov * n.sample(rng);
            v
        })
        .collect()
}

fn generate_corpus(cfg: &SynthConfig, law: &Law, age: AgeGroup) -> Result<Corpus> {
    let older = age == AgeGroup::Older;
    let prefix = if older { "o" } else { "y" };
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::mix(cfg.seed, if older { 3 } else { 2 }));
    let n01 = Normal::new(0.0, 1.0).expect("valid normal");
    let cv2 = (cfg.duration_sd_s / cfg.duration_mean_s).powi(2);
    let sigma = (1.0 + cv2).ln().sqrt();
    let durations = LogNormal::new(cfg.duration_mean_s.ln() - sigma * sigma / 2.0, sigma)
        .map_err(|e| Error::ConfigInvalid(format!("duration distribution: {e}")))?;
    let annotator_ids: Vec<String> = (0..cfg.n_annotators).map(|a| format!("a{}", a + 1)).collect();
    let subjects: Vec<String> = (0..cfg.n_subjects).map(|s| format!("{prefix}{s:02}")).collect();
    let beta = cfg.label_dimension_coupling;
    let gamma = (1.0 - beta * beta).sqrt();
    let (expressed, context) = ((1.0 - cfg.label_context_share).sqrt(), cfg.label_context_share.sqrt());
    let mut sequences = Vec::with_capacity(cfg.n_subjects * cfg.n_sequences_per_subject);
    for subject in &subjects {
        for q in 0..cfg.n_sequences_per_subject {
            let session = q * cfg.sessions_per_subject / cfg.n_sequences_per_subject;
            let duration: f64 = (durations.sample(&mut rng) * 100.0).round().max(100.0) / 100.0;
            let tl = trace_len(duration, cfg.trace_rate_hz);
            let latent: Vec<Vec<f64>> = (0..N_LATENT)
                .map(|_| latent_process(&mut rng, tl, cfg.trace_rate_hz, cfg.ou_tau_s))
                .collect();
            let means: Vec<f64> = latent.iter().map(|x| x.iter().sum::<f64>() / tl as f64).collect();

            // Annotations.
            let mut label_intensity = vec![[0.0; N_LABELS]; cfg.n_annotators];
            let mut dim_summary = vec![[0.0; N_DIMENSIONS]; cfg.n_annotators];
            let mut dim_trace = Vec::with_capacity(cfg.n_annotators);
            let scores: Vec<f64> = (0..N_LABELS)
                .map(|l| {
                    let a: f64 = law.label_a[l].iter().zip(&means[..N_DIMENSIONS]).map(|(w, u)| w * u).sum();
                    let b: f64 = law.label_b[l].iter().zip(&means[N_DIMENSIONS..]).map(|(w, e)| w * e).sum();
                    // Context has the spread of a sequence-mean latent coordinate.
                    expressed * (beta * a + gamma * b) + context * CONTEXT_SD * n01.sample(&mut rng)
                })
                .collect();
            for a in 0..cfg.n_annotators {
                let scale = cfg.noise_scale(a);
                for l in 0..N_LABELS {
                    let v = scores[l] + scale * cfg.label_noise_sd * n01.sample(&mut rng) - law.threshold[l];
                    label_intensity[a][l] = (0.5 * v).clamp(0.0, 1.0);
                }
                for d in 0..N_DIMENSIONS {
                    let v = 0.5 * means[d] + scale * cfg.summary_noise_sd * n01.sample(&mut rng);
                    dim_summary[a][d] = v.clamp(-1.0, 1.0);
                }
                let traces = (0..N_DIMENSIONS)
                    .map(|d| {
                        let noise = ou_process(&mut rng, tl, cfg.trace_rate_hz, cfg.ou_tau_s);
                        let values = latent[d]
                            .iter()
                            .zip(&noise)
                            .map(|(u, e)| (0.5 * u + scale * cfg.annotator_noise_sd * e).clamp(-1.0, 1.0))
                            .collect();
                        TimeSeries::new(cfg.trace_rate_hz, values)
                    })
                    .collect();
                dim_trace.push(traces);
            }

            // Features.
            let fl = trace_len(duration, cfg.feature_rate_hz);
            let frame_latent: Vec<Vec<f64>> = if (cfg.feature_rate_hz - cfg.trace_rate_hz).abs() < 1e-12 {
                latent.clone()
            } else {
                latent.iter().map(|x| resample_linear(x, cfg.trace_rate_hz, cfg.feature_rate_hz, fl)).collect()
            };
            let mut features = BTreeMap::new();
            for (spec, mix) in cfg.features.iter().zip(&law.mixing) {
                let m = &mix[usize::from(older)];
                let rho = cfg.modality_signal.get(&spec.modality).copied().unwrap_or(0.0);
                let noise_w = (1.0 - rho * rho).sqrt();
                let noise: Vec<Vec<f64>> = (0..spec.dim)
                    .map(|_| ou_process(&mut rng, fl, cfg.feature_rate_hz, cfg.feature_noise_tau_s))
                    .collect();
                let mut data = Vec::with_capacity(fl * spec.dim);
                for t in 0..fl {
                    for i in 0..spec.dim {
                        let row = &m[i * N_LATENT..(i + 1) * N_LATENT];
                        let s: f64 = row.iter().enumerate().map(|(j, w)| w * frame_latent[j][t]).sum();
                        data.push(rho * s + noise_w * noise[i][t]);
                    }
                }
                let fm = FeatureMatrix::new(spec.modality, spec.kind, cfg.feature_rate_hz, fl, spec.dim, data)?;
                features.insert((spec.modality, spec.kind), fm);
            }

            sequences.push(Sequence {
                sequence_id: format!("{subject}-q{q:02}"),
                subject_id: subject.clone(),
                session_id: format!("{subject}-s{session}"),
                duration_s: duration,
                features,
                annotations: AnnotationBundle {
                    annotator_ids: annotator_ids.clone(),
                    label_intensity,
                    dim_summary,
                    dim_trace,
                },
            });
        }
    }
    let c = Corpus {
        corpus_id: if older { "older".into() } else { "young".into() },
        age_group: age,
        trace_rate_hz: cfg.trace_rate_hz,
        annotator_ids,
        subjects,
        sequences,
        provenance: Some(describe(cfg)),
    };
    c.validate()?;
    Ok(c)
}

/// Generates the (young, older) pair. Deterministic in the configuration.
pub fn generate_pair(cfg: &SynthConfig) -> Result<(Corpus, Corpus)> {
    cfg.validate()?;
    let law = Law::new(cfg);
    Ok((generate_corpus(cfg, &law, AgeGroup::Young)?, generate_corpus(cfg, &law, AgeGroup::Older)?))
}

/// Latent signal image `s` of one feature matrix, for calibration checks:
/// returns per frame and feature the noiseless unit-variance signal.
#[doc(hidden)]
pub fn signal_strength_probe(cfg: &SynthConfig, feature: usize, n_frames: usize) -> (Vec<f64>, Vec<f64>) {
    let law = Law::new(cfg);
    let spec = &cfg.features[feature];
    let m = &law.mixing[feature][0];
    let rho = cfg.modality_signal.get(&spec.modality).copied().unwrap_or(0.0);
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::mix(cfg.seed, 99));
    let (mut sig, mut feat) = (Vec::new(), Vec::new());
    while sig.len() < n_frames {
        let latent: Vec<Vec<f64>> = (0..N_LATENT).map(|_| latent_process(&mut rng, 40, cfg.feature_rate_hz, cfg.ou_tau_s)).collect();
        let noise = ou_process(&mut rng, 40, cfg.feature_rate_hz, cfg.feature_noise_tau_s);
        for t in 0..40 {
            let s: f64 = (0..N_LATENT).map(|j| m[j] * latent[j][t]).sum();
            sig.push(s);
            feat.push(rho * s + (1.0 - rho * rho).sqrt() * noise[t]);
        }
    }
    (sig, feat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::{dimension_agreement, DimForm, Granularity};
    use crate::corpus::{corpus_stats, write_corpus, DimensionId};
    use crate::stats::pcc;

    fn small() -> SynthConfig {
        SynthConfig {
            n_subjects: 6,
            n_sequences_per_subject: 4,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn generated_corpora_validate_and_are_deterministic() {
        let (y1, o1) = generate_pair(&small()).unwrap();
        let (y2, o2) = generate_pair(&small()).unwrap();
        assert_eq!(y1, y2);
        assert_eq!(o1, o2);
        assert_eq!(y1.sequences.len(), 24);
        let dir = tempfile::tempdir().unwrap();
        let a = std::fs::read_to_string(write_corpus(&y1, dir.path().join("a")).unwrap()).unwrap();
        let b = std::fs::read_to_string(write_corpus(&y2, dir.path().join("b")).unwrap()).unwrap();
        assert_eq!(a, b);
        assert!(a.contains(GENERATOR_VERSION));
    }

    #[test]
    fn different_seeds_share_schema() {
        let (a, _) = generate_pair(&small()).unwrap();
        let (b, _) = generate_pair(&SynthConfig { seed: 2, ..small() }).unwrap();
        assert_ne!(a.sequences[0].annotations, b.sequences[0].annotations);
        assert_eq!(a.subjects, b.subjects);
        assert_eq!(a.sequences[0].features.keys().collect::<Vec<_>>(), b.sequences[0].features.keys().collect::<Vec<_>>());
    }

    #[test]
    fn durations_follow_configured_moments() {
        let cfg = SynthConfig {
            n_subjects: 50,
            n_sequences_per_subject: 40,
            features: vec![],
            ..SynthConfig::default()
        };
        let (y, _) = generate_pair(&cfg).unwrap();
        let s = corpus_stats(&y);
        assert!((s.mean_duration_s - 8.37).abs() < 0.3, "{}", s.mean_duration_s);
        assert!((s.sd_duration_s - 4.62).abs() < 0.5, "{}", s.sd_duration_s);
    }

    #[test]
    fn feature_signal_matches_configured_rho() {
        let cfg = SynthConfig::default();
        for (i, spec) in cfg.features.iter().enumerate() {
            let (s, f) = signal_strength_probe(&cfg, i, 4000);
            let r = pcc(&s, &f).unwrap().r;
            let rho = cfg.modality_signal[&spec.modality];
            assert!((r - rho).abs() < 0.05, "{}: {r} vs {rho}", spec.modality);
        }
    }

    #[test]
    fn trace_agreement_matches_calibration() {
        let cfg = SynthConfig {
            n_subjects: 10,
            n_sequences_per_subject: 10,
            trace_rate_hz: 10.0,
            features: vec![],
            ..SynthConfig::default()
        };
        let (y, _) = generate_pair(&cfg).unwrap();
        let a = dimension_agreement(&y, DimensionId::GoalConduciveness, Granularity::Sequence, DimForm::Continuous).unwrap();
        assert!((a.mean_pcc - 0.566).abs() < 0.05, "{}", a.mean_pcc);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        for cfg in [
            SynthConfig { label_map_shift: 1.5, ..small() },
            SynthConfig { n_annotators: 1, ..small() },
            SynthConfig { modality_signal: [(Modality::Text, -0.1)].into_iter().collect(), ..small() },
        ] {
            assert!(matches!(generate_pair(&cfg), Err(Error::ConfigInvalid(_))));
        }
    }

    #[test]
    fn config_round_trips_through_toml() {
        let cfg = SynthConfig { label_map_shift: 0.8, ..SynthConfig::default() };
        let text = toml::to_string(&cfg).unwrap();
        let back: SynthConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let partial: SynthConfig = toml::from_str("seed = 9\nlabel_map_shift = 0.8\n").unwrap();
        assert_eq!(partial.seed, 9);
        assert_eq!(partial.n_subjects, 20);
    }

    /// EWE weight of annotator 0 as its noise multiplier grows.
    #[test]
    fn noisy_annotator_loses_ewe_weight() {
        use crate::gold::{gold_for_sequence, GoldTask};
        let mut last = f64::INFINITY;
        for scale in [1.0, 3.0, 10.0] {
            let mut cfg = small();
            cfg.annotator_noise_scale = vec![1.0; cfg.n_annotators];
            cfg.annotator_noise_scale[0] = scale;
            let (y, _) = generate_pair(&cfg).unwrap();
            let mut w = Vec::new();
            for seq in &y.sequences {
                let g = gold_for_sequence(seq, GoldTask::DimContinuous(DimensionId::ALL[0]), y.trace_rate_hz).unwrap();
                w.push(g.ewe_weights.unwrap().weights[0]);
            }
            let mean = w.iter().sum::<f64>() / w.len() as f64;
            assert!(mean < last, "scale {scale}: {mean} >= {last}");
            last = mean;
        }
        assert!(last < 0.1, "{last}");
    }
}

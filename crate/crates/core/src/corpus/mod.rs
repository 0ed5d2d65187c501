//! Annotated corpora: data model, validation, summary statistics and
//! subject-independent fold splitting.

mod folds;
mod io;
pub mod ids;

use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::{Deserialize, Serialize};

pub use folds::{split_folds, FoldAssignment};
pub use ids::{AgeGroup, DimensionId, FeatureKind, LabelId, Modality, N_DIMENSIONS, N_LABELS};
pub use io::{corpus_hash, load_corpus, trace_len, write_corpus, Manifest};

use crate::error::{Error, Result};

/// Default sample rate of dimension traces when a manifest does not set one.
pub const DEFAULT_TRACE_RATE_HZ: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub sample_rate_hz: f64,
    pub values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(sample_rate_hz: f64, values: Vec<f64>) -> Self {
        TimeSeries {
            sample_rate_hz,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Time covered from the first to the last sample.
    pub fn span_s(&self) -> f64 {
        (self.values.len().saturating_sub(1)) as f64 / self.sample_rate_hz
    }
}

/// A T×D matrix of frame-level features stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub modality: Modality,
    pub kind: FeatureKind,
    /// Frames per second; 0 for a single pooled vector.
    pub frame_rate_hz: f64,
    pub n_frames: usize,
    pub dim: usize,
    pub data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(
        modality: Modality,
        kind: FeatureKind,
        frame_rate_hz: f64,
        n_frames: usize,
        dim: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if n_frames == 0 || dim == 0 || data.len() != n_frames * dim {
            return Err(Error::shape(
                format!("{n_frames}x{dim} with T,D >= 1"),
                format!("{} values", data.len()),
            ));
        }
        Ok(FeatureMatrix {
            modality,
            kind,
            frame_rate_hz,
            n_frames,
            dim,
            data,
        })
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    pub fn frames(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    /// Temporal mean over frames.
    pub fn mean_pooled(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for frame in self.frames() {
            for (o, v) in out.iter_mut().zip(frame) {
                *o += v;
            }
        }
        let n = self.n_frames as f64;
        out.iter_mut().for_each(|o| *o /= n);
        out
    }
}

/// Multi-annotator annotations of one sequence. Storage is dense, so every
/// annotator has a value for every label and every dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotationBundle {
    pub annotator_ids: Vec<String>,
    /// `[annotator][label]`, in [0, 1]; 0 means absent.
    pub label_intensity: Vec<[f64; N_LABELS]>,
    /// `[annotator][dimension]`, in [-1, 1].
    pub dim_summary: Vec<[f64; N_DIMENSIONS]>,
    /// `[annotator][dimension]`, samples in [-1, 1].
    pub dim_trace: Vec<Vec<TimeSeries>>,
}

impl AnnotationBundle {
    pub fn n_annotators(&self) -> usize {
        self.annotator_ids.len()
    }

    pub fn intensity(&self, annotator: usize, label: LabelId) -> f64 {
        self.label_intensity[annotator][label.index()]
    }

    pub fn summary(&self, annotator: usize, dim: DimensionId) -> f64 {
        self.dim_summary[annotator][dim.index()]
    }

    pub fn trace(&self, annotator: usize, dim: DimensionId) -> &TimeSeries {
        &self.dim_trace[annotator][dim.index()]
    }

    /// Per-annotator intensities for one label.
    pub fn intensities(&self, label: LabelId) -> Vec<f64> {
        self.label_intensity
            .iter()
            .map(|row| row[label.index()])
            .collect()
    }

    pub fn summaries(&self, dim: DimensionId) -> Vec<f64> {
        self.dim_summary.iter().map(|row| row[dim.index()]).collect()
    }

    pub fn traces(&self, dim: DimensionId) -> Vec<&TimeSeries> {
        self.dim_trace.iter().map(|row| &row[dim.index()]).collect()
    }

    /// Number of annotators who marked the label as present.
    pub fn presence_count(&self, label: LabelId) -> usize {
        self.label_intensity
            .iter()
            .filter(|row| row[label.index()] > 0.0)
            .count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub sequence_id: String,
    pub subject_id: String,
    pub session_id: String,
    pub duration_s: f64,
    pub features: BTreeMap<(Modality, FeatureKind), FeatureMatrix>,
    pub annotations: AnnotationBundle,
}

impl Sequence {
    pub fn feature(&self, modality: Modality, kind: FeatureKind) -> Option<&FeatureMatrix> {
        self.features.get(&(modality, kind))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub corpus_id: String,
    pub age_group: AgeGroup,
    pub trace_rate_hz: f64,
    pub annotator_ids: Vec<String>,
    pub subjects: Vec<String>,
    pub sequences: Vec<Sequence>,
    /// Free-form provenance record carried through the manifest.
    pub provenance: Option<serde_json::Value>,
}

impl Corpus {
    /// Checks every structural and range invariant of the data model.
    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: String| Error::schema(format!("corpus {}", self.corpus_id), None, "", msg);
        if self.subjects.is_empty() {
            return Err(ctx("corpus has no subjects".into()));
        }
        if !(self.trace_rate_hz > 0.0) {
            return Err(Error::RangeViolation {
                context: format!("{}.trace_rate_hz", self.corpus_id),
                value: self.trace_rate_hz,
                range: "(0, inf)",
            });
        }
        let mut subjects = HashSet::new();
        for s in &self.subjects {
            if !subjects.insert(s.as_str()) {
                return Err(Error::DuplicateId(format!("subject {s}")));
            }
        }
        let k = self.annotator_ids.len();
        let mut seen = HashSet::new();
        let mut dims: BTreeMap<(Modality, FeatureKind), usize> = BTreeMap::new();
        for seq in &self.sequences {
            let id = &seq.sequence_id;
            if !seen.insert(id.as_str()) {
                return Err(Error::DuplicateId(format!("sequence {id}")));
            }
            if !subjects.contains(seq.subject_id.as_str()) {
                return Err(Error::schema(
                    format!("sequence {id}"),
                    None,
                    "subject_id",
                    format!("subject `{}` is not listed in the corpus", seq.subject_id),
                ));
            }
            if !(seq.duration_s > 0.0) || !seq.duration_s.is_finite() {
                return Err(Error::RangeViolation {
                    context: format!("{id}.duration_s"),
                    value: seq.duration_s,
                    range: "(0, inf)",
                });
            }
            for ((m, kind), fm) in &seq.features {
                if fm.modality != *m || fm.kind != *kind {
                    return Err(Error::schema(format!("sequence {id}"), None, "features", "key does not match matrix"));
                }
                if fm.n_frames == 0 || fm.dim == 0 || fm.data.len() != fm.n_frames * fm.dim {
                    return Err(Error::schema(format!("sequence {id}"), None, format!("{m}.{kind}"), "empty or ragged matrix"));
                }
                if let Some(bad) = fm.data.iter().find(|v| !v.is_finite()) {
                    return Err(Error::RangeViolation {
                        context: format!("{id}.features.{m}.{kind}"),
                        value: *bad,
                        range: "finite",
                    });
                }
                match dims.get(&(*m, *kind)) {
                    Some(&d) if d != fm.dim => {
                        return Err(Error::schema(
                            format!("sequence {id}"),
                            None,
                            format!("{m}.{kind}"),
                            format!("dimension {} differs from corpus dimension {d}", fm.dim),
                        ))
                    }
                    _ => {
                        dims.insert((*m, *kind), fm.dim);
                    }
                }
            }
            let ann = &seq.annotations;
            if ann.annotator_ids != self.annotator_ids
                || ann.label_intensity.len() != k
                || ann.dim_summary.len() != k
                || ann.dim_trace.len() != k
            {
                return Err(Error::schema(
                    format!("sequence {id}"),
                    None,
                    "annotations",
                    "every corpus annotator must annotate every sequence",
                ));
            }
            for (a, row) in ann.label_intensity.iter().enumerate() {
                for label in LabelId::ALL {
                    let v = row[label.index()];
                    if !(0.0..=1.0).contains(&v) {
                        return Err(Error::RangeViolation {
                            context: format!("{id}/{}/{label}.intensity", ann.annotator_ids[a]),
                            value: v,
                            range: "[0, 1]",
                        });
                    }
                }
            }
            for (a, row) in ann.dim_summary.iter().enumerate() {
                for dim in DimensionId::ALL {
                    let v = row[dim.index()];
                    if !(-1.0..=1.0).contains(&v) {
                        return Err(Error::RangeViolation {
                            context: format!("{id}/{}/{dim}.summary", ann.annotator_ids[a]),
                            value: v,
                            range: "[-1, 1]",
                        });
                    }
                }
            }
            for (a, row) in ann.dim_trace.iter().enumerate() {
                if row.len() != N_DIMENSIONS {
                    return Err(Error::schema(format!("sequence {id}"), None, "dim_trace", "missing dimension"));
                }
                for dim in DimensionId::ALL {
                    let ts = &row[dim.index()];
                    if ts.len() < 2 {
                        return Err(Error::schema(
                            format!("sequence {id}"),
                            None,
                            format!("{}/{dim}.trace", ann.annotator_ids[a]),
                            "trace needs at least 2 samples",
                        ));
                    }
                    if let Some(v) = ts.values.iter().find(|v| !(-1.0..=1.0).contains(*v)) {
                        return Err(Error::RangeViolation {
                            context: format!("{id}/{}/{dim}.trace", ann.annotator_ids[a]),
                            value: *v,
                            range: "[-1, 1]",
                        });
                    }
                }
            }
        }
        Ok(())
    }

    pub fn sessions(&self) -> BTreeSet<&str> {
        self.sequences.iter().map(|s| s.session_id.as_str()).collect()
    }

    pub fn sequences_of_subject<'a>(&'a self, subject: &'a str) -> impl Iterator<Item = &'a Sequence> + 'a {
        self.sequences.iter().filter(move |s| s.subject_id == subject)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsSummary {
    pub n_sequences: usize,
    pub mean_duration_s: f64,
    /// Sample standard deviation (n - 1); 0 for a single sequence.
    pub sd_duration_s: f64,
    pub total_duration_s: f64,
}

pub fn corpus_stats(c: &Corpus) -> StatsSummary {
    let durations: Vec<f64> = c.sequences.iter().map(|s| s.duration_s).collect();
    let n = durations.len();
    let total: f64 = durations.iter().sum();
    let mean = if n > 0 { total / n as f64 } else { 0.0 };
    let sd = if n > 1 {
        let ss: f64 = durations.iter().map(|d| (d - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    } else {
        0.0
    };
    StatsSummary {
        n_sequences: n,
        mean_duration_s: mean,
        sd_duration_s: sd,
        total_duration_s: total,
    }
}

#[cfg(test)]
pub(crate) mod testutil {
    use super::*;

    /// A small corpus with constant annotations, for tests that only need structure.
    pub fn tiny_corpus(durations: &[f64]) -> Corpus {
        let annotators: Vec<String> = (0..2).map(|a| format!("a{a}")).collect();
        let sequences = durations
            .iter()
            .enumerate()
            .map(|(i, d)| Sequence {
                sequence_id: format!("q{i}"),
                subject_id: "s0".into(),
                session_id: "s0-1".into(),
                duration_s: *d,
                features: BTreeMap::new(),
                annotations: AnnotationBundle {
                    annotator_ids: annotators.clone(),
                    label_intensity: vec![[0.0; N_LABELS]; 2],
                    dim_summary: vec![[0.0; N_DIMENSIONS]; 2],
                    dim_trace: vec![vec![TimeSeries::new(1.0, vec![0.0, 0.0]); N_DIMENSIONS]; 2],
                },
            })
            .collect();
        Corpus {
            corpus_id: "tiny".into(),
            age_group: AgeGroup::Young,
            trace_rate_hz: 1.0,
            annotator_ids: annotators,
            subjects: vec!["s0".into()],
            sequences,
            provenance: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::testutil::tiny_corpus;
    use super::*;

    #[test]
    fn stats_of_single_sequence() {
        let s = corpus_stats(&tiny_corpus(&[10.0]));
        assert_eq!(s.n_sequences, 1);
        assert_eq!(s.mean_duration_s, 10.0);
        assert_eq!(s.sd_duration_s, 0.0);
        assert_eq!(s.total_duration_s, 10.0);
    }

    #[test]
    fn stats_of_two_sequences() {
        let s = corpus_stats(&tiny_corpus(&[4.0, 6.0]));
        assert_eq!(s.mean_duration_s, 5.0);
        assert!((s.sd_duration_s - 2f64.sqrt()).abs() < 1e-12);
        assert_eq!(s.total_duration_s, 10.0);
    }

    #[test]
    fn validate_rejects_out_of_range_intensity() {
        let mut c = tiny_corpus(&[3.0]);
        c.sequences[0].annotations.label_intensity[1][LabelId::Happy.index()] = 1.3;
        let err = c.validate().unwrap_err().to_string();
        assert!(err.contains("q0") && err.contains("happy"), "{err}");
    }

    #[test]
    fn validate_rejects_unknown_subject_and_bad_duration() {
        let mut c = tiny_corpus(&[3.0]);
        c.sequences[0].subject_id = "ghost".into();
        assert!(matches!(c.validate(), Err(Error::SchemaViolation { .. })));
        let mut c = tiny_corpus(&[3.0]);
        c.sequences[0].duration_s = 0.0;
        assert!(matches!(c.validate(), Err(Error::RangeViolation { .. })));
    }

    #[test]
    fn feature_pooling_is_the_frame_mean() {
        let fm = FeatureMatrix::new(Modality::Audio, FeatureKind::Deep, 10.0, 2, 2, vec![1.0, 2.0, 3.0, 6.0]).unwrap();
        assert_eq!(fm.mean_pooled(), vec![2.0, 4.0]);
        assert!(FeatureMatrix::new(Modality::Audio, FeatureKind::Deep, 10.0, 0, 2, vec![]).is_err());
    }
}

//! On-disk corpus layout: a JSON manifest plus CSV tables.
//!
//! ```text
//! <dir>/manifest.json
//! <dir>/labels.csv        sequence_id,annotator_id,label,intensity
//! <dir>/summaries.csv     sequence_id,annotator_id,dimension,value
//! <dir>/traces.csv        sequence_id,annotator_id,dimension,t_index,value[,rate_hz]
//! <dir>/features/<sequence>.<modality>.<kind>.csv   f0,f1,...  (one row per frame)
//! ```

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{
    AgeGroup, AnnotationBundle, Corpus, DimensionId, FeatureKind, FeatureMatrix, LabelId, Modality,
    Sequence, TimeSeries, DEFAULT_TRACE_RATE_HZ, N_DIMENSIONS, N_LABELS,
};
use crate::error::{Error, Result};
use crate::gold::resample_linear;

pub const MANIFEST_FORMAT: &str = "affect-eval-corpus/v1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    #[serde(default)]
    pub format: Option<String>,
    pub corpus_id: String,
    pub age_group: AgeGroup,
    #[serde(default)]
    pub trace_rate_hz: Option<f64>,
    #[serde(default)]
    pub annotators: Option<Vec<String>>,
    pub subjects: Vec<String>,
    #[serde(default = "default_labels_csv")]
    pub labels_csv: String,
    #[serde(default = "default_summaries_csv")]
    pub summaries_csv: String,
    #[serde(default = "default_traces_csv")]
    pub traces_csv: String,
    pub sequences: Vec<ManifestSequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

fn default_labels_csv() -> String {
    "labels.csv".into()
}
fn default_summaries_csv() -> String {
    "summaries.csv".into()
}
fn default_traces_csv() -> String {
    "traces.csv".into()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestSequence {
    pub sequence_id: String,
    pub subject_id: String,
    pub session_id: String,
    pub duration_s: f64,
    #[serde(default)]
    pub features: Vec<ManifestFeature>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestFeature {
    pub modality: Modality,
    pub kind: FeatureKind,
    pub frame_rate_hz: f64,
    pub path: String,
}

#[derive(Debug, Deserialize)]
struct LabelRow {
    sequence_id: String,
    annotator_id: String,
    label: String,
    intensity: f64,
}

#[derive(Debug, Deserialize)]
struct SummaryRow {
    sequence_id: String,
    annotator_id: String,
    dimension: String,
    value: f64,
}

#[derive(Debug, Deserialize)]
struct TraceRow {
    sequence_id: String,
    annotator_id: String,
    dimension: String,
    t_index: usize,
    value: f64,
    #[serde(default)]
    rate_hz: Option<f64>,
}

/// Number of samples a trace at `rate` needs to cover `[0, duration]`.
pub fn trace_len(duration_s: f64, rate_hz: f64) -> usize {
    ((duration_s * rate_hz + 1e-9).floor() as usize + 1).max(2)
}

fn read_text(path: &Path) -> Result<String> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    Ok(fs::read_to_string(path)?)
}

fn csv_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let text = read_text(path)?;
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let name = path.display().to_string();
    let mut out = Vec::new();
    for (i, rec) in rdr.deserialize().enumerate() {
        let row = rec.map_err(|e| {
            let field = match e.kind() {
                csv::ErrorKind::Deserialize { err, .. } => err
                    .field()
                    .map(|f| format!("column {f}"))
                    .unwrap_or_else(|| "row".into()),
                _ => "row".into(),
            };
            Error::schema(&name, Some(i + 1), field, e.to_string())
        })?;
        out.push(row);
    }
    Ok(out)
}

fn read_feature_csv(path: &Path, feat: &ManifestFeature) -> Result<FeatureMatrix> {
    let text = read_text(path)?;
    let name = path.display().to_string();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let dim = rdr.headers()?.len();
    let mut data = Vec::new();
    let mut n_frames = 0;
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(Error::schema(&name, Some(i + 1), "row", format!("expected {dim} values, found {}", rec.len())));
        }
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::schema(&name, Some(i + 1), format!("f{j}"), format!("not a number: `{field}`")))?;
            if !v.is_finite() {
                return Err(Error::RangeViolation {
                    context: format!("{name} row {} f{j}", i + 1),
                    value: v,
                    range: "finite",
                });
            }
            data.push(v);
        }
        n_frames += 1;
    }
    if n_frames == 0 || dim == 0 {
        return Err(Error::schema(&name, None, "frames", "feature file has no frames"));
    }
    FeatureMatrix::new(feat.modality, feat.kind, feat.frame_rate_hz, n_frames, dim, data)
}

/// Loads and fully validates a corpus from its manifest.
pub fn load_corpus(manifest_path: impl AsRef<Path>) -> Result<Corpus> {
    let manifest_path = manifest_path.as_ref();
    let manifest: Manifest = serde_json::from_str(&read_text(manifest_path)?)
        .map_err(|e| Error::schema(manifest_path.display().to_string(), Some(e.line()), "manifest", e.to_string()))?;
    let root = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let trace_rate = manifest.trace_rate_hz.unwrap_or(DEFAULT_TRACE_RATE_HZ);
    if !(trace_rate > 0.0) {
        return Err(Error::RangeViolation {
            context: "manifest.trace_rate_hz".into(),
            value: trace_rate,
            range: "(0, inf)",
        });
    }

    let mut seq_index: HashMap<String, usize> = HashMap::new();
    for (i, s) in manifest.sequences.iter().enumerate() {
        if seq_index.insert(s.sequence_id.clone(), i).is_some() {
            return Err(Error::DuplicateId(format!("sequence {}", s.sequence_id)));
        }
    }

    let labels_path = root.join(&manifest.labels_csv);
    let label_rows: Vec<LabelRow> = csv_rows(&labels_path)?;
    let annotators = match &manifest.annotators {
        Some(a) => a.clone(),
        None => {
            let mut a: Vec<String> = label_rows.iter().map(|r| r.annotator_id.clone()).collect();
            a.sort();
            a.dedup();
            a
        }
    };
    if annotators.is_empty() {
        return Err(Error::schema(labels_path.display().to_string(), None, "annotator_id", "no annotators"));
    }
    let ann_index: HashMap<&str, usize> = annotators.iter().enumerate().map(|(i, a)| (a.as_str(), i)).collect();
    let n_seq = manifest.sequences.len();
    let k = annotators.len();

    let lookup = |file: &Path, row: usize, seq: &str, ann: &str| -> Result<(usize, usize)> {
        let s = *seq_index
            .get(seq)
            .ok_or_else(|| Error::schema(file.display().to_string(), Some(row), "sequence_id", format!("unknown sequence `{seq}`")))?;
        let a = *ann_index
            .get(ann)
            .ok_or_else(|| Error::schema(file.display().to_string(), Some(row), "annotator_id", format!("unknown annotator `{ann}`")))?;
        Ok((s, a))
    };

    let mut intensity = vec![vec![[f64::NAN; N_LABELS]; k]; n_seq];
    for (i, r) in label_rows.iter().enumerate() {
        let (s, a) = lookup(&labels_path, i + 1, &r.sequence_id, &r.annotator_id)?;
        let label: LabelId = r
            .label
            .parse()
            .map_err(|_| Error::schema(labels_path.display().to_string(), Some(i + 1), "label", format!("unknown label `{}`", r.label)))?;
        if !(0.0..=1.0).contains(&r.intensity) {
            return Err(Error::RangeViolation {
                context: format!("{}/{}/{label}.intensity", r.sequence_id, r.annotator_id),
                value: r.intensity,
                range: "[0, 1]",
            });
        }
        let cell = &mut intensity[s][a][label.index()];
        if !cell.is_nan() {
            return Err(Error::schema(labels_path.display().to_string(), Some(i + 1), "label", "duplicate entry"));
        }
        *cell = r.intensity;
    }

    let summaries_path = root.join(&manifest.summaries_csv);
    let mut summary = vec![vec![[f64::NAN; N_DIMENSIONS]; k]; n_seq];
    for (i, r) in csv_rows::<SummaryRow>(&summaries_path)?.iter().enumerate() {
        let (s, a) = lookup(&summaries_path, i + 1, &r.sequence_id, &r.annotator_id)?;
        let dim: DimensionId = r.dimension.parse().map_err(|_| {
            Error::schema(summaries_path.display().to_string(), Some(i + 1), "dimension", format!("unknown dimension `{}`", r.dimension))
        })?;
        if !(-1.0..=1.0).contains(&r.value) {
            return Err(Error::RangeViolation {
                context: format!("{}/{}/{dim}.summary", r.sequence_id, r.annotator_id),
                value: r.value,
                range: "[-1, 1]",
            });
        }
        let cell = &mut summary[s][a][dim.index()];
        if !cell.is_nan() {
            return Err(Error::schema(summaries_path.display().to_string(), Some(i + 1), "dimension", "duplicate entry"));
        }
        *cell = r.value;
    }

    let traces_path = root.join(&manifest.traces_csv);
    let mut raw_traces: Vec<Vec<Vec<Vec<(usize, f64)>>>> = vec![vec![vec![Vec::new(); N_DIMENSIONS]; k]; n_seq];
    let mut trace_rates: HashMap<(usize, usize, usize), f64> = HashMap::new();
    for (i, r) in csv_rows::<TraceRow>(&traces_path)?.iter().enumerate() {
        let (s, a) = lookup(&traces_path, i + 1, &r.sequence_id, &r.annotator_id)?;
        let dim: DimensionId = r.dimension.parse().map_err(|_| {
            Error::schema(traces_path.display().to_string(), Some(i + 1), "dimension", format!("unknown dimension `{}`", r.dimension))
        })?;
        if !(-1.0..=1.0).contains(&r.value) {
            return Err(Error::RangeViolation {
                context: format!("{}/{}/{dim}.trace[{}]", r.sequence_id, r.annotator_id, r.t_index),
                value: r.value,
                range: "[-1, 1]",
            });
        }
        if let Some(rate) = r.rate_hz {
            if !(rate > 0.0) {
                return Err(Error::schema(traces_path.display().to_string(), Some(i + 1), "rate_hz", "must be > 0"));
            }
            trace_rates.insert((s, a, dim.index()), rate);
        }
        raw_traces[s][a][dim.index()].push((r.t_index, r.value));
    }

    let mut sequences = Vec::with_capacity(n_seq);
    for (s, ms) in manifest.sequences.iter().enumerate() {
        let id = &ms.sequence_id;
        let mut features = BTreeMap::new();
        for f in &ms.features {
            let path = root.join(&f.path);
            let fm = read_feature_csv(&path, f)?;
            if features.insert((f.modality, f.kind), fm).is_some() {
                return Err(Error::DuplicateId(format!("{id} features {}.{}", f.modality, f.kind)));
            }
        }
        for (a, ann) in annotators.iter().enumerate() {
            if let Some(label) = LabelId::ALL.iter().find(|l| intensity[s][a][l.index()].is_nan()) {
                return Err(Error::schema(
                    labels_path.display().to_string(),
                    None,
                    "intensity",
                    format!("missing entry for sequence {id}, annotator {ann}, label {label}"),
                ));
            }
            if let Some(dim) = DimensionId::ALL.iter().find(|d| summary[s][a][d.index()].is_nan()) {
                return Err(Error::schema(
                    summaries_path.display().to_string(),
                    None,
                    "value",
                    format!("missing entry for sequence {id}, annotator {ann}, dimension {dim}"),
                ));
            }
        }
        let target_len = trace_len(ms.duration_s, trace_rate);
        let mut dim_trace = Vec::with_capacity(k);
        for (a, ann) in annotators.iter().enumerate() {
            let mut row = Vec::with_capacity(N_DIMENSIONS);
            for dim in DimensionId::ALL {
                let mut samples = std::mem::take(&mut raw_traces[s][a][dim.index()]);
                samples.sort_by_key(|(t, _)| *t);
                let ctx = |msg: &str| {
                    Error::schema(
                        traces_path.display().to_string(),
                        None,
                        "t_index",
                        format!("sequence {id}, annotator {ann}, dimension {dim}: {msg}"),
                    )
                };
                if samples.iter().enumerate().any(|(i, (t, _))| *t != i) {
                    return Err(ctx("t_index must run 0..L without gaps or duplicates"));
                }
                if samples.len() < 2 {
                    return Err(ctx("trace needs at least 2 samples"));
                }
                let values: Vec<f64> = samples.into_iter().map(|(_, v)| v).collect();
                let rate = trace_rates.get(&(s, a, dim.index())).copied().unwrap_or(trace_rate);
                let mut values = if (rate - trace_rate).abs() > 1e-12 {
                    let span = (values.len() - 1) as f64 / rate;
                    let n = (span * trace_rate + 1e-9).floor() as usize + 1;
                    resample_linear(&values, rate, trace_rate, n)
                } else {
                    values
                };
                if values.len() + 1 < target_len {
                    return Err(ctx(&format!(
                        "trace has {} samples at {trace_rate} Hz but {target_len} are needed to cover {} s",
                        values.len(),
                        ms.duration_s
                    )));
                }
                values.truncate(target_len);
                while values.len() < target_len {
                    let last = *values.last().expect("len >= 2");
                    values.push(last);
                }
                row.push(TimeSeries::new(trace_rate, values));
            }
            dim_trace.push(row);
        }
        sequences.push(Sequence {
            sequence_id: id.clone(),
            subject_id: ms.subject_id.clone(),
            session_id: ms.session_id.clone(),
            duration_s: ms.duration_s,
            features,
            annotations: AnnotationBundle {
                annotator_ids: annotators.clone(),
                label_intensity: intensity[s].clone(),
                dim_summary: summary[s].clone(),
                dim_trace,
            },
        });
    }

    let corpus = Corpus {
        corpus_id: manifest.corpus_id,
        age_group: manifest.age_group,
        trace_rate_hz: trace_rate,
        annotator_ids: annotators,
        subjects: manifest.subjects,
        sequences,
        provenance: manifest.provenance,
    };
    corpus.validate()?;
    Ok(corpus)
}

fn feature_file_name(seq: &str, m: Modality, k: FeatureKind) -> String {
    format!("features/{seq}.{m}.{k}.csv")
}

/// Renders every file of the on-disk layout in memory, keyed by relative path.
fn render(c: &Corpus) -> Result<BTreeMap<String, String>> {
    let mut files = BTreeMap::new();
    let manifest = Manifest {
        format: Some(MANIFEST_FORMAT.into()),
        corpus_id: c.corpus_id.clone(),
        age_group: c.age_group,
        trace_rate_hz: Some(c.trace_rate_hz),
        annotators: Some(c.annotator_ids.clone()),
        subjects: c.subjects.clone(),
        labels_csv: default_labels_csv(),
        summaries_csv: default_summaries_csv(),
        traces_csv: default_traces_csv(),
        sequences: c
            .sequences
            .iter()
            .map(|s| ManifestSequence {
                sequence_id: s.sequence_id.clone(),
                subject_id: s.subject_id.clone(),
                session_id: s.session_id.clone(),
                duration_s: s.duration_s,
                features: s
                    .features
                    .values()
                    .map(|f| ManifestFeature {
                        modality: f.modality,
                        kind: f.kind,
                        frame_rate_hz: f.frame_rate_hz,
                        path: feature_file_name(&s.sequence_id, f.modality, f.kind),
                    })
                    .collect(),
            })
            .collect(),
        provenance: c.provenance.clone(),
    };
    let mut json = serde_json::to_string_pretty(&manifest)?;
    json.push('\n');
    files.insert("manifest.json".into(), json);

    let mut labels = String::from("sequence_id,annotator_id,label,intensity\n");
    let mut summaries = String::from("sequence_id,annotator_id,dimension,value\n");
    let mut traces = String::from("sequence_id,annotator_id,dimension,t_index,value\n");
    for s in &c.sequences {
        let ann = &s.annotations;
        for (a, aid) in ann.annotator_ids.iter().enumerate() {
            for l in LabelId::ALL {
                let _ = writeln!(labels, "{},{aid},{l},{}", s.sequence_id, ann.intensity(a, *l));
            }
            for d in DimensionId::ALL {
                let _ = writeln!(summaries, "{},{aid},{d},{}", s.sequence_id, ann.summary(a, *d));
            }
            for d in DimensionId::ALL {
                for (t, v) in ann.trace(a, *d).values.iter().enumerate() {
                    let _ = writeln!(traces, "{},{aid},{d},{t},{v}", s.sequence_id);
                }
            }
        }
        for f in s.features.values() {
            let mut out = (0..f.dim).map(|j| format!("f{j}")).collect::<Vec<_>>().join(",");
            out.push('\n');
            for frame in f.frames() {
                let row: Vec<String> = frame.iter().map(|v| v.to_string()).collect();
                out.push_str(&row.join(","));
                out.push('\n');
            }
            files.insert(feature_file_name(&s.sequence_id, f.modality, f.kind), out);
        }
    }
    files.insert("labels.csv".into(), labels);
    files.insert("summaries.csv".into(), summaries);
    files.insert("traces.csv".into(), traces);
    Ok(files)
}

/// Writes the corpus under `dir` and returns the manifest path.
pub fn write_corpus(c: &Corpus, dir: impl AsRef<Path>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir.join("features"))?;
    for (rel, content) in render(c)? {
        fs::write(dir.join(rel), content)?;
    }
    Ok(dir.join("manifest.json"))
}

/// SHA-256 over the canonical on-disk rendering of the corpus.
pub fn corpus_hash(c: &Corpus) -> Result<String> {
    let mut h = Sha256::new();
    for (rel, content) in render(c)? {
        h.update(rel.as_bytes());
        h.update([0u8]);
        h.update(content.as_bytes());
        h.update([0u8]);
    }
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_len_covers_duration() {
        assert_eq!(trace_len(2.0, 10.0), 21);
        assert_eq!(trace_len(0.01, 10.0), 2);
        assert_eq!(trace_len(0.3, 10.0), 4);
    }
}

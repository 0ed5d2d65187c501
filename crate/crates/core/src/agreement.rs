//! Corpus analyses: label frequencies, inter-annotator agreement on label
//! presence and intensity, agreement on appraisal dimensions, and the
//! label-dimension correlation map.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DimensionId, LabelId, N_DIMENSIONS, N_LABELS};
use crate::error::{Error, Result};
use crate::gold::align_traces;
use crate::stats::{bonferroni, mean, pcc, sd_sample, uar_binary};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelFrequency {
    pub label: LabelId,
    pub ge1: usize,
    pub ge2: usize,
    pub ge3: usize,
}

/// Number of sequences where at least 1, 2 and 3 annotators marked each label.
pub fn label_frequencies(c: &Corpus) -> Vec<LabelFrequency> {
    LabelId::ALL
        .iter()
        .map(|&label| {
            let mut f = LabelFrequency { label, ge1: 0, ge2: 0, ge3: 0 };
            for seq in &c.sequences {
                let n = seq.annotations.presence_count(label);
                f.ge1 += usize::from(n >= 1);
                f.ge2 += usize::from(n >= 2);
                f.ge3 += usize::from(n >= 3);
            }
            f
        })
        .collect()
}

/// An agreement value averaged over annotator pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairAverage {
    pub value: f64,
    pub n_pairs: usize,
    /// Pairs left out because the statistic was undefined for them.
    pub skipped: usize,
}

fn average_pairs(values: &[Option<f64>], what: impl FnOnce() -> String) -> Result<PairAverage> {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        return Err(Error::NoValidPairs(what()));
    }
    Ok(PairAverage {
        value: mean(&defined),
        n_pairs: defined.len(),
        skipped: values.len() - defined.len(),
    })
}

fn presence_of(c: &Corpus, annotator: usize, label: LabelId) -> Vec<bool> {
    c.sequences
        .iter()
        .map(|s| s.annotations.intensity(annotator, label) > 0.0)
        .collect()
}

fn intensities_of(c: &Corpus, annotator: usize, label: LabelId) -> Vec<f64> {
    c.sequences
        .iter()
        .map(|s| s.annotations.intensity(annotator, label))
        .collect()
}

/// Mean UAR over ordered annotator pairs, one annotator's presence marks
/// scored against the other's. UAR is not symmetric, so both directions count.
pub fn presence_agreement(c: &Corpus, label: LabelId) -> Result<PairAverage> {
    let k = c.annotator_ids.len();
    let marks: Vec<Vec<bool>> = (0..k).map(|a| presence_of(c, a, label)).collect();
    let mut values = Vec::new();
    for a in 0..k {
        for b in 0..k {
            if a != b {
                values.push(uar_binary(&marks[a], &marks[b]).ok());
            }
        }
    }
    average_pairs(&values, || format!("presence of {label}"))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntensityAgreementMode {
    /// Mean PCC over unordered annotator pairs.
    #[default]
    PairAveraged,
    /// Mean PCC of each annotator against the mean of the others.
    AnnotatorVsRest,
}

pub fn intensity_agreement(c: &Corpus, label: LabelId, mode: IntensityAgreementMode) -> Result<PairAverage> {
    let k = c.annotator_ids.len();
    let series: Vec<Vec<f64>> = (0..k).map(|a| intensities_of(c, a, label)).collect();
    if c.sequences.len() < 2 {
        return Err(Error::NoValidPairs(format!("intensity of {label}")));
    }
    let mut values = Vec::new();
    match mode {
        IntensityAgreementMode::PairAveraged => {
            for a in 0..k {
                for b in a + 1..k {
                    values.push(pcc(&series[a], &series[b]).ok().map(|r| r.r));
                }
            }
        }
        IntensityAgreementMode::AnnotatorVsRest => {
            for a in 0..k {
                let rest: Vec<f64> = (0..c.sequences.len())
                    .map(|i| (0..k).filter(|&b| b != a).map(|b| series[b][i]).sum::<f64>() / (k - 1) as f64)
                    .collect();
                values.push(pcc(&series[a], &rest).ok().map(|r| r.r));
            }
        }
    }
    average_pairs(&values, || format!("intensity of {label}"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Granularity {
    Sequence,
    Session,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DimForm {
    Continuous,
    Summary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimAgreement {
    pub dimension: DimensionId,
    pub granularity: Granularity,
    pub form: DimForm,
    pub mean_pcc: f64,
    /// Sample sd across units; 0 with a single unit.
    pub sd_pcc: f64,
    pub n_units: usize,
    /// Annotator pairs skipped for zero variance.
    pub skipped_pairs: usize,
}

/// Mean PCC over unordered pairs of the given per-annotator series, or None
/// when every pair is degenerate.
fn mean_pair_pcc(series: &[Vec<f64>], skipped: &mut usize) -> Option<f64> {
    let mut rs = Vec::new();
    for a in 0..series.len() {
        for b in a + 1..series.len() {
            match pcc(&series[a], &series[b]) {
                Ok(r) => rs.push(r.r),
                Err(_) => *skipped += 1,
            }
        }
    }
    (!rs.is_empty()).then(|| mean(&rs))
}

/// Agreement on one dimension. Units by case:
///
/// * continuous, sequence: one unit per sequence, PCC over trace samples;
/// * continuous, session: one unit per session, traces concatenated;
/// * summary, sequence: one unit per session, PCC over that session's sequences;
/// * summary, session: one unit per annotator pair, PCC over per-session
///   mean summaries.
///
/// Continuous and summary-sequence units average the pair PCCs inside the unit.
pub fn dimension_agreement(c: &Corpus, d: DimensionId, granularity: Granularity, form: DimForm) -> Result<DimAgreement> {
    let k = c.annotator_ids.len();
    let mut skipped = 0;
    let mut units: Vec<f64> = Vec::new();
    let by_session = {
        let mut m: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, s) in c.sequences.iter().enumerate() {
            m.entry(s.session_id.as_str()).or_default().push(i);
        }
        m
    };
    let aligned = |i: usize| -> Result<Vec<Vec<f64>>> {
        let ann = &c.sequences[i].annotations;
        Ok(align_traces(&ann.traces(d), c.trace_rate_hz)?
            .into_iter()
            .map(|t| t.values)
            .collect())
    };
    match (form, granularity) {
        (DimForm::Continuous, Granularity::Sequence) => {
            for i in 0..c.sequences.len() {
                units.extend(mean_pair_pcc(&aligned(i)?, &mut skipped));
            }
        }
        (DimForm::Continuous, Granularity::Session) => {
            for idx in by_session.values() {
                let mut series = vec![Vec::new(); k];
                for &i in idx {
                    for (acc, t) in series.iter_mut().zip(aligned(i)?) {
                        acc.extend(t);
                    }
                }
                units.extend(mean_pair_pcc(&series, &mut skipped));
            }
        }
        (DimForm::Summary, Granularity::Sequence) => {
            for idx in by_session.values() {
                if idx.len() < 2 {
                    continue;
                }
                let series: Vec<Vec<f64>> = (0..k)
                    .map(|a| idx.iter().map(|&i| c.sequences[i].annotations.summary(a, d)).collect())
                    .collect();
                units.extend(mean_pair_pcc(&series, &mut skipped));
            }
        }
        (DimForm::Summary, Granularity::Session) => {
            let session_means: Vec<Vec<f64>> = (0..k)
                .map(|a| {
                    by_session
                        .values()
                        .map(|idx| mean(&idx.iter().map(|&i| c.sequences[i].annotations.summary(a, d)).collect::<Vec<_>>()))
                        .collect()
                })
                .collect();
            if session_means.first().map_or(0, |s| s.len()) >= 2 {
                for a in 0..k {
                    for b in a + 1..k {
                        match pcc(&session_means[a], &session_means[b]) {
                            Ok(r) => units.push(r.r),
                            Err(_) => skipped += 1,
                        }
                    }
                }
            }
        }
    }
    if units.is_empty() {
        return Err(Error::NoValidPairs(format!("{d} ({form:?}, {granularity:?})")));
    }
    Ok(DimAgreement {
        dimension: d,
        granularity,
        form,
        mean_pcc: mean(&units),
        sd_pcc: if units.len() > 1 { sd_sample(&units) } else { 0.0 },
        n_units: units.len(),
        skipped_pairs: skipped,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn symbol(self) -> char {
        match self {
            Sign::Positive => '+',
            Sign::Negative => '-',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DimLink {
    pub dimension: DimensionId,
    pub sign: Sign,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LabelDimEntry {
    pub label: LabelId,
    pub dimension: DimensionId,
    /// Mean of the consistent per-annotator correlations; None when fewer
    /// than two annotators agree in significance and sign.
    pub mean_pcc: Option<f64>,
    pub n_consistent: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelDimCorrMap {
    /// Label-major, dimension-minor, all 23 x 5 pairs.
    pub entries: Vec<LabelDimEntry>,
}

impl LabelDimCorrMap {
    pub fn get(&self, label: LabelId, dim: DimensionId) -> Option<f64> {
        self.entries[label.index() * N_DIMENSIONS + dim.index()].mean_pcc
    }

    pub fn links(&self, label: LabelId) -> Vec<DimLink> {
        DimensionId::ALL
            .iter()
            .filter_map(|&dimension| {
                self.get(label, dimension).map(|r| DimLink {
                    dimension,
                    sign: if r > 0.0 { Sign::Positive } else { Sign::Negative },
                })
            })
            .collect()
    }
}

/// Per annotator, correlates each label's intensity with each dimension
/// summary over the sequences where that annotator marked the label, then
/// applies a Bonferroni correction over all label-dimension pairs. A pair is
/// kept when at least two annotators are significant with the same sign.
pub fn label_dimension_correlations(c: &Corpus, alpha: f64) -> LabelDimCorrMap {
    let k = c.annotator_ids.len();
    let m = N_LABELS * N_DIMENSIONS;
    // significant[a][pair] = Some(r) when significant for annotator a.
    let mut significant: Vec<Vec<Option<f64>>> = Vec::with_capacity(k);
    for a in 0..k {
        let mut rs = vec![None; m];
        let mut ps = vec![1.0; m];
        for &label in LabelId::ALL {
            let present: Vec<usize> = (0..c.sequences.len())
                .filter(|&i| c.sequences[i].annotations.intensity(a, label) > 0.0)
                .collect();
            if present.len() < 3 {
                continue;
            }
            let x: Vec<f64> = present.iter().map(|&i| c.sequences[i].annotations.intensity(a, label)).collect();
            for &dim in DimensionId::ALL {
                let y: Vec<f64> = present.iter().map(|&i| c.sequences[i].annotations.summary(a, dim)).collect();
                if let Ok(r) = pcc(&x, &y) {
                    let j = label.index() * N_DIMENSIONS + dim.index();
                    rs[j] = Some(r.r);
                    ps[j] = r.p_two_sided;
                }
            }
        }
        let mask = bonferroni(&ps, alpha);
        significant.push(rs.iter().zip(mask).map(|(r, s)| if s { *r } else { None }).collect());
    }
    let mut entries = Vec::with_capacity(m);
    for &label in LabelId::ALL {
        for &dimension in DimensionId::ALL {
            let j = label.index() * N_DIMENSIONS + dimension.index();
            let pos: Vec<f64> = significant.iter().filter_map(|s| s[j]).filter(|r| *r > 0.0).collect();
            let neg: Vec<f64> = significant.iter().filter_map(|s| s[j]).filter(|r| *r < 0.0).collect();
            // Two consistent groups of opposite sign are a conflict, not a link.
            let chosen = match (pos.len() >= 2, neg.len() >= 2) {
                (true, false) => Some(pos),
                (false, true) => Some(neg),
                (true, true) if pos.len() != neg.len() => Some(if pos.len() > neg.len() { pos } else { neg }),
                _ => None,
            };
            entries.push(LabelDimEntry {
                label,
                dimension,
                n_consistent: chosen.as_ref().map_or(0, |v| v.len()),
                mean_pcc: chosen.map(|v| mean(&v)),
            });
        }
    }
    LabelDimCorrMap { entries }
}

/// Per-label statistics feeding the core-set criteria.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelStats {
    pub label: LabelId,
    pub freq_ge1: usize,
    /// Unknown in tabulated statistics that report a single frequency.
    pub freq_ge2: Option<usize>,
    pub freq_ge3: Option<usize>,
    /// NaN when undefined.
    pub presence_uar: f64,
    /// NaN when undefined.
    pub intensity_pcc: f64,
    /// Number of consistent dimension links. May exceed `dim_links.len()`
    /// when tabulated statistics record only that a link exists.
    pub n_dim_links: usize,
    pub dim_links: Vec<DimLink>,
}

/// Computes every label's statistics from a corpus. Undefined agreement
/// values become NaN, which fails any threshold.
pub fn label_stats(c: &Corpus, alpha: f64, mode: IntensityAgreementMode) -> Vec<LabelStats> {
    let freqs = label_frequencies(c);
    let map = label_dimension_correlations(c, alpha);
    freqs
        .iter()
        .map(|f| {
            let links = map.links(f.label);
            LabelStats {
                label: f.label,
                freq_ge1: f.ge1,
                freq_ge2: Some(f.ge2),
                freq_ge3: Some(f.ge3),
                presence_uar: presence_agreement(c, f.label).map_or(f64::NAN, |v| v.value),
                intensity_pcc: intensity_agreement(c, f.label, mode).map_or(f64::NAN, |v| v.value),
                n_dim_links: links.len(),
                dim_links: links,
            }
        })
        .collect()
}

fn fmt_opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        "NA".into()
    } else {
        v.to_string()
    }
}

pub const LABEL_STATS_HEADER: [&str; 8] = [
    "label",
    "freq_ge1",
    "freq_ge2",
    "freq_ge3",
    "presence_uar",
    "intensity_pcc",
    "n_dim_links",
    "dim_links",
];

/// Dimension links are written as `novelty+;coping-`.
pub fn label_stats_csv(stats: &[LabelStats]) -> String {
    let mut out = LABEL_STATS_HEADER.join(",");
    out.push('\n');
    for s in stats {
        let links: Vec<String> = s
            .dim_links
            .iter()
            .map(|l| format!("{}{}", l.dimension, l.sign.symbol()))
            .collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            s.label,
            s.freq_ge1,
            fmt_opt(s.freq_ge2),
            fmt_opt(s.freq_ge3),
            fmt_f(s.presence_uar),
            fmt_f(s.intensity_pcc),
            s.n_dim_links,
            links.join(";")
        );
    }
    out
}

pub fn parse_label_stats_csv(text: &str, file: &str) -> Result<Vec<LabelStats>> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let headers = rdr.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::schema(file, None, name, "missing column"))
    };
    let idx: Vec<usize> = LABEL_STATS_HEADER.iter().map(|h| col(h)).collect::<Result<_>>()?;
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = Some(row + 1);
        let field = |i: usize| rec.get(idx[i]).unwrap_or("");
        let bad = |i: usize, msg: &str| Error::schema(file, row, LABEL_STATS_HEADER[i], msg);
        let opt_usize = |i: usize| -> Result<Option<usize>> {
            match field(i) {
                "" | "NA" => Ok(None),
                v => v.parse().map(Some).map_err(|_| bad(i, "not a count")),
            }
        };
        let real = |i: usize| -> Result<f64> {
            match field(i) {
                "" | "NA" => Ok(f64::NAN),
                v => v.parse().map_err(|_| bad(i, "not a number")),
            }
        };
        let label = LabelId::from_str(field(0)).map_err(|_| bad(0, "unknown label"))?;
        let freq_ge1 = opt_usize(1)?.ok_or_else(|| bad(1, "required"))?;
        let mut dim_links = Vec::new();
        for tok in field(7).split(';').filter(|t| !t.is_empty()) {
            let (name, sign) = match tok.chars().last() {
                Some('+') => (&tok[..tok.len() - 1], Sign::Positive),
                Some('-') => (&tok[..tok.len() - 1], Sign::Negative),
                _ => return Err(bad(7, "link must end in + or -")),
            };
            let dimension = DimensionId::from_str(name).map_err(|_| bad(7, "unknown dimension"))?;
            dim_links.push(DimLink { dimension, sign });
        }
        let n_dim_links = opt_usize(6)?.unwrap_or(dim_links.len());
        if n_dim_links < dim_links.len() {
            return Err(bad(6, "fewer than the listed links"));
        }
        out.push(LabelStats {
            label,
            freq_ge1,
            freq_ge2: opt_usize(2)?,
            freq_ge3: opt_usize(3)?,
            presence_uar: real(4)?,
            intensity_pcc: real(5)?,
            n_dim_links,
            dim_links,
        });
    }
    Ok(out)
}

pub fn frequencies_csv(freqs: &[LabelFrequency]) -> String {
    let mut out = String::from("label,freq_ge1,freq_ge2,freq_ge3\n");
    for f in freqs {
        let _ = writeln!(out, "{},{},{},{}", f.label, f.ge1, f.ge2, f.ge3);
    }
    out
}

pub fn dim_agreement_csv(rows: &[DimAgreement]) -> String {
    let mut out = String::from("dimension,form,granularity,mean_pcc,sd_pcc,n_units,skipped_pairs\n");
    for r in rows {
        let form = match r.form {
            DimForm::Continuous => "continuous",
            DimForm::Summary => "summary",
        };
        let gran = match r.granularity {
            Granularity::Sequence => "sequence",
            Granularity::Session => "session",
        };
        let _ = writeln!(
            out,
            "{},{form},{gran},{:.6},{:.6},{},{}",
            r.dimension, r.mean_pcc, r.sd_pcc, r.n_units, r.skipped_pairs
        );
    }
    out
}

pub fn label_dim_csv(map: &LabelDimCorrMap) -> String {
    let mut out = String::from("label,dimension,mean_pcc,n_consistent\n");
    for e in &map.entries {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            e.label,
            e.dimension,
            e.mean_pcc.map_or("NA".into(), |v| format!("{v:.6}")),
            e.n_consistent
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{AgeGroup, AnnotationBundle, Sequence, TimeSeries};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    /// Corpus of `n` sequences, `k` annotators, one session per 5 sequences.
    /// `fill(annotator, seq, bundle_row)` sets intensities and summaries;
    /// `trace(annotator, seq, dim)` returns trace values at 1 Hz.
    fn build(
        n: usize,
        k: usize,
        mut fill: impl FnMut(usize, usize, &mut [f64; N_LABELS], &mut [f64; N_DIMENSIONS]),
        mut trace: impl FnMut(usize, usize, usize) -> Vec<f64>,
    ) -> Corpus {
        let annotators: Vec<String> = (0..k).map(|a| format!("a{a}")).collect();
        let sequences = (0..n)
            .map(|i| {
                let mut li = vec![[0.0; N_LABELS]; k];
                let mut ds = vec![[0.0; N_DIMENSIONS]; k];
                for a in 0..k {
                    fill(a, i, &mut li[a], &mut ds[a]);
                }
                let dim_trace = (0..k)
                    .map(|a| (0..N_DIMENSIONS).map(|d| TimeSeries::new(1.0, trace(a, i, d))).collect())
                    .collect();
                Sequence {
                    sequence_id: format!("q{i}"),
                    subject_id: format!("s{}", i / 10),
                    session_id: format!("sess{}", i / 5),
                    duration_s: 1.0,
                    features: BTreeMap::new(),
                    annotations: AnnotationBundle {
                        annotator_ids: annotators.clone(),
                        label_intensity: li,
                        dim_summary: ds,
                        dim_trace,
                    },
                }
            })
            .collect();
        Corpus {
            corpus_id: "t".into(),
            age_group: AgeGroup::Young,
            trace_rate_hz: 1.0,
            annotator_ids: annotators,
            subjects: (0..n.div_ceil(10)).map(|s| format!("s{s}")).collect(),
            sequences,
            provenance: None,
        }
    }

    fn flat(_: usize, _: usize, _: usize) -> Vec<f64> {
        vec![0.0, 0.0]
    }

    #[test]
    fn frequencies_count_annotator_thresholds() {
        let happy = LabelId::Happy.index();
        let c = build(
            4,
            6,
            |a, i, li, _| {
                if i == 0 && a < 3 {
                    li[happy] = 0.5;
                }
                if i == 1 && a == 0 {
                    li[happy] = 0.2;
                }
            },
            flat,
        );
        let f = label_frequencies(&c);
        let h = f[happy];
        assert_eq!((h.ge1, h.ge2, h.ge3), (2, 1, 1));
        let sad = f[LabelId::Sad.index()];
        assert_eq!((sad.ge1, sad.ge2, sad.ge3), (0, 0, 0));
    }

    #[test]
    fn frequencies_match_recount() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let marks: Vec<Vec<[bool; N_LABELS]>> = (0..50)
            .map(|_| (0..6).map(|_| std::array::from_fn(|l| rng.random::<f64>() < 0.05 * (l % 7) as f64)).collect())
            .collect();
        let c = build(
            50,
            6,
            |a, i, li, _| {
                for l in 0..N_LABELS {
                    li[l] = if marks[i][a][l] { 0.4 } else { 0.0 };
                }
            },
            flat,
        );
        for f in label_frequencies(&c) {
            let l = f.label.index();
            let count = |t: usize| marks.iter().filter(|s| s.iter().filter(|a| a[l]).count() >= t).count();
            assert_eq!((f.ge1, f.ge2, f.ge3), (count(1), count(2), count(3)));
            assert!(f.ge1 >= f.ge2 && f.ge2 >= f.ge3);
        }
    }

    #[test]
    fn perfect_agreement() {
        let l = LabelId::Relaxed.index();
        let c = build(20, 4, |_, i, li, _| li[l] = if i % 3 == 0 { 0.1 * i as f64 } else { 0.0 }, flat);
        let p = presence_agreement(&c, LabelId::Relaxed).unwrap();
        assert_eq!(p.value, 1.0);
        assert_eq!(p.n_pairs, 12);
        let r = intensity_agreement(&c, LabelId::Relaxed, IntensityAgreementMode::PairAveraged).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn shifted_intensities_still_correlate_perfectly() {
        let l = LabelId::Happy.index();
        let c = build(10, 2, |a, i, li, _| li[l] = 0.05 * i as f64 + 0.3 * a as f64, flat);
        let r = intensity_agreement(&c, LabelId::Happy, IntensityAgreementMode::PairAveraged).unwrap();
        assert!((r.value - 1.0).abs() < 1e-12);
    }

    #[test]
    fn independent_annotators_are_at_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let l = LabelId::Curious.index();
        let draws: Vec<[f64; 2]> = (0..1000).map(|_| [rng.random::<f64>(), rng.random::<f64>()]).collect();
        let c = build(1000, 2, |a, i, li, _| li[l] = draws[i][a], flat);
        let r = intensity_agreement(&c, LabelId::Curious, IntensityAgreementMode::PairAveraged).unwrap();
        assert!(r.value.abs() < 0.05, "{}", r.value);

        let coins: Vec<[bool; 2]> = (0..1000).map(|_| [rng.random::<bool>(), rng.random::<bool>()]).collect();
        let c = build(1000, 2, |a, i, li, _| li[l] = if coins[i][a] { 0.5 } else { 0.0 }, flat);
        let p = presence_agreement(&c, LabelId::Curious).unwrap();
        assert!((p.value - 0.5).abs() < 0.05, "{}", p.value);
    }

    #[test]
    fn rare_disagreed_label_falls_below_chance_threshold() {
        // Rare marks placed independently by each annotator.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let l = LabelId::Sad.index();
        let marks: Vec<Vec<bool>> = (0..1067)
            .map(|_| (0..6).map(|_| rng.random::<f64>() < 0.05).collect())
            .collect();
        let c = build(1067, 6, |a, i, li, _| li[l] = if marks[i][a] { 0.3 } else { 0.0 }, flat);
        let p = presence_agreement(&c, LabelId::Sad).unwrap();
        assert!(p.value < crate::stats::uar_chance_threshold(1067, 0.05), "{}", p.value);
    }

    #[test]
    fn single_class_pairs_are_skipped() {
        let l = LabelId::Proud.index();
        let c = build(10, 2, |a, i, li, _| li[l] = if a == 0 && i % 2 == 0 { 0.5 } else { 0.0 }, flat);
        // Annotator 1 never marks: only the pair scored against annotator 0 is valid.
        let p = presence_agreement(&c, LabelId::Proud).unwrap();
        assert_eq!((p.n_pairs, p.skipped), (1, 1));
        let c = build(10, 2, |_, _, _, _| {}, flat);
        assert!(matches!(presence_agreement(&c, LabelId::Proud), Err(Error::NoValidPairs(_))));
    }

    #[test]
    fn vs_rest_mode_differs_from_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let l = LabelId::Happy.index();
        let base: Vec<f64> = (0..200).map(|_| rng.random::<f64>()).collect();
        let noise: Vec<[f64; 4]> = (0..200).map(|_| std::array::from_fn(|_| rng.random::<f64>())).collect();
        let c = build(200, 4, |a, i, li, _| li[l] = 0.5 * base[i] + 0.5 * noise[i][a], flat);
        let pair = intensity_agreement(&c, LabelId::Happy, IntensityAgreementMode::PairAveraged).unwrap();
        let rest = intensity_agreement(&c, LabelId::Happy, IntensityAgreementMode::AnnotatorVsRest).unwrap();
        assert!(rest.value > pair.value);
    }

    #[test]
    fn identical_traces_agree_fully() {
        let c = build(10, 3, |_, _, _, _| {}, |_, i, d| (0..8).map(|t| ((t + i + d) as f64 * 0.7).sin() * 0.5).collect());
        let a = dimension_agreement(&c, DimensionId::Arousal, Granularity::Sequence, DimForm::Continuous).unwrap();
        assert!((a.mean_pcc - 1.0).abs() < 1e-12);
        assert!(a.sd_pcc < 1e-12);
        let s = dimension_agreement(&c, DimensionId::Arousal, Granularity::Session, DimForm::Continuous).unwrap();
        assert!((s.mean_pcc - 1.0).abs() < 1e-12);
        assert_eq!(s.n_units, 2);
    }

    #[test]
    fn signal_plus_noise_traces_reach_target_pcc() {
        // Unit-variance signal plus unit-variance noise gives pair PCC 0.5.
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let n = Normal::new(0.0, 0.25).unwrap();
        let signal: Vec<Vec<f64>> = (0..40).map(|_| (0..200).map(|_| n.sample(&mut rng)).collect()).collect();
        let noise: Vec<Vec<Vec<f64>>> = (0..40)
            .map(|_| (0..4).map(|_| (0..200).map(|_| n.sample(&mut rng)).collect()).collect())
            .collect();
        let c = build(40, 4, |_, _, _, _| {}, |a, i, _| {
            (0..200).map(|t| signal[i][t] + noise[i][a][t]).collect()
        });
        let r = dimension_agreement(&c, DimensionId::Coping, Granularity::Sequence, DimForm::Continuous).unwrap();
        assert!((r.mean_pcc - 0.5).abs() < 0.05, "{}", r.mean_pcc);
    }

    #[test]
    fn summary_agreement_units() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth: Vec<f64> = (0..40).map(|_| rng.random::<f64>() - 0.5).collect();
        let c = build(40, 3, |_, i, _, ds| ds[0] = truth[i], flat);
        let seq = dimension_agreement(&c, DimensionId::Novelty, Granularity::Sequence, DimForm::Summary).unwrap();
        assert_eq!(seq.n_units, 8);
        assert!((seq.mean_pcc - 1.0).abs() < 1e-12);
        let ses = dimension_agreement(&c, DimensionId::Novelty, Granularity::Session, DimForm::Summary).unwrap();
        assert_eq!(ses.n_units, 3);
        assert!((ses.mean_pcc - 1.0).abs() < 1e-12);
    }

    fn coupled_corpus(n_coupled: usize, seed: u64) -> Corpus {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l = LabelId::Surprised.index();
        let intens: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| 0.1 + 0.9 * rng.random::<f64>()).collect()).collect();
        let other: Vec<Vec<f64>> = (0..60).map(|_| (0..4).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect()).collect();
        build(60, 4, |a, i, li, ds| {
            li[l] = intens[i][a];
            ds[DimensionId::Novelty.index()] = if a < n_coupled { 0.8 * intens[i][a] - 0.4 } else { other[i][a] };
        }, flat)
    }

    #[test]
    fn affine_coupling_yields_positive_link() {
        let map = label_dimension_correlations(&coupled_corpus(3, 1), 0.05);
        let r = map.get(LabelId::Surprised, DimensionId::Novelty).unwrap();
        assert!(r > 0.99);
        assert_eq!(
            map.links(LabelId::Surprised),
            vec![DimLink { dimension: DimensionId::Novelty, sign: Sign::Positive }]
        );
    }

    #[test]
    fn single_annotator_correlation_is_null() {
        let map = label_dimension_correlations(&coupled_corpus(1, 1), 0.05);
        assert_eq!(map.get(LabelId::Surprised, DimensionId::Novelty), None);
    }

    #[test]
    fn label_stats_csv_round_trip() {
        let stats = vec![LabelStats {
            label: LabelId::Relaxed,
            freq_ge1: 950,
            freq_ge2: None,
            freq_ge3: Some(3),
            presence_uar: 0.6137,
            intensity_pcc: f64::NAN,
            n_dim_links: 2,
            dim_links: vec![DimLink { dimension: DimensionId::Arousal, sign: Sign::Negative }],
        }];
        let text = label_stats_csv(&stats);
        let back = parse_label_stats_csv(&text, "x.csv").unwrap();
        assert_eq!(back[0].label, LabelId::Relaxed);
        assert_eq!(back[0].freq_ge2, None);
        assert!(back[0].intensity_pcc.is_nan());
        assert_eq!(back[0].dim_links, stats[0].dim_links);
        assert_eq!(label_stats_csv(&back), text);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn agreement_is_invariant_to_annotator_order(seed in any::<u64>()) {
            let c = coupled_corpus(3, seed);
            let mut rev = c.clone();
            rev.annotator_ids.reverse();
            for s in &mut rev.sequences {
                let a = &mut s.annotations;
                a.annotator_ids.reverse();
                a.label_intensity.reverse();
                a.dim_summary.reverse();
                a.dim_trace.reverse();
            }
            let l = LabelId::Surprised;
            let m = IntensityAgreementMode::PairAveraged;
            prop_assert!((intensity_agreement(&c, l, m).unwrap().value - intensity_agreement(&rev, l, m).unwrap().value).abs() < 1e-12);
            prop_assert_eq!(
                label_dimension_correlations(&c, 0.05).links(l),
                label_dimension_correlations(&rev, 0.05).links(l)
            );
        }

        #[test]
        fn links_survive_positive_affine_rescaling(seed in any::<u64>(), scale in 0.1f64..1.0, shift in -0.05f64..0.05) {
            let c = coupled_corpus(3, seed);
            let mut scaled = c.clone();
            for s in &mut scaled.sequences {
                for row in &mut s.annotations.dim_summary {
                    for v in row.iter_mut() {
                        *v = *v * scale + shift * (1.0 - scale);
                    }
                }
            }
            let a = label_dimension_correlations(&c, 0.05);
            let b = label_dimension_correlations(&scaled, 0.05);
            for &l in LabelId::ALL {
                prop_assert_eq!(a.links(l), b.links(l));
            }
        }
    }
}

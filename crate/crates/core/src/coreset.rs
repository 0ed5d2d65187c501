//! Core-set selection: four per-label criteria, then an intersection with
//! the core set chosen on another corpus.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::agreement::LabelStats;
use crate::corpus::LabelId;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CriteriaThresholds {
    /// Frequency (at least one annotator) must exceed this.
    pub freq_thr: f64,
    /// Presence UAR must exceed this.
    pub uar_thr: f64,
    /// Intensity PCC must exceed this.
    pub pcc_thr: f64,
    pub min_dim_links: usize,
}

impl Default for CriteriaThresholds {
    fn default() -> Self {
        CriteriaThresholds {
            freq_thr: 526.0,
            uar_thr: 0.53,
            pcc_thr: 0.024,
            min_dim_links: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaReport {
    pub label: LabelId,
    pub freq_ok: bool,
    pub presence_ok: bool,
    pub intensity_ok: bool,
    pub dimcorr_ok: bool,
    pub freq: usize,
    pub uar: f64,
    pub pcc: f64,
    pub n_dim_links: usize,
}

impl CriteriaReport {
    pub fn selected(&self) -> bool {
        self.freq_ok && self.presence_ok && self.intensity_ok && self.dimcorr_ok
    }
}

/// Evaluates the criteria for all 23 labels. Reports come back in canonical
/// label order whatever the order of `stats`.
pub fn evaluate_criteria(stats: &[LabelStats], thr: &CriteriaThresholds) -> Result<Vec<CriteriaReport>> {
    let mut by_label: Vec<Option<&LabelStats>> = vec![None; LabelId::ALL.len()];
    for s in stats {
        let slot = &mut by_label[s.label.index()];
        if slot.is_some() {
            return Err(Error::DuplicateId(s.label.to_string()));
        }
        *slot = Some(s);
    }
    LabelId::ALL
        .iter()
        .map(|&label| {
            let s = by_label[label.index()].ok_or_else(|| Error::MissingLabelStats(label.to_string()))?;
            // NaN agreement values fail their comparisons.
            Ok(CriteriaReport {
                label,
                freq_ok: s.freq_ge1 as f64 > thr.freq_thr,
                presence_ok: s.presence_uar > thr.uar_thr,
                intensity_ok: s.intensity_pcc > thr.pcc_thr,
                dimcorr_ok: s.n_dim_links >= thr.min_dim_links,
                freq: s.freq_ge1,
                uar: s.presence_uar,
                pcc: s.intensity_pcc,
                n_dim_links: s.n_dim_links,
            })
        })
        .collect()
}

pub fn selected_labels(reports: &[CriteriaReport]) -> BTreeSet<LabelId> {
    reports.iter().filter(|r| r.selected()).map(|r| r.label).collect()
}

/// Set intersection in canonical label order. Warns when the result is empty.
pub fn intersect_core_sets(a: &BTreeSet<LabelId>, b: &BTreeSet<LabelId>) -> BTreeSet<LabelId> {
    let out: BTreeSet<LabelId> = a.intersection(b).copied().collect();
    if out.is_empty() {
        log::warn!("core-set intersection is empty");
    }
    out
}

/// Parses a label set with one label per line; `#` starts a comment.
pub fn parse_label_set(text: &str) -> Result<BTreeSet<LabelId>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(LabelId::from_str)
        .collect()
}

pub fn criteria_csv(reports: &[CriteriaReport]) -> String {
    let mut out = String::from("label,freq,uar,pcc,n_dim_links,freq_ok,presence_ok,intensity_ok,dimcorr_ok,selected\n");
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.label,
            r.freq,
            r.uar,
            r.pcc,
            r.n_dim_links,
            r.freq_ok,
            r.presence_ok,
            r.intensity_ok,
            r.dimcorr_ok,
            r.selected()
        );
    }
    out
}

/// Markdown table with passing values in bold, sorted by frequency.
pub fn criteria_markdown(reports: &[CriteriaReport]) -> String {
    let mut rows: Vec<&CriteriaReport> = reports.iter().collect();
    rows.sort_by(|a, b| b.selected().cmp(&a.selected()).then(b.freq.cmp(&a.freq)).then(a.label.cmp(&b.label)));
    let bold = |ok: bool, s: String| if ok { format!("**{s}**") } else { s };
    let mut out = String::from("| Label | Frequency | Presence | Intensity | Dimension link |\n|---|---:|---:|---:|:---:|\n");
    for r in rows {
        let uar = if r.uar.is_nan() { "NA".into() } else { format!("{:.2}%", 100.0 * r.uar) };
        let pcc = if r.pcc.is_nan() { "NA".into() } else { crate::stats::fmt_coef(r.pcc) };
        let _ = writeln!(
            out,
            "| {}{} | {} | {} | {} | {} |",
            r.label,
            if r.selected() { " (selected)" } else { "" },
            bold(r.freq_ok, r.freq.to_string()),
            bold(r.presence_ok, uar),
            bold(r.intensity_ok, pcc),
            if r.dimcorr_ok { "yes" } else { "" }
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::agreement::parse_label_stats_csv;
    use proptest::prelude::*;

    const YOUNG: &str = include_str!("../data/young_label_stats.csv");
    const OLDER: &str = include_str!("../data/older_core_set.txt");

    fn young() -> Vec<LabelStats> {
        parse_label_stats_csv(YOUNG, "young_label_stats.csv").unwrap()
    }

    fn set(labels: &[LabelId]) -> BTreeSet<LabelId> {
        labels.iter().copied().collect()
    }

    #[test]
    fn tabulated_statistics_give_seven_candidates() {
        let reports = evaluate_criteria(&young(), &CriteriaThresholds::default()).unwrap();
        use LabelId::*;
        assert_eq!(
            selected_labels(&reports),
            set(&[Relaxed, Interested, Frustrated, Embarrassed, Annoyed, Disappointed, Surprised])
        );
        let sad = &reports[Sad.index()];
        assert!(!sad.presence_ok);
        assert!(sad.intensity_ok);
    }

    #[test]
    fn intersection_with_older_core_set() {
        let reports = evaluate_criteria(&young(), &CriteriaThresholds::default()).unwrap();
        let older = parse_label_set(OLDER).unwrap();
        use LabelId::*;
        assert_eq!(
            intersect_core_sets(&selected_labels(&reports), &older),
            set(&[Relaxed, Interested, Frustrated, Annoyed, Surprised])
        );
    }

    #[test]
    fn all_zero_stats_select_nothing() {
        let stats: Vec<LabelStats> = LabelId::ALL
            .iter()
            .map(|&label| LabelStats {
                label,
                freq_ge1: 0,
                freq_ge2: Some(0),
                freq_ge3: Some(0),
                presence_uar: 0.0,
                intensity_pcc: 0.0,
                n_dim_links: 0,
                dim_links: vec![],
            })
            .collect();
        let reports = evaluate_criteria(&stats, &CriteriaThresholds::default()).unwrap();
        assert!(reports.iter().all(|r| !r.freq_ok && !r.presence_ok && !r.intensity_ok && !r.dimcorr_ok));
    }

    #[test]
    fn missing_label_is_an_error() {
        let mut s = young();
        s.retain(|l| l.label != LabelId::Sad);
        assert!(matches!(
            evaluate_criteria(&s, &CriteriaThresholds::default()),
            Err(Error::MissingLabelStats(l)) if l == "sad"
        ));
    }

    #[test]
    fn set_identities() {
        let a = set(&[LabelId::Happy, LabelId::Sad]);
        assert_eq!(intersect_core_sets(&a, &a), a);
        assert!(intersect_core_sets(&a, &set(&[LabelId::Proud])).is_empty());
    }

    #[test]
    fn reports_are_byte_identical_across_runs() {
        let a = criteria_csv(&evaluate_criteria(&young(), &CriteriaThresholds::default()).unwrap());
        let b = criteria_csv(&evaluate_criteria(&young(), &CriteriaThresholds::default()).unwrap());
        assert_eq!(a, b);
    }

    proptest! {
        #[test]
        fn raising_thresholds_never_adds_labels(
            df in 0.0f64..300.0, du in 0.0f64..0.1, dp in 0.0f64..0.2, shuffle_seed in any::<u64>()
        ) {
            use rand::{seq::SliceRandom, SeedableRng};
            let base = CriteriaThresholds::default();
            let raised = CriteriaThresholds {
                freq_thr: base.freq_thr + df,
                uar_thr: base.uar_thr + du,
                pcc_thr: base.pcc_thr + dp,
                min_dim_links: 1,
            };
            let mut stats = young();
            let lo = selected_labels(&evaluate_criteria(&stats, &base).unwrap());
            stats.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(shuffle_seed));
            let shuffled = selected_labels(&evaluate_criteria(&stats, &base).unwrap());
            let hi = selected_labels(&evaluate_criteria(&stats, &raised).unwrap());
            prop_assert!(hi.is_subset(&lo));
            prop_assert_eq!(shuffled, lo);
        }
    }
}

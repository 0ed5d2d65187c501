//! Within-, cross- and mixed-corpus experiments over representations,
//! targets and modalities, scored by CCC over all test predictions.

mod export;
mod runner;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use export::{results_csv, results_table, ResultTable, TableRow};
pub use runner::{run_cross, run_mixed, run_plan, run_within, train_single};

use crate::corpus::{DimensionId, FeatureKind, LabelId, Modality};
use crate::error::{Error, Result};

/// The core-set labels used as label targets unless a plan names others.
pub const DEFAULT_LABEL_TARGETS: [LabelId; 5] =
    [LabelId::Relaxed, LabelId::Interested, LabelId::Frustrated, LabelId::Annoyed, LabelId::Surprised];

/// Number of subject groups of which one forms the early-stopping split of a
/// cross-corpus source.
pub const CROSS_VALIDATION_GROUPS: usize = 5;

macro_rules! text_enum {
    ($(#[$m:meta])* $name:ident, $what:literal, [$($variant:ident => $text:literal),+ $(,)?]) => {
        $(#[$m])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant,)+
        }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant,)+];

            pub fn as_str(self) -> &'static str {
                match self {
                    $($name::$variant => $text,)+
                }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
                    $($text => Ok($name::$variant),)+
                    _ => Err(Error::ConfigInvalid(format!("unknown {}: `{}`", $what, s))),
                }
            }
        }
    };
}

text_enum!(
    Representation, "representation", [
        Labels => "labels",
        DimSummary => "dim_summary",
        DimContinuous => "dim_continuous",
    ]
);

text_enum!(
    Strategy, "strategy", [
        Within => "within",
        Cross => "cross",
        Mixed => "mixed",
    ]
);

text_enum!(
    /// A unimodal input stream or the fusion of all of them.
    Channel, "channel", [
        Text => "text",
        Audio => "audio",
        Video => "video",
        Multimodal => "multimodal",
    ]
);

impl Channel {
    pub fn unimodal(m: Modality) -> Self {
        match m {
            Modality::Text => Channel::Text,
            Modality::Audio => Channel::Audio,
            Modality::Video => Channel::Video,
        }
    }

    /// Column heading in result tables.
    pub fn heading(self) -> &'static str {
        match self {
            Channel::Text => "Text",
            Channel::Audio => "Audio",
            Channel::Video => "Video",
            Channel::Multimodal => "Multimodal",
        }
    }
}

impl Representation {
    pub fn is_continuous(self) -> bool {
        self == Representation::DimContinuous
    }
}

/// A label for the label representation, a dimension otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Target {
    Label(LabelId),
    Dimension(DimensionId),
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Label(l) => l.as_str(),
            Target::Dimension(d) => d.as_str(),
        }
    }
}

/// One strategy applied to one representation. `source` and `test` are
/// corpus ids; mixed pools `source` with `test` and reports on `test`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub representation: Representation,
    /// Target names; empty selects the defaults of the representation.
    #[serde(default)]
    pub targets: Vec<String>,
    pub modalities: Vec<Modality>,
    pub multimodal: bool,
    pub kind: FeatureKind,
    pub strategy: Strategy,
    pub source: String,
    pub test: String,
    pub k: usize,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        let same = self.source == self.test;
        match self.strategy {
            Strategy::Within if !same => {
                return Err(Error::ConfigInvalid(format!("within-corpus run trains on `{}` but tests on `{}`", self.source, self.test)))
            }
            Strategy::Cross | Strategy::Mixed if same => {
                return Err(Error::ConfigInvalid(format!("{} run needs two different corpora, got `{}` twice", self.strategy, self.source)))
            }
            _ => {}
        }
        if self.modalities.is_empty() {
            return Err(Error::ConfigInvalid("at least one modality is required".into()));
        }
        let mut m = self.modalities.clone();
        m.sort();
        m.dedup();
        if m.len() != self.modalities.len() {
            return Err(Error::ConfigInvalid("modalities are duplicated".into()));
        }
        if self.k < 3 {
            return Err(Error::ConfigInvalid("cross-validation needs k >= 3 (train, validation and test folds)".into()));
        }
        self.resolved_targets().map(|_| ())
    }

    pub fn resolved_targets(&self) -> Result<Vec<Target>> {
        let targets: Vec<Target> = match (self.representation, self.targets.is_empty()) {
            (Representation::Labels, true) => DEFAULT_LABEL_TARGETS.iter().map(|&l| Target::Label(l)).collect(),
            (Representation::Labels, false) => {
                self.targets.iter().map(|t| t.parse().map(Target::Label)).collect::<Result<_>>()?
            }
            (_, true) => DimensionId::ALL.iter().map(|&d| Target::Dimension(d)).collect(),
            (_, false) => self.targets.iter().map(|t| t.parse().map(Target::Dimension)).collect::<Result<_>>()?,
        };
        let mut sorted = targets.clone();
        sorted.sort();
        sorted.dedup();
        if sorted.len() != targets.len() {
            return Err(Error::ConfigInvalid("targets are duplicated".into()));
        }
        Ok(targets)
    }

    /// Channels reported per target, unimodal first.
    pub fn channels(&self) -> Vec<Channel> {
        let mut c: Vec<Channel> = self.modalities.iter().map(|&m| Channel::unimodal(m)).collect();
        if self.multimodal {
            c.push(Channel::Multimodal);
        }
        c
    }
}

/// Experiment configuration file: the cross product of representations and
/// strategies over one or two corpora.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentPlan {
    pub seed: u64,
    pub k: usize,
    pub kind: FeatureKind,
    pub representations: Vec<Representation>,
    pub strategies: Vec<Strategy>,
    /// Corpus ids; cross and mixed need exactly two.
    pub corpora: Vec<String>,
    /// Label targets; empty selects the core set.
    pub labels: Vec<String>,
    pub modalities: Vec<Modality>,
    pub multimodal: bool,
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            seed: 1,
            k: 5,
            kind: FeatureKind::Deep,
            representations: Representation::ALL.to_vec(),
            strategies: Strategy::ALL.to_vec(),
            corpora: vec!["young".into(), "older".into()],
            labels: Vec::new(),
            modalities: Modality::ALL.to_vec(),
            multimodal: true,
        }
    }
}

impl ExperimentPlan {
    /// Specs in a fixed order: representation, strategy, then test corpus.
    pub fn specs(&self) -> Result<Vec<ExperimentSpec>> {
        let needs_pair = self.strategies.iter().any(|s| *s != Strategy::Within);
        if self.corpora.is_empty() || self.corpora.len() > 2 || (needs_pair && self.corpora.len() != 2) {
            return Err(Error::ConfigInvalid(format!(
                "plan lists {} corpora; within needs one or two, cross and mixed need exactly two",
                self.corpora.len()
            )));
        }
        let mut out = Vec::new();
        for &representation in &self.representations {
            for &strategy in &self.strategies {
                for (i, test) in self.corpora.iter().enumerate() {
                    let source = match strategy {
                        Strategy::Within => test.clone(),
                        _ => self.corpora[1 - i].clone(),
                    };
                    let spec = ExperimentSpec {
                        representation,
                        targets: if representation == Representation::Labels { self.labels.clone() } else { Vec::new() },
                        modalities: self.modalities.clone(),
                        multimodal: self.multimodal,
                        kind: self.kind,
                        strategy,
                        source,
                        test: test.clone(),
                        k: self.k,
                        seed: self.seed,
                    };
                    spec.validate()?;
                    out.push(spec);
                }
            }
        }
        Ok(out)
    }
}

/// CCC of one (representation, target, channel, strategy, test corpus) cell;
/// `ccc` is None when undefined or when training failed (`error` says why).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub representation: Representation,
    pub kind: FeatureKind,
    pub target: String,
    pub channel: Channel,
    pub strategy: Strategy,
    pub source: String,
    pub test_corpus: String,
    pub ccc: Option<f64>,
    /// Number of (prediction, gold) pairs behind the CCC.
    pub n_values: usize,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultMeta {
    pub seed: u64,
    /// sha256 over the specs and the input corpora.
    pub config_hash: String,
    pub code_version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub meta: ResultMeta,
    pub cells: Vec<Cell>,
}

impl ExperimentResult {
    pub fn get(&self, representation: Representation, target: &str, channel: Channel, strategy: Strategy, test: &str) -> Option<&Cell> {
        self.cells.iter().find(|c| {
            c.representation == representation && c.target == target && c.channel == channel && c.strategy == strategy && c.test_corpus == test
        })
    }

    /// Mean CCC over the targets of one (representation, channel, strategy,
    /// test corpus); None if any target is undefined.
    pub fn target_mean(&self, representation: Representation, channel: Channel, strategy: Strategy, test: &str) -> Option<f64> {
        let v: Vec<Option<f64>> = self
            .cells
            .iter()
            .filter(|c| c.representation == representation && c.channel == channel && c.strategy == strategy && c.test_corpus == test)
            .map(|c| c.ccc)
            .collect();
        if v.is_empty() {
            return None;
        }
        let vals: Option<Vec<f64>> = v.into_iter().collect();
        vals.map(|x| x.iter().sum::<f64>() / x.len() as f64)
    }

    pub fn failed(&self) -> impl Iterator<Item = &Cell> {
        self.cells.iter().filter(|c| c.error.is_some())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: ExperimentResult = serde_json::from_str(text)?;
        for c in &r.cells {
            if let Some(v) = c.ccc {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::RangeViolation {
                        context: format!("ccc of {} / {}", c.target, c.channel),
                        value: v,
                        range: "[-1, 1]",
                    });
                }
            }
        }
        Ok(r)
    }
}

/// Hash of a serializable configuration together with corpus hashes.
pub fn config_hash<T: Serialize>(config: &T, corpus_hashes: &[String]) -> Result<String> {
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(config)?);
    for c in corpus_hashes {
        h.update(b"\0");
        h.update(c.as_bytes());
    }
    h.update(env!("CARGO_PKG_VERSION").as_bytes());
    Ok(hex::encode(h.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(strategy: Strategy, source: &str, test: &str) -> ExperimentSpec {
        ExperimentSpec {
            representation: Representation::Labels,
            targets: Vec::new(),
            modalities: Modality::ALL.to_vec(),
            multimodal: true,
            kind: FeatureKind::Deep,
            strategy,
            source: source.into(),
            test: test.into(),
            k: 5,
            seed: 1,
        }
    }

    #[test]
    fn strategy_corpus_invariants() {
        assert!(spec(Strategy::Within, "young", "young").validate().is_ok());
        assert!(spec(Strategy::Within, "young", "older").validate().is_err());
        assert!(spec(Strategy::Cross, "young", "young").validate().is_err());
        assert!(spec(Strategy::Mixed, "older", "young").validate().is_ok());
    }

    #[test]
    fn targets_resolve_per_representation() {
        let s = spec(Strategy::Within, "y", "y");
        assert_eq!(s.resolved_targets().unwrap().len(), 5);
        let d = ExperimentSpec { representation: Representation::DimSummary, ..s.clone() };
        assert_eq!(d.resolved_targets().unwrap()[0], Target::Dimension(DimensionId::Novelty));
        let bad = ExperimentSpec { targets: vec!["novelty".into()], ..s.clone() };
        assert!(bad.validate().is_err());
        let dup = ExperimentSpec { targets: vec!["sad".into(), "sad".into()], ..s };
        assert!(dup.validate().is_err());
    }

    #[test]
    fn full_plan_expands_to_eighteen_specs() {
        let specs = ExperimentPlan::default().specs().unwrap();
        assert_eq!(specs.len(), 18);
        assert!(specs.iter().filter(|s| s.strategy == Strategy::Cross).all(|s| s.source != s.test));
        let within_only = ExperimentPlan {
            strategies: vec![Strategy::Within],
            corpora: vec!["young".into()],
            ..ExperimentPlan::default()
        };
        assert_eq!(within_only.specs().unwrap().len(), 3);
        let bad = ExperimentPlan { corpora: vec!["young".into()], ..ExperimentPlan::default() };
        assert!(bad.specs().is_err());
    }

    #[test]
    fn plan_reads_from_toml() {
        let p: ExperimentPlan = toml::from_str("seed = 4\nrepresentations = [\"labels\"]\nstrategies = [\"within\", \"cross\"]\n").unwrap();
        assert_eq!(p.seed, 4);
        assert_eq!(p.specs().unwrap().len(), 4);
        assert!(toml::from_str::<ExperimentPlan>("sede = 4").is_err());
    }

    #[test]
    fn out_of_range_ccc_is_rejected_on_load() {
        let r = ExperimentResult {
            meta: ResultMeta { seed: 1, config_hash: "x".into(), code_version: "0".into() },
            cells: vec![Cell {
                representation: Representation::Labels,
                kind: FeatureKind::Deep,
                target: "sad".into(),
                channel: Channel::Text,
                strategy: Strategy::Within,
                source: "y".into(),
                test_corpus: "y".into(),
                ccc: Some(1.5),
                n_values: 3,
                error: None,
            }],
        };
        assert!(ExperimentResult::from_json(&r.to_json().unwrap()).is_err());
    }
}

//! Bayesian linear model on Fisher-z CCC values: sum-coded design,
//! conjugate posterior with a Gibbs cross-check, g-prior Bayes factors for
//! effect blocks and ROPE contrasts of cell means.

pub mod bf;
pub mod design;
pub mod gibbs;
pub mod posterior;
pub mod report;
pub mod rope;

pub use bf::{bf_columns, bf_effect, BayesFactor, Evidence, Side};
pub use design::{build_design, Block, Design, Factor, Observation};
pub use gibbs::{ess, sample, split_rhat, GibbsConfig, Samples};
pub use posterior::{posterior, NigPosterior, PriorConfig, TDist};
pub use report::{analyze, report_markdown, BayesConfig, PosteriorReport};
pub use rope::{rope_contrast, RopeDecision, RopeResult, RopeSpec};

/// Full 3 x 3 x 2 grid of multimodal deep cells with five targets each.
#[cfg(test)]
pub(crate) fn grid(
    value: impl Fn(crate::experiment::Representation, crate::experiment::Strategy, usize, usize) -> f64,
) -> crate::experiment::ExperimentResult {
    use crate::experiment::{Cell, Channel, ExperimentResult, Representation, ResultMeta, Strategy};
    let mut cells = Vec::new();
    for &r in Representation::ALL {
        for &s in Strategy::ALL {
            for (ci, corpus) in ["young", "older"].iter().enumerate() {
                for t in 0..5 {
                    cells.push(Cell {
                        representation: r,
                        kind: crate::corpus::FeatureKind::Deep,
                        target: format!("t{t}"),
                        channel: Channel::Multimodal,
                        strategy: s,
                        source: "young".into(),
                        test_corpus: corpus.to_string(),
                        ccc: Some(value(r, s, ci, t)),
                        n_values: 10,
                        error: None,
                    });
                }
            }
        }
    }
    ExperimentResult {
        meta: ResultMeta {
            seed: 0,
            config_hash: String::new(),
            code_version: String::new(),
        },
        cells,
    }
}

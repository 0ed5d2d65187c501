//! Bayesian comparison of CCC scores: a factorial regression on Fisher-z
//! CCCs, Bayes factors per effect and ROPE decisions per cell.
//!
//! The scores are simulated: labels lose their accuracy across corpora while
//! dimensions keep it.

use affect_eval::bayes::{analyze, report_markdown, BayesConfig};
use affect_eval::corpus::FeatureKind;
use affect_eval::experiment::{Cell, Channel, ExperimentResult, Representation, ResultMeta, Strategy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn main() -> affect_eval::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let noise = Normal::new(0.0, 0.04).expect("valid normal");
    let mut cells = Vec::new();
    for &representation in Representation::ALL {
        for &strategy in Strategy::ALL {
            for test in ["young", "older"] {
                for t in 0..5 {
                    let base = match (representation, strategy) {
                        (Representation::Labels, Strategy::Cross) => 0.0,
                        (Representation::Labels, _) => 0.25,
                        (_, Strategy::Cross) => 0.45,
                        _ => 0.55,
                    };
                    cells.push(Cell {
                        representation,
                        kind: FeatureKind::Deep,
                        target: format!("t{t}"),
                        channel: Channel::Multimodal,
                        strategy,
                        source: if strategy == Strategy::Within { test.into() } else { "other".into() },
                        test_corpus: test.into(),
                        ccc: Some(base + noise.sample(&mut rng)),
                        n_values: 200,
                        error: None,
                    });
                }
            }
        }
    }
    let result = ExperimentResult {
        meta: ResultMeta {
            seed: 5,
            config_hash: "simulated".into(),
            code_version: env!("CARGO_PKG_VERSION").into(),
        },
        cells,
    };
    let cfg = BayesConfig {
        iterations: 8000,
        warmup: 4000,
        ..BayesConfig::default()
    };
    let report = analyze(&result, &cfg)?;
    println!("{}", report_markdown(&report));
    Ok(())
}

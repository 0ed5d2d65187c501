//! Within-corpus cross-validation on a synthetic young corpus: per-target
//! CCC for each modality and their fusion, for all three representations.

use std::time::Instant;

use affect_eval::corpus::Modality;
use affect_eval::experiment::{results_table, run_within, ExperimentSpec, Representation, Strategy};
use affect_eval::synth::{generate_pair, SynthConfig};

fn main() -> affect_eval::Result<()> {
    let (young, _) = generate_pair(&SynthConfig::default())?;
    for &representation in Representation::ALL {
        let spec = ExperimentSpec {
            representation,
            targets: Vec::new(),
            modalities: Modality::ALL.to_vec(),
            multimodal: true,
            kind: affect_eval::corpus::FeatureKind::Deep,
            strategy: Strategy::Within,
            source: "young".into(),
            test: "young".into(),
            k: 5,
            seed: 1,
        };
        let start = Instant::now();
        let result = run_within(&spec, &young)?;
        println!("{}", results_table(&result, representation, Strategy::Within, "young").to_markdown());
        println!("({:.1} s)\n", start.elapsed().as_secs_f64());
    }
    Ok(())
}

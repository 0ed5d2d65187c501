//! Within-, cross- and mixed-corpus training on a corpus pair whose label
//! expression differs between age groups while appraisal expression is
//! shared. Label models transfer poorly; dimension models transfer.

use affect_eval::experiment::{run_plan, Channel, ExperimentPlan, Representation, Strategy};
use affect_eval::synth::{generate_pair, SynthConfig};

fn main() -> affect_eval::Result<()> {
    let cfg = SynthConfig {
        label_map_shift: 0.8,
        dimension_map_shift: 0.0,
        ..SynthConfig::default()
    };
    let (young, older) = generate_pair(&cfg)?;
    let plan = ExperimentPlan {
        representations: vec![Representation::Labels, Representation::DimSummary],
        ..ExperimentPlan::default()
    };
    let result = run_plan(&plan, &[young, older], None)?;
    println!("{:14} {:8} {:>8} {:>8}", "representation", "strategy", "young", "older");
    for &rep in &plan.representations {
        for &strategy in Strategy::ALL {
            let m = |t: &str| result.target_mean(rep, Channel::Multimodal, strategy, t).map_or("NA".into(), |v| format!("{v:.3}"));
            println!("{:14} {:8} {:>8} {:>8}", rep.to_string(), strategy.to_string(), m("young"), m("older"));
        }
    }
    Ok(())
}

//! Annotation agreement on a synthetic corpus: label frequencies, presence
//! and intensity agreement, appraisal-dimension agreement and the
//! label-dimension correlation links.

use affect_eval::agreement::{
    dimension_agreement, intensity_agreement, label_dimension_correlations, label_frequencies, presence_agreement, DimForm,
    Granularity, IntensityAgreementMode,
};
use affect_eval::corpus::DimensionId;
use affect_eval::synth::{generate_pair, SynthConfig};

fn main() -> affect_eval::Result<()> {
    let (young, _) = generate_pair(&SynthConfig::default())?;
    let mut freqs = label_frequencies(&young);
    freqs.sort_by(|a, b| b.ge1.cmp(&a.ge1));
    println!("{:14} {:>5} {:>5} {:>5} {:>7} {:>7}", "label", ">=1", ">=2", ">=3", "UAR", "PCC");
    for f in freqs.iter().take(8) {
        let uar = presence_agreement(&young, f.label).map_or(f64::NAN, |a| a.value);
        let pcc = intensity_agreement(&young, f.label, IntensityAgreementMode::PairAveraged).map_or(f64::NAN, |a| a.value);
        println!("{:14} {:>5} {:>5} {:>5} {uar:>7.3} {pcc:>7.3}", f.label.to_string(), f.ge1, f.ge2, f.ge3);
    }

    println!("\ndimension agreement (mean pairwise PCC)");
    for &d in DimensionId::ALL {
        let trace = dimension_agreement(&young, d, Granularity::Sequence, DimForm::Continuous)?;
        let summary = dimension_agreement(&young, d, Granularity::Session, DimForm::Summary)?;
        println!("  {:20} traces {:.3}  session summaries {:.3}", d.to_string(), trace.mean_pcc, summary.mean_pcc);
    }

    let map = label_dimension_correlations(&young, 0.05);
    println!("\nconsistent label-dimension links");
    for e in map.entries.iter().filter(|e| e.mean_pcc.is_some()) {
        println!("  {} ~ {}: {:+.3} ({} annotators)", e.label, e.dimension, e.mean_pcc.unwrap_or(0.0), e.n_consistent);
    }
    Ok(())
}

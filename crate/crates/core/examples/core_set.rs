//! Core-set selection from tabulated label statistics and its intersection
//! with the core set chosen on the older corpus.

use affect_eval::agreement::parse_label_stats_csv;
use affect_eval::coreset::{criteria_markdown, evaluate_criteria, intersect_core_sets, parse_label_set, selected_labels, CriteriaThresholds};
use affect_eval::stats::{frequency_effect_threshold, EffectThresholdConfig};

const STATS: &str = include_str!("../data/young_label_stats.csv");
const OLDER: &str = include_str!("../data/older_core_set.txt");

fn main() -> affect_eval::Result<()> {
    let stats = parse_label_stats_csv(STATS, "young_label_stats.csv")?;
    let freqs: Vec<usize> = stats.iter().map(|s| s.freq_ge1).collect();
    println!(
        "frequency threshold recomputed from the table: {:.1}",
        frequency_effect_threshold(&freqs, &EffectThresholdConfig::default())
    );

    let reports = evaluate_criteria(&stats, &CriteriaThresholds::default())?;
    println!("{}", criteria_markdown(&reports));
    let candidates = selected_labels(&reports);
    let older = parse_label_set(OLDER)?;
    let join = |s: &std::collections::BTreeSet<_>| s.iter().map(|l: &affect_eval::corpus::LabelId| l.to_string()).collect::<Vec<_>>().join(", ");
    println!("candidates ({}): {}", candidates.len(), join(&candidates));
    let core = intersect_core_sets(&candidates, &older);
    println!("final core set ({}): {}", core.len(), join(&core));
    Ok(())
}

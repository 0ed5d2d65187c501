use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::bf::{bf_columns, bf_effect, BayesFactor};
use super::design::{build_design, Design};
use super::gibbs::{ess, pooled_summary, sample, split_rhat, GibbsConfig};
use super::posterior::{posterior, PriorConfig};
use super::rope::{rope_contrast, RopeResult, RopeSpec};
use crate::corpus::FeatureKind;
use crate::error::{Error, Result};
use crate::experiment::{config_hash, Channel, ExperimentResult, ResultMeta};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BayesConfig {
    pub seed: u64,
    pub chains: usize,
    pub iterations: usize,
    pub warmup: usize,
    pub rope: RopeSpec,
    pub prior: PriorConfig,
    pub channel: Channel,
    pub kind: FeatureKind,
    pub max_rhat: f64,
}

impl Default for BayesConfig {
    fn default() -> Self {
        let g = GibbsConfig::default();
        BayesConfig {
            seed: g.seed,
            chains: g.chains,
            iterations: g.iterations,
            warmup: g.warmup,
            rope: RopeSpec::default(),
            prior: PriorConfig::default(),
            channel: Channel::Multimodal,
            kind: FeatureKind::Deep,
            max_rhat: 1.01,
        }
    }
}

impl BayesConfig {
    fn gibbs(&self) -> GibbsConfig {
        GibbsConfig {
            chains: self.chains,
            iterations: self.iterations,
            warmup: self.warmup,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientSummary {
    pub name: String,
    pub median: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub sampled_mean: f64,
    /// Absent for the intercept.
    pub bf: Option<BayesFactor>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSummary {
    pub name: String,
    pub bf: BayesFactor,
}

/// Posterior of one design cell's mean z-CCC against the ROPE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub representation: String,
    pub strategy: String,
    pub test_corpus: String,
    pub n: usize,
    pub observed_mean_ccc: f64,
    pub rope: RopeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContrastSummary {
    pub name: String,
    pub rope: RopeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub quantity: String,
    pub rhat: f64,
    pub ess: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorReport {
    pub meta: ResultMeta,
    /// Hash of the analysed results.
    pub input_hash: String,
    pub n_observations: usize,
    pub coefficients: Vec<CoefficientSummary>,
    pub effects: Vec<EffectSummary>,
    pub cells: Vec<CellSummary>,
    pub contrasts: Vec<ContrastSummary>,
    pub diagnostics: Vec<Diagnostic>,
    pub max_rhat: f64,
    pub min_ess: f64,
    /// Largest gap between sampled and closed-form coefficient means, in
    /// posterior sd units.
    pub sampler_agreement_sd: f64,
}

impl PosteriorReport {
    pub fn cell(&self, representation: &str, strategy: &str, test_corpus: &str) -> Option<&CellSummary> {
        self.cells.iter().find(|c| c.representation == representation && c.strategy == strategy && c.test_corpus == test_corpus)
    }

    pub fn effect(&self, name: &str) -> Option<&EffectSummary> {
        self.effects.iter().find(|e| e.name == name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn average_rows(design: &Design, cells: &[Vec<&str>]) -> Result<Vec<f64>> {
    let mut acc = vec![0.0; design.n_columns()];
    for c in cells {
        for (a, v) in acc.iter_mut().zip(design.cell_row(c)?) {
            *a += v / cells.len() as f64;
        }
    }
    Ok(acc)
}

/// Main-effect comparisons averaged over the other factors: every pair of
/// levels within each factor, later level minus earlier.
fn factor_contrasts(design: &Design) -> Result<Vec<(String, Vec<f64>)>> {
    let all_cells = cell_grid(design);
    let mut out = Vec::new();
    for (fi, (fname, levels)) in design.factors.iter().enumerate() {
        let level_avg = |l: &str| -> Result<Vec<f64>> {
            let cells: Vec<Vec<&str>> = all_cells.iter().filter(|c| c[fi] == l).cloned().collect();
            average_rows(design, &cells)
        };
        for i in 0..levels.len() {
            for j in i + 1..levels.len() {
                let (a, b) = (level_avg(&levels[i])?, level_avg(&levels[j])?);
                out.push((format!("{fname}: {} - {}", levels[i], levels[j]), a.iter().zip(&b).map(|(x, y)| x - y).collect()));
            }
        }
    }
    Ok(out)
}

fn cell_grid(design: &Design) -> Vec<Vec<&str>> {
    let mut grid: Vec<Vec<&str>> = vec![vec![]];
    for (_, levels) in &design.factors {
        grid = grid.iter().flat_map(|prefix| levels.iter().map(move |l| [prefix.clone(), vec![l.as_str()]].concat())).collect();
    }
    grid
}

/// Fits the model to one channel and feature kind of an experiment result
/// and summarizes effects, cells and contrasts. Fails with
/// `NonConvergence` when any sampled quantity exceeds `max_rhat`.
pub fn analyze(result: &ExperimentResult, cfg: &BayesConfig) -> Result<PosteriorReport> {
    cfg.rope.validate()?;
    let design = build_design(result, cfg.channel, cfg.kind)?;
    let post = posterior(&design, &cfg.prior)?;
    let samples = sample(&design, &post, &cfg.gibbs())?;
    let mut diagnostics = Vec::new();
    let mut diagnose = |quantity: String, draws: &[Vec<f64>]| {
        diagnostics.push(Diagnostic {
            quantity,
            rhat: split_rhat(draws),
            ess: ess(draws),
        })
    };

    let mut coefficients = Vec::new();
    let mut agreement: f64 = 0.0;
    for (j, name) in design.column_names.iter().enumerate() {
        let t = post.coefficient(j);
        let draws = samples.parameter(j);
        let (sampled_mean, _) = pooled_summary(&draws, &[]);
        agreement = agreement.max((sampled_mean - t.location).abs() / t.sd());
        diagnose(name.clone(), &draws);
        coefficients.push(CoefficientSummary {
            name: name.clone(),
            median: t.location,
            ci_low: t.quantile(0.025),
            ci_high: t.quantile(0.975),
            sampled_mean,
            bf: if j == 0 { None } else { Some(bf_columns(&design, &[j])?) },
        });
    }
    diagnose("sigma2".into(), &samples.parameter(design.n_columns()));

    let effects = design
        .blocks
        .iter()
        .map(|b| {
            Ok(EffectSummary {
                name: b.name.clone(),
                bf: bf_effect(&design, &b.name)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for levels in cell_grid(&design) {
        let row = design.cell_row(&levels)?;
        let obs: Vec<f64> = design
            .observations
            .iter()
            .filter(|o| o.representation.as_str() == levels[0] && o.strategy.as_str() == levels[1] && o.test_corpus == levels[2])
            .map(|o| o.ccc)
            .collect();
        let name = levels.join("/");
        diagnose(format!("cell {name}"), &samples.contrast(&row));
        cells.push(CellSummary {
            representation: levels[0].to_string(),
            strategy: levels[1].to_string(),
            test_corpus: levels[2].to_string(),
            n: obs.len(),
            observed_mean_ccc: obs.iter().sum::<f64>() / obs.len().max(1) as f64,
            rope: rope_contrast(&post, &row, &cfg.rope)?,
        });
    }

    let mut contrasts = Vec::new();
    for (name, c) in factor_contrasts(&design)? {
        diagnose(format!("contrast {name}"), &samples.contrast(&c));
        contrasts.push(ContrastSummary {
            rope: rope_contrast(&post, &c, &cfg.rope)?,
            name,
        });
    }

    let worst = diagnostics.iter().max_by(|a, b| a.rhat.total_cmp(&b.rhat)).expect("at least one diagnostic");
    if !(worst.rhat <= cfg.max_rhat) {
        return Err(Error::NonConvergence {
            max_rhat: worst.rhat,
            quantity: worst.quantity.clone(),
        });
    }
    let max_rhat = worst.rhat;
    let min_ess = diagnostics.iter().map(|d| d.ess).fold(f64::INFINITY, f64::min);
    Ok(PosteriorReport {
        meta: ResultMeta {
            seed: cfg.seed,
            config_hash: config_hash(cfg, std::slice::from_ref(&result.meta.config_hash))?,
            code_version: env!("CARGO_PKG_VERSION").into(),
        },
        input_hash: config_hash(result, &[])?,
        n_observations: design.n(),
        coefficients,
        effects,
        cells,
        contrasts,
        diagnostics,
        max_rhat,
        min_ess,
        sampler_agreement_sd: agreement,
    })
}

fn fmt_bf(bf: &BayesFactor) -> String {
    let side = match bf.side {
        super::bf::Side::Bf10 => "BF10",
        super::bf::Side::Bf01 => "BF01",
    };
    if bf.value >= 1000.0 {
        format!("{side} > 1000")
    } else {
        format!("{side} = {:.2}", bf.value)
    }
}

fn fmt_rope_bf(r: &RopeResult) -> String {
    let (side, v) = r.reported_bf();
    if v >= 1000.0 {
        format!("{side} > 1000")
    } else {
        format!("{side} = {v:.2}")
    }
}

/// Markdown summary of a report.
pub fn report_markdown(r: &PosteriorReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# Bayesian analysis of z-CCC\n");
    let _ = writeln!(
        s,
        "{} observations; seed {}; config {}; max R-hat {:.4}; min ESS {:.0}.\n",
        r.n_observations,
        r.meta.seed,
        &r.meta.config_hash[..12.min(r.meta.config_hash.len())],
        r.max_rhat,
        r.min_ess
    );
    let _ = writeln!(s, "## Effects\n\n| Effect | Bayes factor | Evidence |\n|---|---|---|");
    for e in &r.effects {
        let _ = writeln!(s, "| {} | {} | {:?} |", e.name, fmt_bf(&e.bf), e.bf.evidence);
    }
    let _ = writeln!(s, "\n## Cells against the ROPE\n\n| Representation | Strategy | Test corpus | Median z | 95% CrI | P(in ROPE) | Bayes factor | Decision |\n|---|---|---|---:|---|---:|---|---|");
    for c in &r.cells {
        let _ = writeln!(
            s,
            "| {} | {} | {} | {:.3} | [{:.3}, {:.3}] | {:.3} | {} | {:?} |",
            c.representation,
            c.strategy,
            c.test_corpus,
            c.rope.median,
            c.rope.ci_low,
            c.rope.ci_high,
            c.rope.p_in,
            fmt_rope_bf(&c.rope),
            c.rope.decision
        );
    }
    let _ = writeln!(s, "\n## Contrasts\n\n| Contrast | Median z | 95% CrI | P(in ROPE) | Bayes factor | Decision |\n|---|---:|---|---:|---|---|");
    for c in &r.contrasts {
        let _ = writeln!(
            s,
            "| {} | {:.3} | [{:.3}, {:.3}] | {:.3} | {} | {:?} |",
            c.name,
            c.rope.median,
            c.rope.ci_low,
            c.rope.ci_high,
            c.rope.p_in,
            fmt_rope_bf(&c.rope),
            c.rope.decision
        );
    }
    s
}

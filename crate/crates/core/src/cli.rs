//! Command-line front end.
//!
//! Every subcommand reads one TOML configuration file (`--config`). All
//! sections are optional and fall back to defaults:
//!
//! ```toml
//! seed = 7                  # overrides the seed of every section
//! out = "out"               # output directory, overridden by --out
//!
//! [paths]                   # relative to the working directory
//! corpora = ["data/young/manifest.json", "data/older/manifest.json"]
//! cache_dir = "cache"       # default: <out>/cache
//! label_stats = "data/young_label_stats.csv"
//! older_core_set = "data/older_core_set.txt"
//! results = "out/results.json"      # default: <out>/results.json
//! posterior = "out/posterior.json"  # default: <out>/posterior.json
//!
//! [synth]                   # synthetic corpus pair
//! [analysis]                # alpha, intensity_mode, [analysis.thresholds]
//! [train]                   # corpus, representation, target, modality, kind
//! [experiment]              # representations, strategies, corpora, k, ...
//! [bayes]                   # chains, iterations, warmup, [bayes.rope], ...
//! ```
//!
//! Every output file starts with its configuration hash and seed (a comment
//! line in CSV, Markdown and SVG, fields in JSON). Exit codes: 0 on success,
//! 1 on a runtime failure, 2 on a usage or configuration error.

use std::collections::BTreeSet;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{CommandFactory, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::agreement::{
    dim_agreement_csv, dimension_agreement, frequencies_csv, label_dim_csv, label_dimension_correlations, label_frequencies, label_stats,
    label_stats_csv, parse_label_stats_csv, DimForm, Granularity, IntensityAgreementMode, LabelStats,
};
use crate::bayes::{analyze as bayes_analyze, report_markdown, BayesConfig, PosteriorReport};
use crate::coreset::{criteria_csv, criteria_markdown, evaluate_criteria, intersect_core_sets, parse_label_set, selected_labels, CriteriaThresholds};
use crate::corpus::{corpus_hash, corpus_stats, load_corpus, write_corpus, Corpus, DimensionId, FeatureKind, LabelId, Modality};
use crate::error::{Error, Result};
use crate::experiment::{
    config_hash, results_csv, results_table, run_plan, train_single, ExperimentPlan, ExperimentResult, ExperimentSpec, Representation, Strategy,
    DEFAULT_LABEL_TARGETS,
};
use crate::gold::{gold_cache_csv, GoldTask};
use crate::svg;
use crate::synth::{describe, generate_pair, SynthConfig};

#[derive(Debug, Parser)]
#[command(name = "affect-eval", version, about = "Agreement analysis, affect regressors and Bayesian comparison of CCC scores")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Seed for every stage; overrides the configuration.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory; overrides the configuration.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
enum Command {
    /// Generate a synthetic young/older corpus pair.
    Synth,
    /// Load and check the configured corpora.
    Validate,
    /// Agreement statistics, plots and core-set selection.
    Analyze,
    /// Gold-standard cache for the configured corpora.
    Goldstd,
    /// Train one model and save its checkpoint.
    Train,
    /// Run the within/cross/mixed experiment plan.
    Experiment,
    /// Bayesian analysis of experiment results.
    Bayes,
    /// Combined Markdown report of results and posterior.
    Report,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Paths {
    pub corpora: Vec<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    /// Tabulated label statistics for core-set selection.
    pub label_stats: Option<PathBuf>,
    /// Core set chosen on another corpus, intersected with the new one.
    pub older_core_set: Option<PathBuf>,
    pub results: Option<PathBuf>,
    pub posterior: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Significance level of label-dimension correlations.
    pub alpha: f64,
    pub intensity_mode: IntensityAgreementMode,
    pub thresholds: CriteriaThresholds,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            alpha: 0.05,
            intensity_mode: IntensityAgreementMode::default(),
            thresholds: CriteriaThresholds::default(),
        }
    }
}

/// The single model trained by `train`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSelection {
    /// Corpus id; empty selects the first configured corpus.
    pub corpus: String,
    pub representation: Representation,
    pub target: String,
    pub modality: Modality,
    pub kind: FeatureKind,
    pub seed: u64,
}

impl Default for TrainSelection {
    fn default() -> Self {
        TrainSelection {
            corpus: String::new(),
            representation: Representation::Labels,
            target: "relaxed".into(),
            modality: Modality::Text,
            kind: FeatureKind::Deep,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub paths: Paths,
    pub synth: SynthConfig,
    pub analysis: AnalysisConfig,
    pub train: TrainSelection,
    pub experiment: ExperimentPlan,
    pub bayes: BayesConfig,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// Pushes one seed into every section.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
        self.synth.seed = seed;
        self.train.seed = seed;
        self.experiment.seed = seed;
        self.bayes.seed = seed;
    }

    fn check_exists(path: &Path, what: &str) -> Result<()> {
        if path.exists() {
            Ok(())
        } else {
            Err(Error::ConfigInvalid(format!("{what} `{}` does not exist", path.display())))
        }
    }

    /// Checks the referenced input paths that `command` needs.
    fn validate_for(&self, command: Command, out: &Path) -> Result<()> {
        let needs_corpora = matches!(command, Command::Validate | Command::Goldstd | Command::Train | Command::Experiment);
        if needs_corpora && self.paths.corpora.is_empty() {
            return Err(Error::ConfigInvalid("paths.corpora is empty".into()));
        }
        if needs_corpora || command == Command::Analyze {
            for p in &self.paths.corpora {
                Self::check_exists(p, "corpus manifest")?;
            }
        }
        match command {
            Command::Synth => self.synth.validate()?,
            Command::Analyze => {
                if self.paths.corpora.is_empty() && self.paths.label_stats.is_none() {
                    return Err(Error::ConfigInvalid("analyze needs paths.corpora or paths.label_stats".into()));
                }
                if let Some(p) = &self.paths.label_stats {
                    Self::check_exists(p, "label statistics")?;
                }
                if let Some(p) = &self.paths.older_core_set {
                    Self::check_exists(p, "older core set")?;
                }
                if !(self.analysis.alpha > 0.0 && self.analysis.alpha < 1.0) {
                    return Err(Error::ConfigInvalid("analysis.alpha must lie in (0, 1)".into()));
                }
            }
            Command::Experiment => {
                self.experiment.specs()?;
            }
            Command::Bayes => Self::check_exists(&self.results_path(out), "results file")?,
            Command::Report => {
                Self::check_exists(&self.results_path(out), "results file")?;
                Self::check_exists(&self.posterior_path(out), "posterior file")?;
            }
            Command::Validate | Command::Goldstd | Command::Train => {}
        }
        Ok(())
    }

    fn results_path(&self, out: &Path) -> PathBuf {
        self.paths.results.clone().unwrap_or_else(|| out.join("results.json"))
    }

    fn posterior_path(&self, out: &Path) -> PathBuf {
        self.paths.posterior.clone().unwrap_or_else(|| out.join("posterior.json"))
    }
}

/// Hash and seed stamped into every output of one command.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stamp {
    pub config_hash: String,
    pub seed: u64,
}

impl Stamp {
    fn line(&self) -> String {
        format!("config_hash={} seed={}", self.config_hash, self.seed)
    }

    pub fn csv(&self, body: &str) -> String {
        format!("# {}\n{body}", self.line())
    }

    pub fn markdown(&self, body: &str) -> String {
        format!("<!-- {} -->\n\n{body}", self.line())
    }

    /// Inserts a comment after the opening `<svg>` tag.
    pub fn svg(&self, body: &str) -> String {
        match body.find('\n') {
            Some(i) => format!("{}\n<!-- {} -->{}", &body[..i], self.line(), &body[i..]),
            None => body.to_string(),
        }
    }

    pub fn json(&self, body: serde_json::Value) -> Result<String> {
        let v = serde_json::json!({ "config_hash": self.config_hash, "seed": self.seed, "data": body });
        Ok(serde_json::to_string_pretty(&v)? + "\n")
    }
}

fn file_hash(path: &Path) -> Result<String> {
    Ok(hex::encode(Sha256::digest(fs::read(path)?)))
}

/// Writes `content` under `out` and returns the relative name for the console.
fn emit(out: &Path, rel: &str, content: &str) -> Result<String> {
    let path = out.join(rel);
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(&path, content)?;
    Ok(rel.to_string())
}

fn load_corpora(cfg: &RunConfig) -> Result<Vec<Corpus>> {
    cfg.paths.corpora.iter().map(load_corpus).collect()
}

fn corpus_hashes(corpora: &[Corpus]) -> Result<Vec<String>> {
    corpora.iter().map(corpus_hash).collect()
}

fn label_list(set: &BTreeSet<LabelId>) -> String {
    set.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")
}

fn cmd_synth(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let stamp = Stamp {
        config_hash: config_hash(&cfg.synth, &[])?,
        seed: cfg.synth.seed,
    };
    let (mut young, mut older) = generate_pair(&cfg.synth)?;
    let mut written = Vec::new();
    let mut entries = Vec::new();
    for c in [&mut young, &mut older] {
        let mut prov = describe(&cfg.synth);
        prov["config_hash"] = stamp.config_hash.clone().into();
        c.provenance = Some(prov);
        write_corpus(c, out.join(&c.corpus_id))?;
        let manifest = format!("{}/manifest.json", c.corpus_id);
        entries.push(serde_json::json!({
            "corpus_id": c.corpus_id,
            "manifest": manifest,
            "corpus_hash": corpus_hash(c)?,
            "subjects": c.subjects.len(),
            "sequences": c.sequences.len(),
        }));
        written.push(manifest);
    }
    written.push(emit(out, "synth.json", &stamp.json(serde_json::json!({ "corpora": entries }))?)?);
    Ok(written)
}

fn cmd_validate(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let corpora = load_corpora(cfg)?;
    let hashes = corpus_hashes(&corpora)?;
    let seed = cfg.seed.unwrap_or(cfg.experiment.seed);
    let stamp = Stamp {
        config_hash: config_hash(&cfg.paths, &hashes)?,
        seed,
    };
    let entries: Vec<_> = corpora
        .iter()
        .zip(&hashes)
        .map(|(c, h)| {
            let stats = corpus_stats(c);
            println!(
                "{}: {} subjects, {} sequences, {} annotators, mean duration {:.2} s (sd {:.2})",
                c.corpus_id,
                c.subjects.len(),
                stats.n_sequences,
                c.annotator_ids.len(),
                stats.mean_duration_s,
                stats.sd_duration_s
            );
            serde_json::json!({
                "corpus_id": c.corpus_id,
                "corpus_hash": h,
                "subjects": c.subjects.len(),
                "annotators": c.annotator_ids.len(),
                "stats": stats,
            })
        })
        .collect();
    Ok(vec![emit(out, "validate.json", &stamp.json(serde_json::json!({ "corpora": entries }))?)?])
}

/// Criteria outputs for one set of label statistics under `dir`; returns
/// the selected labels.
fn core_set_outputs(
    cfg: &RunConfig,
    stats: &[LabelStats],
    older: Option<&BTreeSet<LabelId>>,
    stamp: &Stamp,
    out: &Path,
    dir: &str,
    written: &mut Vec<String>,
) -> Result<BTreeSet<LabelId>> {
    let reports = evaluate_criteria(stats, &cfg.analysis.thresholds)?;
    let selected = selected_labels(&reports);
    written.push(emit(out, &format!("{dir}/criteria.csv"), &stamp.csv(&criteria_csv(&reports)))?);
    written.push(emit(out, &format!("{dir}/criteria.md"), &stamp.markdown(&criteria_markdown(&reports)))?);
    println!("{dir}: {} candidate labels: {}", selected.len(), label_list(&selected));
    let mut core = format!("# config_hash={} seed={}\n# candidates\n", stamp.config_hash, stamp.seed);
    for l in &selected {
        core.push_str(&format!("{l}\n"));
    }
    if let Some(older) = older {
        let inter = intersect_core_sets(&selected, older);
        println!("{dir}: intersection with the older core set ({}): {}", inter.len(), label_list(&inter));
        let mut text = format!("# config_hash={} seed={}\n# intersection with the older core set\n", stamp.config_hash, stamp.seed);
        for l in &inter {
            text.push_str(&format!("{l}\n"));
        }
        written.push(emit(out, &format!("{dir}/core_set_final.txt"), &text)?);
    }
    written.push(emit(out, &format!("{dir}/core_set.txt"), &core)?);
    Ok(selected)
}

fn cmd_analyze(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let corpora = load_corpora(cfg)?;
    let mut inputs = corpus_hashes(&corpora)?;
    for p in [&cfg.paths.label_stats, &cfg.paths.older_core_set].into_iter().flatten() {
        inputs.push(file_hash(p)?);
    }
    let seed = cfg.seed.unwrap_or(cfg.experiment.seed);
    let stamp = Stamp {
        config_hash: config_hash(&cfg.analysis, &inputs)?,
        seed,
    };
    let older = cfg.paths.older_core_set.as_ref().map(|p| parse_label_set(&fs::read_to_string(p)?)).transpose()?;
    let mut written = Vec::new();

    if let Some(p) = &cfg.paths.label_stats {
        let stats = parse_label_stats_csv(&fs::read_to_string(p)?, &p.display().to_string())?;
        core_set_outputs(cfg, &stats, older.as_ref(), &stamp, out, "tabulated", &mut written)?;
    }
    for c in &corpora {
        if c.sequences.is_empty() {
            return Err(Error::DegenerateInput("corpus has no sequences"));
        }
        let id = c.corpus_id.as_str();
        let freqs = label_frequencies(c);
        written.push(emit(out, &format!("{id}/frequencies.csv"), &stamp.csv(&frequencies_csv(&freqs)))?);
        written.push(emit(out, &format!("{id}/frequencies.svg"), &stamp.svg(&svg::frequency_chart(&freqs)))?);

        let mut rows = Vec::new();
        for form in [DimForm::Continuous, DimForm::Summary] {
            for granularity in [Granularity::Sequence, Granularity::Session] {
                for &d in DimensionId::ALL {
                    match dimension_agreement(c, d, granularity, form) {
                        Ok(r) => rows.push(r),
                        Err(e) => log::warn!("{id}: no agreement for {d} ({form:?}, {granularity:?}): {e}"),
                    }
                }
            }
        }
        written.push(emit(out, &format!("{id}/dim_agreement.csv"), &stamp.csv(&dim_agreement_csv(&rows)))?);

        let stats = label_stats(c, cfg.analysis.alpha, cfg.analysis.intensity_mode);
        written.push(emit(out, &format!("{id}/label_stats.csv"), &stamp.csv(&label_stats_csv(&stats)))?);
        let map = label_dimension_correlations(c, cfg.analysis.alpha);
        written.push(emit(out, &format!("{id}/label_dim.csv"), &stamp.csv(&label_dim_csv(&map)))?);
        written.push(emit(out, &format!("{id}/label_dim.svg"), &stamp.svg(&svg::label_dimension_heatmap(&map)))?);
        core_set_outputs(cfg, &stats, older.as_ref(), &stamp, out, id, &mut written)?;
    }
    Ok(written)
}

fn cmd_goldstd(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let corpora = load_corpora(cfg)?;
    let stamp = Stamp {
        config_hash: config_hash(&cfg.experiment.labels, &corpus_hashes(&corpora)?)?,
        seed: cfg.seed.unwrap_or(cfg.experiment.seed),
    };
    let labels: Vec<LabelId> = if cfg.experiment.labels.is_empty() {
        DEFAULT_LABEL_TARGETS.to_vec()
    } else {
        cfg.experiment.labels.iter().map(|l| l.parse()).collect::<Result<_>>()?
    };
    let mut tasks: Vec<GoldTask> = labels.into_iter().map(GoldTask::LabelIntensity).collect();
    tasks.extend(DimensionId::ALL.iter().map(|&d| GoldTask::DimSummary(d)));
    tasks.extend(DimensionId::ALL.iter().map(|&d| GoldTask::DimContinuous(d)));
    corpora
        .iter()
        .map(|c| emit(out, &format!("gold_{}.csv", c.corpus_id), &stamp.csv(&gold_cache_csv(c, &tasks)?)))
        .collect()
}

fn cmd_train(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let corpora = load_corpora(cfg)?;
    let t = &cfg.train;
    let corpus = if t.corpus.is_empty() {
        &corpora[0]
    } else {
        corpora
            .iter()
            .find(|c| c.corpus_id == t.corpus)
            .ok_or_else(|| Error::ConfigInvalid(format!("train.corpus `{}` is not among the configured corpora", t.corpus)))?
    };
    let spec = ExperimentSpec {
        representation: t.representation,
        targets: vec![t.target.clone()],
        modalities: vec![t.modality],
        multimodal: false,
        kind: t.kind,
        strategy: Strategy::Within,
        source: corpus.corpus_id.clone(),
        test: corpus.corpus_id.clone(),
        k: cfg.experiment.k,
        seed: t.seed,
    };
    spec.validate()?;
    let hash = config_hash(t, &[corpus_hash(corpus)?])?;
    let mut ck = train_single(&spec, corpus)?;
    ck.tags.insert("config_hash".into(), hash);
    ck.tags.insert("seed".into(), t.seed.to_string());
    let best = ck.log.iter().find(|l| l.epoch == ck.best_epoch).and_then(|l| l.val_ccc);
    println!(
        "trained {} {} {} on {}: best epoch {} (validation CCC {})",
        t.representation,
        t.target,
        t.modality,
        corpus.corpus_id,
        ck.best_epoch,
        best.map_or("NA".to_string(), |v| format!("{v:.3}"))
    );
    let name = format!("model_{}_{}_{}.json", t.representation, t.target, t.modality);
    Ok(vec![emit(out, &name, &(ck.to_json()? + "\n"))?])
}

fn table_outputs(result: &ExperimentResult, stamp: &Stamp, out: &Path, written: &mut Vec<String>) -> Result<String> {
    let mut md = String::new();
    for &rep in Representation::ALL {
        for &strategy in Strategy::ALL {
            let tests: BTreeSet<&str> = result
                .cells
                .iter()
                .filter(|c| c.representation == rep && c.strategy == strategy)
                .map(|c| c.test_corpus.as_str())
                .collect();
            for test in tests {
                let table = results_table(result, rep, strategy, test);
                written.push(emit(out, &format!("tables/{rep}_{strategy}_{test}.csv"), &stamp.csv(&table.to_csv()?))?);
                md.push_str(&table.to_markdown());
                md.push('\n');
            }
        }
    }
    Ok(md)
}

fn cmd_experiment(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let corpora = load_corpora(cfg)?;
    let cache = cfg.paths.cache_dir.clone().unwrap_or_else(|| out.join("cache"));
    let result = run_plan(&cfg.experiment, &corpora, Some(&cache))?;
    let failed: Vec<_> = result.failed().collect();
    if !failed.is_empty() {
        eprintln!("{} of {} cells failed:", failed.len(), result.cells.len());
        for c in &failed {
            eprintln!(
                "  {} {} {} {} -> {}: {}",
                c.representation,
                c.target,
                c.channel,
                c.strategy,
                c.test_corpus,
                c.error.as_deref().unwrap_or("")
            );
        }
        if failed.len() == result.cells.len() {
            return Err(Error::DegenerateInput("every experiment cell failed"));
        }
    }
    let stamp = Stamp {
        config_hash: result.meta.config_hash.clone(),
        seed: result.meta.seed,
    };
    let mut written = vec![
        emit(out, "results.json", &result.to_json()?)?,
        emit(out, "results.csv", &stamp.csv(&results_csv(&result)?))?,
    ];
    let md = table_outputs(&result, &stamp, out, &mut written)?;
    written.push(emit(out, "tables.md", &stamp.markdown(&md))?);
    Ok(written)
}

fn read_results(path: &Path) -> Result<ExperimentResult> {
    ExperimentResult::from_json(&fs::read_to_string(path)?)
}

fn cmd_bayes(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let result = read_results(&cfg.results_path(out))?;
    let report = bayes_analyze(&result, &cfg.bayes)?;
    let stamp = Stamp {
        config_hash: report.meta.config_hash.clone(),
        seed: report.meta.seed,
    };
    println!(
        "{} observations, max R-hat {:.4}, min ESS {:.0}",
        report.n_observations, report.max_rhat, report.min_ess
    );
    for c in &report.cells {
        println!("  {} {} {}: {:?}", c.representation, c.strategy, c.test_corpus, c.rope.decision);
    }
    Ok(vec![
        emit(out, "posterior.json", &(report.to_json()? + "\n"))?,
        emit(out, "posterior.md", &stamp.markdown(&report_markdown(&report)))?,
        emit(out, "posterior.svg", &stamp.svg(&svg::interval_plot(&report, cfg.bayes.rope.bound_z())))?,
    ])
}

fn cmd_report(cfg: &RunConfig, out: &Path) -> Result<Vec<String>> {
    let result = read_results(&cfg.results_path(out))?;
    let posterior: PosteriorReport = serde_json::from_str(&fs::read_to_string(cfg.posterior_path(out))?)?;
    let mut h = Sha256::new();
    h.update(result.meta.config_hash.as_bytes());
    h.update(posterior.meta.config_hash.as_bytes());
    let stamp = Stamp {
        config_hash: hex::encode(h.finalize()),
        seed: posterior.meta.seed,
    };
    let mut scratch = Vec::new();
    let mut md = String::from("# Affect recognition report\n\n## Results\n\n");
    md.push_str(&table_outputs(&result, &stamp, &out.join("report_tables"), &mut scratch)?);
    md.push_str("\n## Bayesian comparison\n\n");
    md.push_str(&report_markdown(&posterior));
    let mut written: Vec<String> = scratch.into_iter().map(|p| format!("report_tables/{p}")).collect();
    written.push(emit(out, "report.md", &stamp.markdown(&md))?);
    Ok(written)
}

/// 0 on success, 1 on runtime failures, 2 on configuration errors.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ConfigInvalid(_) | Error::Toml(_) => 2,
        _ => 1,
    }
}

fn usage_error(msg: &str) -> i32 {
    eprintln!("error: {msg}\n\n{}", Cli::command().render_usage());
    2
}

/// Parses `args` (program name first), runs the subcommand and returns the
/// process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let Some(config_path) = &cli.config else {
        return usage_error("--config is required");
    };
    let text = match fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => return usage_error(&format!("cannot read configuration `{}`: {e}", config_path.display())),
    };
    let mut cfg = match RunConfig::from_toml(&text) {
        Ok(c) => c,
        Err(e) => return usage_error(&format!("{}: {e}", config_path.display())),
    };
    if let Some(seed) = cli.seed.or(cfg.seed) {
        cfg.apply_seed(seed);
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return usage_error("--jobs must be positive");
        }
        // Fails only when a pool already exists, as in repeated in-process runs.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global();
    }
    let out = cli.out.clone().or_else(|| cfg.out.clone()).unwrap_or_else(|| PathBuf::from("out"));
    let outcome = cfg.validate_for(cli.command, &out).and_then(|()| {
        fs::create_dir_all(&out)?;
        match cli.command {
            Command::Synth => cmd_synth(&cfg, &out),
            Command::Validate => cmd_validate(&cfg, &out),
            Command::Analyze => cmd_analyze(&cfg, &out),
            Command::Goldstd => cmd_goldstd(&cfg, &out),
            Command::Train => cmd_train(&cfg, &out),
            Command::Experiment => cmd_experiment(&cfg, &out),
            Command::Bayes => cmd_bayes(&cfg, &out),
            Command::Report => cmd_report(&cfg, &out),
        }
    });
    match outcome {
        Ok(files) => {
            for f in files {
                println!("wrote {}", out.join(f).display());
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_uses_defaults() {
        let cfg = RunConfig::from_toml("").unwrap();
        assert_eq!(cfg, RunConfig::default());
        assert_eq!(cfg.analysis.thresholds, CriteriaThresholds::default());
    }

    #[test]
    fn unknown_keys_are_configuration_errors() {
        let e = RunConfig::from_toml("[analysis]\nalpah = 0.1\n").unwrap_err();
        assert_eq!(exit_code(&e), 2);
    }

    #[test]
    fn seed_reaches_every_section() {
        let mut cfg = RunConfig::from_toml("seed = 9\n[bayes]\nseed = 3\n").unwrap();
        cfg.apply_seed(cfg.seed.unwrap());
        assert_eq!((cfg.synth.seed, cfg.train.seed, cfg.experiment.seed, cfg.bayes.seed), (9, 9, 9, 9));
    }

    #[test]
    fn stamps_lead_every_format() {
        let s = Stamp {
            config_hash: "ab".into(),
            seed: 4,
        };
        assert!(s.csv("a,b\n").starts_with("# config_hash=ab seed=4\na,b"));
        assert!(s.svg("<svg>\n</svg>\n").starts_with("<svg>\n<!-- config_hash=ab seed=4 -->\n</svg>"));
        let j: serde_json::Value = serde_json::from_str(&s.json(serde_json::json!([1])).unwrap()).unwrap();
        assert_eq!(j["seed"], 4);
    }

    #[test]
    fn missing_config_is_a_usage_error() {
        assert_eq!(run(["affect-eval", "synth"]), 2);
        assert_eq!(run(["affect-eval", "synth", "--config", "/nonexistent/run.toml"]), 2);
        assert_eq!(run(["affect-eval", "frobnicate"]), 2);
    }
}

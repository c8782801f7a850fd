//! Command-line entry point for the stratum-classification pipeline.
//!
//! One JSON config file drives every subcommand; flags override file values.
//! Each run writes its artifacts plus a `manifest.json` (config echo, seed,
//! input checksums, resample counts, wall clock) into the output directory.
//! Exit codes: 0 success, 1 usage/config error, 2 data/validation error,
//! 3 internal error.

mod charts;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Serialize;

use config::{AblateMode, RunConfig};
use lexstrata::embed::{self, EmbeddingModel};
use lexstrata::explain;
use lexstrata::forest::fit;
use lexstrata::lab::{
    self, ablation_to_csv, correlation_to_csv, cross_corpus_overlap, exclude_and_retrain,
    overlap_to_csv, sweep_to_csv, SweepParameter,
};
use lexstrata::pipeline::{
    self, compare_to_reference, normalization_table, prepare_corpus, replicate, CorpusPrep,
    ReplicateConfig,
};
use lexstrata::syngen;
use lexstrata::textnorm::{encode, normalize, Vocabulary};
use lexstrata::{Error, Result};

#[derive(Parser)]
#[command(
    name = "lexstrata",
    version,
    about = "Classify the etymological stratum of Hindi near-synonyms from distributional context"
)]
struct Cli {
    /// JSON run configuration (flags below override file values).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Corpus file; repeat the flag to concatenate several.
    #[arg(long, global = true, value_name = "FILE")]
    corpus: Vec<PathBuf>,

    #[arg(long, global = true, value_name = "FILE")]
    control_corpus: Option<PathBuf>,

    #[arg(long, global = true, value_name = "FILE")]
    lexicon: Option<PathBuf>,

    /// Reuse a trained model file instead of training embeddings.
    #[arg(long, global = true, value_name = "FILE")]
    model: Option<PathBuf>,

    /// Master seed (applied to evaluation, embedding, forest and syngen).
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[arg(long, global = true)]
    iterations: Option<u64>,

    /// Threads for forest/evaluation parallelism (0 = all cores). Data files
    /// never depend on it.
    #[arg(long, global = true)]
    workers: Option<usize>,

    #[arg(long, global = true)]
    min_count: Option<u64>,

    /// Erase the nuqta mark entirely during normalization.
    #[arg(long, global = true)]
    fold_nuqta: bool,

    /// Configuration preset; `paper-replication` sets the full-scale
    /// 100,000-iteration protocol.
    #[arg(long, global = true)]
    preset: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Normalize a corpus; writes one sentence per line.
    Normalize,
    /// Build the frequency-filtered vocabulary TSV.
    Vocab,
    /// Train skip-gram embeddings and write the model file.
    TrainEmbed,
    /// Repeated train/test evaluation with cumulative error counts.
    Classify,
    /// Accuracy across a forest hyperparameter grid.
    Sweep,
    /// Accuracy across embedding-dimension subsets.
    Ablate,
    /// Per-dimension SHAP importance summary.
    Explain,
    /// Error-correlate Pearson matrices (full and post-exclusion panels).
    Correlate,
    /// Top-k misclassified overlap between main and control corpora.
    Overlap,
    /// Generate a synthetic two-strata corpus and its lexicon.
    Syngen,
    /// The full battery end to end; writes every artifact and a summary.
    Replicate,
    /// Render every result CSV in the output directory to SVG.
    Charts,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Normalize => "normalize",
            Command::Vocab => "vocab",
            Command::TrainEmbed => "train-embed",
            Command::Classify => "classify",
            Command::Sweep => "sweep",
            Command::Ablate => "ablate",
            Command::Explain => "explain",
            Command::Correlate => "correlate",
            Command::Overlap => "overlap",
            Command::Syngen => "syngen",
            Command::Replicate => "replicate",
            Command::Charts => "charts",
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) => 1,
                Error::Validation(_) | Error::Io(_) => 2,
                Error::Internal(_) => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(preset) = &cli.preset {
        match preset.as_str() {
            "paper-replication" => cfg.apply_paper_replication_preset(),
            other => {
                return Err(Error::Config(format!(
                    "unknown preset `{other}` (available: paper-replication)"
                )))
            }
        }
    }
    if !cli.corpus.is_empty() {
        cfg.paths.corpus = cli.corpus.clone().into();
    }
    if cli.control_corpus.is_some() {
        cfg.paths.control_corpus = cli.control_corpus.clone();
    }
    if cli.lexicon.is_some() {
        cfg.paths.lexicon = cli.lexicon.clone();
    }
    if cli.model.is_some() {
        cfg.paths.model = cli.model.clone();
    }
    if cli.out_dir.is_some() {
        cfg.paths.out_dir = cli.out_dir.clone();
    }
    if let Some(seed) = cli.seed {
        cfg.eval.master_seed = seed;
        cfg.embed.seed = seed;
        cfg.forest.seed = seed;
        cfg.syngen.seed = seed;
    }
    if let Some(iters) = cli.iterations {
        cfg.eval.iterations = iters;
    }
    if let Some(workers) = cli.workers {
        cfg.workers = workers;
    }
    if let Some(mc) = cli.min_count {
        cfg.textnorm.min_count = mc;
    }
    if cli.fold_nuqta {
        cfg.textnorm.fold_nuqta = true;
    }

    if cfg.workers > 0 {
        // Ignore the error if a pool already exists (tests call run twice).
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.workers)
            .build_global();
    }

    let mut writer = RunWriter::new(cli.command.name(), &cfg)?;
    let result = dispatch(cli.command, &cfg, &mut writer);
    writer.finish(result.as_ref().err())?;
    result
}

/// Collects output files and manifest metadata for one run.
struct RunWriter {
    dir: PathBuf,
    command: &'static str,
    started: Instant,
    config_echo: serde_json::Value,
    seed: u64,
    inputs: Vec<ManifestInput>,
    outputs: Vec<String>,
    notes: Vec<String>,
    resampled_splits: Option<u64>,
}

#[derive(Serialize)]
struct ManifestInput {
    name: String,
    path: String,
    fnv1a64: String,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    seed: u64,
    partial: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    inputs: &'a [ManifestInput],
    outputs: &'a [String],
    notes: &'a [String],
    #[serde(skip_serializing_if = "Option::is_none")]
    resampled_splits: Option<u64>,
    wall_clock_seconds: f64,
    config: &'a serde_json::Value,
}

fn fnv1a64(bytes: &[u8]) -> String {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{hash:016x}")
}

impl RunWriter {
    fn new(command: &'static str, cfg: &RunConfig) -> Result<RunWriter> {
        let dir = cfg
            .paths
            .out_dir
            .clone()
            .ok_or_else(|| Error::Config("--out-dir (or paths.out_dir) is required".into()))?;
        std::fs::create_dir_all(&dir)?;
        Ok(RunWriter {
            dir,
            command,
            started: Instant::now(),
            config_echo: serde_json::to_value(cfg)
                .map_err(|e| Error::Internal(format!("config echo: {e}")))?,
            seed: cfg.eval.master_seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            resampled_splits: None,
        })
    }

    fn read_input(&mut self, name: &str, path: Option<&PathBuf>) -> Result<String> {
        let path = path
            .ok_or_else(|| Error::Config(format!("--{name} (or its paths entry) is required")))?;
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::Validation(format!("cannot read {name} {}: {e}", path.display()))
        })?;
        self.inputs.push(ManifestInput {
            name: name.to_string(),
            path: path.display().to_string(),
            fnv1a64: fnv1a64(text.as_bytes()),
        });
        Ok(text)
    }

    /// Concatenate the configured corpus files in order.
    fn read_corpus(&mut self, corpus: &config::PathList) -> Result<String> {
        let paths = corpus.paths();
        if paths.is_empty() {
            return Err(Error::Config(
                "--corpus (or its paths entry) is required".into(),
            ));
        }
        let mut text = String::new();
        for path in paths {
            text.push_str(&self.read_input("corpus", Some(path))?);
            if !text.ends_with('\n') {
                text.push('\n');
            }
        }
        Ok(text)
    }

    fn write(&mut self, name: &str, content: &str) -> Result<()> {
        std::fs::write(self.dir.join(name), content)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }

    fn finish(&self, error: Option<&Error>) -> Result<()> {
        let manifest = Manifest {
            command: self.command,
            seed: self.seed,
            partial: error.is_some(),
            error: error.map(|e| e.to_string()),
            inputs: &self.inputs,
            outputs: &self.outputs,
            notes: &self.notes,
            resampled_splits: self.resampled_splits,
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            config: &self.config_echo,
        };
        let text = serde_json::to_string_pretty(&manifest)
            .map_err(|e| Error::Internal(format!("manifest: {e}")))?;
        // `charts` post-processes another run's directory; keep that run's
        // manifest authoritative.
        let name = if self.command == "charts" {
            "charts_manifest.json"
        } else {
            "manifest.json"
        };
        std::fs::write(self.dir.join(name), text)?;
        Ok(())
    }
}

fn load_model_if_given(w: &mut RunWriter, cfg: &RunConfig) -> Result<Option<EmbeddingModel>> {
    match &cfg.paths.model {
        Some(path) => {
            let text = w.read_input("model", Some(path))?;
            Ok(Some(EmbeddingModel::from_reader(text.as_bytes())?))
        }
        None => Ok(None),
    }
}

fn prepare(w: &mut RunWriter, cfg: &RunConfig, rc: &ReplicateConfig) -> Result<CorpusPrep> {
    let corpus = w.read_corpus(&cfg.paths.corpus)?;
    let lexicon = w.read_input("lexicon", cfg.paths.lexicon.as_ref())?;
    let model = load_model_if_given(w, cfg)?;
    let prep = prepare_corpus(&corpus, &lexicon, rc, model)?;
    if !prep.vocab_report.missing.is_empty() {
        w.note(format!(
            "lexicon pairs dropped for missing words: {:?}",
            prep.vocab_report.dropped_pairs
        ));
    }
    for (word, count) in &prep.vocab_report.low_count {
        w.note(format!("low corpus frequency: {word} ({count})"));
    }
    Ok(prep)
}

fn dispatch(command: Command, cfg: &RunConfig, w: &mut RunWriter) -> Result<()> {
    let rc = cfg.to_replicate_config()?;
    match command {
        Command::Normalize => {
            let corpus = w.read_corpus(&cfg.paths.corpus)?;
            let table = normalization_table(&rc)?;
            let sentences = normalize(&corpus, &table);
            let mut out = String::new();
            for s in &sentences {
                out.push_str(&s.join(" "));
                out.push('\n');
            }
            w.write("normalized.txt", &out)?;
            w.note(format!("{} sentences", sentences.len()));
        }
        Command::Vocab => {
            let corpus = w.read_corpus(&cfg.paths.corpus)?;
            let table = normalization_table(&rc)?;
            let sentences = normalize(&corpus, &table);
            let vocab = Vocabulary::build(sentences.iter().flatten(), rc.min_count)?;
            w.write("vocab.tsv", &vocab.to_tsv())?;
            w.note(format!(
                "{} types kept of {} tokens (min_count {})",
                vocab.len(),
                vocab.total_tokens(),
                rc.min_count
            ));
        }
        Command::TrainEmbed => {
            let corpus = w.read_corpus(&cfg.paths.corpus)?;
            let table = normalization_table(&rc)?;
            let sentences = normalize(&corpus, &table);
            let vocab = Vocabulary::build(sentences.iter().flatten(), rc.min_count)?;
            let stream = encode(&sentences, &vocab);
            let model = embed::train(&stream, &vocab, rc.embed.clone())?;
            w.write("vocab.tsv", &vocab.to_tsv())?;
            w.write("model.tsv", &model.to_text())?;
            w.note(format!(
                "trained {} x {} embeddings",
                model.len(),
                model.dim()
            ));
        }
        Command::Classify => {
            let prep = prepare(w, cfg, &rc)?;
            let table = lab::repeated_eval(&prep.dataset, &rc.protocol)?;
            w.resampled_splits = Some(table.resampled_splits);
            w.write("misclass.csv", &table.to_misclass_csv())?;
            w.write("accuracy.csv", &table.to_accuracy_csv())?;
            w.note(format!(
                "mean accuracy {:.4} over {} iterations",
                table.mean_accuracy(),
                table.iterations
            ));
        }
        Command::Sweep => {
            let prep = prepare(w, cfg, &rc)?;
            let points = lab::hyperparam_sweep(
                &prep.dataset,
                &rc.protocol,
                cfg.sweep.parameter,
                &cfg.sweep.grid,
                cfg.sweep.repetitions,
            )?;
            let name = match cfg.sweep.parameter {
                SweepParameter::NEstimators => "sweep_n_estimators.csv",
                SweepParameter::MaxDepth => "sweep_max_depth.csv",
                SweepParameter::Criterion => "sweep_criterion.csv",
            };
            w.write(name, &sweep_to_csv(&points))?;
        }
        Command::Ablate => {
            let prep = prepare(w, cfg, &rc)?;
            let grid = if cfg.ablate.n_grid.is_empty() {
                pipeline::default_ablation_grid(prep.dataset.feature_count())
            } else {
                cfg.ablate.n_grid.clone()
            };
            match cfg.ablate.mode {
                AblateMode::Prefix => {
                    let pts = lab::prefix_ablation(
                        &prep.dataset,
                        &rc.protocol,
                        &grid,
                        cfg.ablate.repetitions,
                    )?;
                    w.write("ablation_prefix.csv", &ablation_to_csv(&pts))?;
                }
                AblateMode::Random => {
                    let pts = lab::random_dim_ablation(
                        &prep.dataset,
                        &rc.protocol,
                        &grid,
                        cfg.ablate.repetitions,
                    )?;
                    w.write("ablation_random.csv", &ablation_to_csv(&pts))?;
                }
            }
        }
        Command::Explain => {
            let prep = prepare(w, cfg, &rc)?;
            let forest = fit(&prep.dataset, &pipeline::shap_forest_params(&rc.protocol))?;
            let summary = explain::shap_summary(&forest, &prep.dataset)?;
            w.write("shap_summary.csv", &explain::summary_to_csv(&summary))?;
        }
        Command::Correlate => {
            let prep = prepare(w, cfg, &rc)?;
            let table = lab::repeated_eval(&prep.dataset, &rc.protocol)?;
            w.resampled_splits = Some(table.resampled_splits);
            let mut panels = Vec::new();
            let records = lab::word_records(&table, &prep.pair_stats, &prep.model)?;
            for freq in [lab::FreqTransform::Log10, lab::FreqTransform::Raw] {
                match lab::correlation_matrix(&records, freq) {
                    Ok(m) => panels.push(("full", freq, m)),
                    Err(e) => w.note(format!("full/{freq:?}: {e}")),
                }
            }
            let k = cfg.exclude_top_k.min(prep.dataset.len().saturating_sub(10));
            if k > 0 {
                let (_, excluded) = exclude_and_retrain(&prep.dataset, &table, k, &rc.protocol)?;
                let records = lab::word_records(&excluded, &prep.pair_stats, &prep.model)?;
                for freq in [lab::FreqTransform::Log10, lab::FreqTransform::Raw] {
                    match lab::correlation_matrix(&records, freq) {
                        Ok(m) => panels.push(("excluded", freq, m)),
                        Err(e) => w.note(format!("excluded/{freq:?}: {e}")),
                    }
                }
            }
            let refs: Vec<(&str, lab::FreqTransform, &lab::CorrelationMatrix)> =
                panels.iter().map(|(p, f, m)| (*p, *f, m)).collect();
            w.write("correlation.csv", &correlation_to_csv(&refs))?;
        }
        Command::Overlap => {
            let corpus = w.read_corpus(&cfg.paths.corpus)?;
            let control = w.read_input("control_corpus", cfg.paths.control_corpus.as_ref())?;
            let lexicon = w.read_input("lexicon", cfg.paths.lexicon.as_ref())?;
            let main = prepare_corpus(&corpus, &lexicon, &rc, None)?;
            let ctrl = prepare_corpus(&control, &lexicon, &rc, None)?;
            let table_main = lab::repeated_eval(&main.dataset, &rc.protocol)?;
            let table_ctrl = lab::repeated_eval(&ctrl.dataset, &rc.protocol)?;
            let points = cross_corpus_overlap(&table_main, &table_ctrl, &cfg.overlap_k_list);
            w.write("overlap.csv", &overlap_to_csv(&points))?;
        }
        Command::Syngen => {
            let out = syngen::generate(&cfg.syngen)?;
            w.write("corpus.txt", &out.corpus_text)?;
            w.write("lexicon.tsv", &out.lexicon_tsv)?;
            w.note(format!(
                "{} pairs, {} sentences",
                cfg.syngen.n_pairs,
                out.corpus_text.lines().count()
            ));
        }
        Command::Replicate => {
            let corpus = w.read_corpus(&cfg.paths.corpus)?;
            let lexicon = w.read_input("lexicon", cfg.paths.lexicon.as_ref())?;
            let control = match &cfg.paths.control_corpus {
                Some(p) => Some(w.read_input("control_corpus", Some(p))?),
                None => None,
            };
            let outcome = replicate(&corpus, control.as_deref(), &lexicon, &rc)?;
            w.resampled_splits = Some(outcome.main.table.resampled_splits);

            w.write("vocab.tsv", &outcome.main.vocab.to_tsv())?;
            w.write("model.tsv", &outcome.main.model.to_text())?;
            w.write("misclass.csv", &outcome.main.table.to_misclass_csv())?;
            w.write("accuracy.csv", &outcome.main.table.to_accuracy_csv())?;
            if let Some(t) = &outcome.excluded_table {
                w.write("misclass_excluded.csv", &t.to_misclass_csv())?;
                w.write("accuracy_excluded.csv", &t.to_accuracy_csv())?;
            }
            w.write("shap_summary.csv", &explain::summary_to_csv(&outcome.shap))?;
            for (param, points) in &outcome.sweeps {
                w.write(&format!("sweep_{param}.csv"), &sweep_to_csv(points))?;
            }
            if !outcome.ablation_prefix.is_empty() {
                w.write(
                    "ablation_prefix.csv",
                    &ablation_to_csv(&outcome.ablation_prefix),
                )?;
                w.write(
                    "ablation_random.csv",
                    &ablation_to_csv(&outcome.ablation_random),
                )?;
            }
            let refs: Vec<(&str, lab::FreqTransform, &lab::CorrelationMatrix)> = outcome
                .correlations
                .iter()
                .map(|p| (p.panel.as_str(), p.frequency, &p.matrix))
                .collect();
            // Written even when every panel degenerated (header only), so
            // the run layout is stable.
            w.write("correlation.csv", &correlation_to_csv(&refs))?;
            for note in &outcome.correlation_notes {
                w.note(format!("correlation skipped: {note}"));
            }
            if !outcome.overlap.is_empty() {
                w.write("overlap.csv", &overlap_to_csv(&outcome.overlap))?;
            }

            let summary = serde_json::json!({
                "mean_accuracy": outcome.main.table.mean_accuracy(),
                "accuracy_std": outcome.main.table.accuracy_std(),
                "iterations": outcome.main.table.iterations,
                "resampled_splits": outcome.main.table.resampled_splits,
                "words": outcome.main.dataset.len(),
                "top20pct_error_share": lab::top_fraction_error_share(&outcome.main.table, 0.2),
                "sanskrit_error_share_top20": lab::origin_error_share(&outcome.main.table, 20).sanskrit,
                "sanskrit_error_share_top50": lab::origin_error_share(&outcome.main.table, 50).sanskrit,
                "excluded_words": outcome.excluded_words,
                "excluded_mean_accuracy": outcome.excluded_table.as_ref().map(|t| t.mean_accuracy()),
                "control_mean_accuracy": outcome.control.as_ref().map(|c| c.table.mean_accuracy()),
            });
            w.write(
                "summary.json",
                &serde_json::to_string_pretty(&summary)
                    .map_err(|e| Error::Internal(e.to_string()))?,
            )?;
            let report = compare_to_reference(&outcome);
            w.write(
                "reference_report.json",
                &serde_json::to_string_pretty(&report)
                    .map_err(|e| Error::Internal(e.to_string()))?,
            )?;
            w.note(format!(
                "mean accuracy {:.4} over {} iterations",
                outcome.main.table.mean_accuracy(),
                outcome.main.table.iterations
            ));
        }
        Command::Charts => {
            let mut entries: Vec<PathBuf> = std::fs::read_dir(&w.dir)?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
                .collect();
            entries.sort();
            if entries.is_empty() {
                eprintln!("warning: no result CSVs in {}", w.dir.display());
            }
            let mut rendered = 0;
            for path in entries {
                let name = path
                    .file_name()
                    .and_then(|n| n.to_str())
                    .unwrap_or_default()
                    .to_string();
                let csv = std::fs::read_to_string(&path)?;
                if let Some(svg) = charts::render(&name, &csv) {
                    let svg_name = format!("{}.svg", name.trim_end_matches(".csv"));
                    w.write(&svg_name, &svg)?;
                    rendered += 1;
                } else {
                    w.note(format!("no renderer for {name}"));
                }
            }
            w.note(format!("{rendered} charts rendered"));
        }
    }
    Ok(())
}

//! The run configuration: one JSON document covering every subcommand, with
//! command-line flags overriding file values. Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use lexstrata::embed::EmbedConfig;
use lexstrata::forest::ForestParams;
use lexstrata::lab::{SplitUnit, SweepParameter, SweepValue};
use lexstrata::lexicon::VocabMode;
use lexstrata::pipeline::ReplicateConfig;
use lexstrata::syngen::SynthConfig;
use lexstrata::Error;

/// A path field that accepts either one path or a list of paths in JSON.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum PathList {
    #[default]
    None,
    One(PathBuf),
    Many(Vec<PathBuf>),
}

impl PathList {
    pub fn paths(&self) -> Vec<&PathBuf> {
        match self {
            PathList::None => Vec::new(),
            PathList::One(p) => vec![p],
            PathList::Many(ps) => ps.iter().collect(),
        }
    }
}

impl From<Vec<PathBuf>> for PathList {
    fn from(mut ps: Vec<PathBuf>) -> PathList {
        match ps.len() {
            0 => PathList::None,
            1 => PathList::One(ps.remove(0)),
            _ => PathList::Many(ps),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// One or more corpus files, concatenated in order.
    pub corpus: PathList,
    pub control_corpus: Option<PathBuf>,
    pub lexicon: Option<PathBuf>,
    pub rule_table: Option<PathBuf>,
    /// A pre-trained model file; when set, subcommands reuse it instead of
    /// training.
    pub model: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TextnormSection {
    pub fold_nuqta: bool,
    pub min_count: u64,
}

impl Default for TextnormSection {
    fn default() -> Self {
        TextnormSection {
            fold_nuqta: false,
            min_count: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct LexiconPolicySection {
    pub mode: VocabMode,
    pub low_count_warn: u64,
}

impl Default for LexiconPolicySection {
    fn default() -> Self {
        LexiconPolicySection {
            mode: VocabMode::Strict,
            low_count_warn: 10,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    pub iterations: u64,
    pub test_fraction: f64,
    pub split_unit: SplitUnit,
    pub master_seed: u64,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            iterations: 1000,
            test_fraction: 0.2,
            split_unit: SplitUnit::Word,
            master_seed: 42,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub grid: Vec<SweepValue>,
    pub repetitions: u64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            parameter: SweepParameter::NEstimators,
            grid: vec![
                SweepValue::Int(1),
                SweepValue::Int(5),
                SweepValue::Int(20),
                SweepValue::Int(50),
            ],
            repetitions: 25,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblateMode {
    Prefix,
    Random,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct AblateSection {
    pub mode: AblateMode,
    /// Empty derives a coarse grid from the embedding dimension.
    pub n_grid: Vec<usize>,
    pub repetitions: u64,
}

impl Default for AblateSection {
    fn default() -> Self {
        AblateSection {
            mode: AblateMode::Prefix,
            n_grid: Vec::new(),
            repetitions: 25,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct ReplicateSection {
    pub run_sweeps: bool,
    pub run_ablations: bool,
    pub n_estimators_grid: Vec<usize>,
    pub max_depth_grid: Vec<usize>,
    pub sweep_repetitions: u64,
    pub ablation_grid: Vec<usize>,
    pub ablation_repetitions: u64,
}

impl Default for ReplicateSection {
    fn default() -> Self {
        let d = ReplicateConfig::default();
        ReplicateSection {
            run_sweeps: d.run_sweeps,
            run_ablations: d.run_ablations,
            n_estimators_grid: d.n_estimators_grid,
            max_depth_grid: d.max_depth_grid,
            sweep_repetitions: d.sweep_repetitions,
            ablation_grid: d.ablation_grid,
            ablation_repetitions: d.ablation_repetitions,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub paths: Paths,
    pub textnorm: TextnormSection,
    pub lexicon_policy: LexiconPolicySection,
    pub embed: EmbedConfig,
    pub forest: ForestParams,
    pub eval: EvalSection,
    pub sweep: SweepSection,
    pub ablate: AblateSection,
    pub replicate: ReplicateSection,
    pub syngen: SynthConfig,
    pub exclude_top_k: usize,
    pub overlap_k_list: Vec<usize>,
    /// Rayon worker count for forest/lab parallelism; 0 = all cores. Data
    /// files never depend on it.
    pub workers: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            paths: Paths::default(),
            textnorm: TextnormSection::default(),
            lexicon_policy: LexiconPolicySection::default(),
            embed: EmbedConfig::default(),
            forest: ForestParams::default(),
            eval: EvalSection::default(),
            sweep: SweepSection::default(),
            ablate: AblateSection::default(),
            replicate: ReplicateSection::default(),
            syngen: SynthConfig::default(),
            exclude_top_k: 50,
            overlap_k_list: vec![10, 20, 30],
            workers: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig, Error> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config {}: {e}", path.display())))
    }

    /// The 100,000-iteration full-scale protocol.
    pub fn apply_paper_replication_preset(&mut self) {
        let p = ReplicateConfig::paper_replication();
        self.textnorm.min_count = p.min_count;
        self.embed = p.embed;
        self.eval.iterations = p.protocol.iterations;
        self.eval.test_fraction = p.protocol.test_fraction;
        self.forest = p.protocol.forest;
        self.replicate = ReplicateSection {
            run_sweeps: p.run_sweeps,
            run_ablations: p.run_ablations,
            n_estimators_grid: p.n_estimators_grid,
            max_depth_grid: p.max_depth_grid,
            sweep_repetitions: p.sweep_repetitions,
            ablation_grid: p.ablation_grid,
            ablation_repetitions: p.ablation_repetitions,
        };
        self.exclude_top_k = p.exclude_top_k;
        self.overlap_k_list = p.overlap_k_list;
    }

    /// Assemble the library-level pipeline configuration.
    pub fn to_replicate_config(&self) -> Result<ReplicateConfig, Error> {
        let rule_table = self
            .paths
            .rule_table
            .as_ref()
            .map(|p| {
                std::fs::read_to_string(p).map_err(|e| {
                    Error::Config(format!("cannot read rule table {}: {e}", p.display()))
                })
            })
            .transpose()?;
        Ok(ReplicateConfig {
            fold_nuqta: self.textnorm.fold_nuqta,
            rule_table,
            min_count: self.textnorm.min_count,
            vocab_mode: self.lexicon_policy.mode,
            low_count_warn: self.lexicon_policy.low_count_warn,
            embed: self.embed.clone(),
            protocol: self.protocol(),
            run_sweeps: self.replicate.run_sweeps,
            n_estimators_grid: self.replicate.n_estimators_grid.clone(),
            max_depth_grid: self.replicate.max_depth_grid.clone(),
            sweep_repetitions: self.replicate.sweep_repetitions,
            run_ablations: self.replicate.run_ablations,
            ablation_grid: self.replicate.ablation_grid.clone(),
            ablation_repetitions: self.replicate.ablation_repetitions,
            exclude_top_k: self.exclude_top_k,
            overlap_k_list: self.overlap_k_list.clone(),
        })
    }

    pub fn protocol(&self) -> lexstrata::lab::EvalProtocol {
        lexstrata::lab::EvalProtocol {
            iterations: self.eval.iterations,
            test_fraction: self.eval.test_fraction,
            split_unit: self.eval.split_unit,
            master_seed: self.eval.master_seed,
            forest: self.forest.clone(),
        }
    }
}

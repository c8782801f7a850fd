//! The experiment harness: repeated train/test evaluation with cumulative
//! misclassification counts, hyperparameter sweeps, dimension ablations,
//! exclusion reruns, correlation matrices and cross-corpus overlap.
//!
//! Everything is a pure function of `(dataset, protocol, master_seed)`:
//! iteration `i` derives its seed as `split_mix(master_seed, i)`, so
//! iterations are independent jobs that can run on any number of threads and
//! still reproduce byte-identical result files.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::embed::{cosine, EmbeddingModel};
use crate::error::{Error, Result};
use crate::forest::{fit, Criterion, Dataset, ForestParams};
use crate::lexicon::{Origin, PairStats};
use crate::rng::{split_mix, Rng};

/// Distinct seed streams for the sweep/ablation operations so they never
/// collide with the repeated-evaluation iteration seeds.
const SWEEP_STREAM: u64 = 101;
const PREFIX_STREAM: u64 = 102;
const RANDOM_DIM_STREAM: u64 = 103;

/// Give up on a split after this many single-class redraws.
const MAX_RESAMPLE_ATTEMPTS: u64 = 10_000;

/// What a train/test split keeps together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitUnit {
    /// Words split independently; pair members may land on opposite sides.
    Word,
    /// Both members of a pair stay on the same side.
    Pair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalProtocol {
    pub iterations: u64,
    pub test_fraction: f64,
    pub split_unit: SplitUnit,
    pub master_seed: u64,
    pub forest: ForestParams,
}

impl Default for EvalProtocol {
    fn default() -> Self {
        EvalProtocol {
            iterations: 1000,
            test_fraction: 0.2,
            split_unit: SplitUnit::Word,
            master_seed: 42,
            forest: ForestParams::default(),
        }
    }
}

impl EvalProtocol {
    pub fn validate(&self) -> Result<()> {
        if self.iterations < 1 {
            return Err(Error::config("iterations must be at least 1"));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::config("test_fraction must lie strictly in (0, 1)"));
        }
        self.forest.validate()
    }
}

/// Cumulative per-word outcome over all iterations.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordOutcome {
    pub surface: String,
    pub origin: Origin,
    pub pair_id: Option<u32>,
    pub times_in_test: u64,
    pub times_misclassified: u64,
}

/// Per-word cumulative error counts plus the raw per-iteration accuracies.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MisclassTable {
    /// Dataset order.
    pub words: Vec<WordOutcome>,
    pub accuracies: Vec<f64>,
    pub resampled_splits: u64,
    pub iterations: u64,
}

impl MisclassTable {
    pub fn mean_accuracy(&self) -> f64 {
        self.accuracies.iter().sum::<f64>() / self.accuracies.len() as f64
    }

    pub fn accuracy_std(&self) -> f64 {
        sample_std(&self.accuracies)
    }

    /// `misclass.csv`: one row per word, most misclassified first.
    pub fn to_misclass_csv(&self) -> String {
        let mut out = String::from("word,origin,pair_id,times_in_test,times_misclassified\n");
        for w in rank_errors(self) {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_field(&w.surface),
                w.origin,
                w.pair_id.map_or(String::new(), |p| p.to_string()),
                w.times_in_test,
                w.times_misclassified
            ));
        }
        out
    }

    /// `accuracy.csv`: the raw per-iteration log.
    pub fn to_accuracy_csv(&self) -> String {
        let mut out = String::from("iteration,accuracy\n");
        for (i, a) in self.accuracies.iter().enumerate() {
            out.push_str(&format!("{i},{a}\n"));
        }
        out
    }
}

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn sample_std(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

/// Draw one train/test split. Returns (train, test) row indices.
fn draw_split(
    dataset: &Dataset,
    unit: SplitUnit,
    test_fraction: f64,
    rng: &mut Rng,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = dataset.len();
    match unit {
        SplitUnit::Word => {
            let mut idx: Vec<usize> = (0..n).collect();
            rng.shuffle(&mut idx);
            let test_count = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);
            let train = idx.split_off(test_count);
            Ok((train, idx))
        }
        SplitUnit::Pair => {
            let pair_ids = dataset.pair_ids().ok_or_else(|| {
                Error::validation("pair-unit splitting needs a dataset with pair ids")
            })?;
            let mut pairs: Vec<u32> = pair_ids.to_vec();
            pairs.sort_unstable();
            pairs.dedup();
            if pairs.len() < 2 {
                return Err(Error::validation(
                    "pair-unit splitting needs at least 2 distinct pairs",
                ));
            }
            rng.shuffle(&mut pairs);
            let test_pairs =
                ((pairs.len() as f64 * test_fraction).round() as usize).clamp(1, pairs.len() - 1);
            let test_set: HashSet<u32> = pairs[..test_pairs].iter().copied().collect();
            let (test, train): (Vec<usize>, Vec<usize>) =
                (0..n).partition(|&i| test_set.contains(&pair_ids[i]));
            Ok((train, test))
        }
    }
}

struct IterationOutcome {
    accuracy: f64,
    resamples: u64,
    /// (dataset row, correctly classified)
    test_results: Vec<(usize, bool)>,
}

/// One train/test evaluation with everything derived from `iter_seed`.
fn single_eval(
    dataset: &Dataset,
    forest_params: &ForestParams,
    unit: SplitUnit,
    test_fraction: f64,
    iter_seed: u64,
) -> Result<IterationOutcome> {
    let mut rng = Rng::from_seed(iter_seed);
    let mut resamples = 0;
    let (train, test) = loop {
        let (train, test) = draw_split(dataset, unit, test_fraction, &mut rng)?;
        if dataset.select(&train).has_both_classes() {
            break (train, test);
        }
        resamples += 1;
        if resamples >= MAX_RESAMPLE_ATTEMPTS {
            return Err(Error::validation(
                "could not draw a two-class training split; the dataset is too skewed",
            ));
        }
    };
    let mut params = forest_params.clone();
    params.seed = split_mix(iter_seed, 1);
    let forest = fit(&dataset.select(&train), &params)?;
    let mut hits = 0usize;
    let test_results: Vec<(usize, bool)> = test
        .iter()
        .map(|&row| {
            let (label, _) = forest.predict(dataset.row(row));
            let correct = label == dataset.label(row);
            hits += usize::from(correct);
            (row, correct)
        })
        .collect();
    Ok(IterationOutcome {
        accuracy: hits as f64 / test.len() as f64,
        resamples,
        test_results,
    })
}

/// Repeated random train/test evaluation with cumulative per-word error
/// counts. Iteration `i` is seeded `split_mix(master_seed, i)`; degenerate
/// single-class training splits are redrawn and counted, never scored.
pub fn repeated_eval(dataset: &Dataset, protocol: &EvalProtocol) -> Result<MisclassTable> {
    protocol.validate()?;
    if dataset.len() < 10 {
        return Err(Error::validation(format!(
            "repeated evaluation needs at least 10 samples, got {}",
            dataset.len()
        )));
    }
    if !dataset.has_both_classes() {
        return Err(Error::validation("dataset must contain both classes"));
    }
    let outcomes: Vec<IterationOutcome> = (0..protocol.iterations)
        .into_par_iter()
        .map(|i| {
            single_eval(
                dataset,
                &protocol.forest,
                protocol.split_unit,
                protocol.test_fraction,
                split_mix(protocol.master_seed, i),
            )
        })
        .collect::<Result<_>>()?;

    let mut words: Vec<WordOutcome> = (0..dataset.len())
        .map(|i| WordOutcome {
            surface: dataset.surface(i).to_string(),
            origin: dataset.label(i),
            pair_id: dataset.pair_ids().map(|p| p[i]),
            times_in_test: 0,
            times_misclassified: 0,
        })
        .collect();
    let mut accuracies = Vec::with_capacity(outcomes.len());
    let mut resampled_splits = 0;
    for o in outcomes {
        accuracies.push(o.accuracy);
        resampled_splits += o.resamples;
        for (row, correct) in o.test_results {
            words[row].times_in_test += 1;
            words[row].times_misclassified += u64::from(!correct);
        }
    }
    Ok(MisclassTable {
        words,
        accuracies,
        resampled_splits,
        iterations: protocol.iterations,
    })
}

/// Words ordered by cumulative misclassification count, descending; the sort
/// is stable, so untouched words keep their dataset order.
pub fn rank_errors(table: &MisclassTable) -> Vec<WordOutcome> {
    let mut ranked = table.words.clone();
    ranked.sort_by_key(|w| std::cmp::Reverse(w.times_misclassified));
    ranked
}

/// Share of all errors carried by the most-misclassified `fraction` of words
/// (0 when there are no errors at all).
pub fn top_fraction_error_share(table: &MisclassTable, fraction: f64) -> f64 {
    let ranked = rank_errors(table);
    let total: u64 = ranked.iter().map(|w| w.times_misclassified).sum();
    if total == 0 {
        return 0.0;
    }
    let k = ((ranked.len() as f64 * fraction).ceil() as usize).clamp(1, ranked.len());
    let top: u64 = ranked[..k].iter().map(|w| w.times_misclassified).sum();
    top as f64 / total as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OriginShares {
    pub sanskrit: f64,
    pub perso_arabic: f64,
}

/// Among the `k` most misclassified words, the fraction of those errors per
/// origin. `k` larger than the word count uses all words; zero errors in the
/// window give zero shares.
pub fn origin_error_share(table: &MisclassTable, k: usize) -> OriginShares {
    let ranked = rank_errors(table);
    let k = k.min(ranked.len());
    let window = &ranked[..k];
    let total: u64 = window.iter().map(|w| w.times_misclassified).sum();
    if total == 0 {
        return OriginShares {
            sanskrit: 0.0,
            perso_arabic: 0.0,
        };
    }
    let sanskrit: u64 = window
        .iter()
        .filter(|w| w.origin == Origin::Sanskrit)
        .map(|w| w.times_misclassified)
        .sum();
    OriginShares {
        sanskrit: sanskrit as f64 / total as f64,
        perso_arabic: (total - sanskrit) as f64 / total as f64,
    }
}

/// Which forest parameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    NEstimators,
    MaxDepth,
    Criterion,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum SweepValue {
    Int(usize),
    Criterion(Criterion),
}

impl std::fmt::Display for SweepValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepValue::Int(v) => write!(f, "{v}"),
            SweepValue::Criterion(Criterion::Gini) => write!(f, "gini"),
            SweepValue::Criterion(Criterion::Entropy) => write!(f, "entropy"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub value: String,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub repetitions: u64,
}

/// Standard error of the mean for a sweep point.
pub fn standard_error(point: &SweepPoint) -> f64 {
    point.std_accuracy / (point.repetitions as f64).sqrt()
}

fn apply_sweep_value(
    params: &ForestParams,
    parameter: SweepParameter,
    value: &SweepValue,
) -> Result<ForestParams> {
    let mut p = params.clone();
    match (parameter, value) {
        (SweepParameter::NEstimators, SweepValue::Int(v)) => p.n_estimators = *v,
        (SweepParameter::MaxDepth, SweepValue::Int(v)) => p.max_depth = *v,
        (SweepParameter::Criterion, SweepValue::Criterion(c)) => p.criterion = *c,
        _ => {
            return Err(Error::config(format!(
                "sweep value {value} does not fit parameter {parameter:?}"
            )))
        }
    }
    Ok(p)
}

/// Mean ± std accuracy per grid value over fresh random splits. Grid point
/// `g` runs a repeated evaluation with master seed
/// `split_mix(split_mix(master_seed, 101), g)`.
pub fn hyperparam_sweep(
    dataset: &Dataset,
    protocol: &EvalProtocol,
    parameter: SweepParameter,
    grid: &[SweepValue],
    repetitions: u64,
) -> Result<Vec<SweepPoint>> {
    if grid.is_empty() {
        return Err(Error::config("sweep grid must not be empty"));
    }
    let mut points = Vec::with_capacity(grid.len());
    for (g, value) in grid.iter().enumerate() {
        let params = apply_sweep_value(&protocol.forest, parameter, value)?;
        let sub = EvalProtocol {
            iterations: repetitions,
            master_seed: split_mix(split_mix(protocol.master_seed, SWEEP_STREAM), g as u64),
            forest: params,
            ..protocol.clone()
        };
        let table = repeated_eval(dataset, &sub)?;
        points.push(SweepPoint {
            value: value.to_string(),
            mean_accuracy: table.mean_accuracy(),
            std_accuracy: table.accuracy_std(),
            repetitions,
        });
    }
    Ok(points)
}

pub fn sweep_to_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("value,mean_accuracy,std_accuracy,repetitions\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.value, p.mean_accuracy, p.std_accuracy, p.repetitions
        ));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AblationPoint {
    pub n_dims: usize,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    pub repetitions: u64,
}

pub fn ablation_to_csv(points: &[AblationPoint]) -> String {
    let mut out = String::from("n_dims,mean_accuracy,std_accuracy,repetitions\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.n_dims, p.mean_accuracy, p.std_accuracy, p.repetitions
        ));
    }
    out
}

fn validate_n_grid(n_grid: &[usize], dim: usize) -> Result<()> {
    if n_grid.is_empty() {
        return Err(Error::config("ablation grid must not be empty"));
    }
    if let Some(&bad) = n_grid.iter().find(|&&n| n < 1 || n > dim) {
        return Err(Error::config(format!(
            "ablation size {bad} out of range [1, {dim}]"
        )));
    }
    Ok(())
}

/// Accuracy when training on the feature prefix `[0, n)` for each `n`.
pub fn prefix_ablation(
    dataset: &Dataset,
    protocol: &EvalProtocol,
    n_grid: &[usize],
    repetitions: u64,
) -> Result<Vec<AblationPoint>> {
    validate_n_grid(n_grid, dataset.feature_count())?;
    let mut points = Vec::with_capacity(n_grid.len());
    for (g, &n) in n_grid.iter().enumerate() {
        let dims: Vec<usize> = (0..n).collect();
        let projected = dataset.project(&dims)?;
        let sub = EvalProtocol {
            iterations: repetitions,
            master_seed: split_mix(split_mix(protocol.master_seed, PREFIX_STREAM), g as u64),
            ..protocol.clone()
        };
        let table = repeated_eval(&projected, &sub)?;
        points.push(AblationPoint {
            n_dims: n,
            mean_accuracy: table.mean_accuracy(),
            std_accuracy: table.accuracy_std(),
            repetitions,
        });
    }
    Ok(points)
}

/// Accuracy when training on a fresh uniformly random `n`-subset of the
/// dimensions in every repetition.
pub fn random_dim_ablation(
    dataset: &Dataset,
    protocol: &EvalProtocol,
    n_grid: &[usize],
    repetitions: u64,
) -> Result<Vec<AblationPoint>> {
    validate_n_grid(n_grid, dataset.feature_count())?;
    let dim = dataset.feature_count();
    let mut points = Vec::with_capacity(n_grid.len());
    for (g, &n) in n_grid.iter().enumerate() {
        let point_seed = split_mix(split_mix(protocol.master_seed, RANDOM_DIM_STREAM), g as u64);
        let accuracies: Vec<f64> = (0..repetitions)
            .into_par_iter()
            .map(|r| {
                let rep_seed = split_mix(point_seed, r);
                let mut rng = Rng::from_seed(rep_seed);
                let dims = rng.sample_indices(dim, n);
                let projected = dataset.project(&dims)?;
                // The split rng continues the same stream the subset came
                // from; the forest gets its own derived seed.
                let outcome = single_eval(
                    &projected,
                    &protocol.forest,
                    protocol.split_unit,
                    protocol.test_fraction,
                    split_mix(rep_seed, 2),
                )?;
                Ok(outcome.accuracy)
            })
            .collect::<Result<_>>()?;
        points.push(AblationPoint {
            n_dims: n,
            mean_accuracy: accuracies.iter().sum::<f64>() / accuracies.len() as f64,
            std_accuracy: sample_std(&accuracies),
            repetitions,
        });
    }
    Ok(points)
}

/// Drop the `k` most frequently misclassified *words* (not pairs) and rerun
/// the whole repeated evaluation on what remains. Returns the excluded
/// surfaces alongside the new table.
pub fn exclude_and_retrain(
    dataset: &Dataset,
    table: &MisclassTable,
    k: usize,
    protocol: &EvalProtocol,
) -> Result<(Vec<String>, MisclassTable)> {
    let ranked = rank_errors(table);
    let excluded: HashSet<String> = ranked.iter().take(k).map(|w| w.surface.clone()).collect();
    let keep: Vec<usize> = (0..dataset.len())
        .filter(|&i| !excluded.contains(dataset.surface(i)))
        .collect();
    let reduced = dataset.select(&keep);
    let new_table = repeated_eval(&reduced, protocol)?;
    let mut names: Vec<String> = excluded.into_iter().collect();
    names.sort();
    Ok((names, new_table))
}

/// Pearson correlation coefficient.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::config("pearson needs equal-length inputs"));
    }
    if x.len() < 2 {
        return Err(Error::config("pearson needs at least 2 observations"));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        vx += (a - mx) * (a - mx);
        vy += (b - my) * (b - my);
    }
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::validation(
            "pearson is undefined for zero-variance input",
        ));
    }
    // Single square root so y = a*x correlates to exactly ±1.
    Ok((cov / (vx * vy).sqrt()).clamp(-1.0, 1.0))
}

/// Per-word features for the error-correlate analysis.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WordRecord {
    pub surface: String,
    pub origin: Origin,
    pub error_count: f64,
    pub raw_frequency: f64,
    pub signed_freq_diff: f64,
    pub pair_cosine: f64,
}

/// Join the misclassification table with pair statistics and the embedding
/// model. Words lacking a pair stat or vector are skipped (they never made it
/// into the classified dataset).
pub fn word_records(
    table: &MisclassTable,
    stats: &[PairStats],
    model: &EmbeddingModel,
) -> Result<Vec<WordRecord>> {
    let stat_of: std::collections::HashMap<&str, &PairStats> =
        stats.iter().map(|s| (s.surface.as_str(), s)).collect();
    let partner_of: std::collections::HashMap<&str, &PairStats> = stats
        .iter()
        .filter_map(|s| {
            stats
                .iter()
                .find(|o| o.pair_id == s.pair_id && o.surface != s.surface)
                .map(|o| (s.surface.as_str(), o))
        })
        .collect();
    let mut out = Vec::new();
    for w in &table.words {
        let (Some(stat), Some(partner)) = (
            stat_of.get(w.surface.as_str()),
            partner_of.get(w.surface.as_str()),
        ) else {
            continue;
        };
        let (Some(v), Some(pv)) = (model.vector(&w.surface), model.vector(&partner.surface)) else {
            continue;
        };
        out.push(WordRecord {
            surface: w.surface.clone(),
            origin: w.origin,
            error_count: w.times_misclassified as f64,
            raw_frequency: stat.raw_count as f64,
            signed_freq_diff: stat.signed_diff,
            pair_cosine: cosine(v, pv)?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FreqTransform {
    Log10,
    Raw,
}

/// A symmetric Pearson matrix over the four error correlates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    pub variables: Vec<String>,
    /// Row-major, `variables.len()` squared, unit diagonal.
    pub values: Vec<Vec<f64>>,
}

/// Pairwise Pearson correlations over `{error_count, frequency,
/// signed_freq_diff, pair_cosine}` with the chosen frequency transform.
pub fn correlation_matrix(
    records: &[WordRecord],
    freq: FreqTransform,
) -> Result<CorrelationMatrix> {
    if records.len() < 2 {
        return Err(Error::validation(
            "correlation matrix needs at least 2 words",
        ));
    }
    let freq_name = match freq {
        FreqTransform::Log10 => "log10_frequency",
        FreqTransform::Raw => "raw_frequency",
    };
    let variables: Vec<String> = ["error_count", freq_name, "signed_freq_diff", "pair_cosine"]
        .into_iter()
        .map(String::from)
        .collect();
    let columns: Vec<Vec<f64>> = vec![
        records.iter().map(|r| r.error_count).collect(),
        records
            .iter()
            .map(|r| match freq {
                FreqTransform::Log10 => r.raw_frequency.log10(),
                FreqTransform::Raw => r.raw_frequency,
            })
            .collect(),
        records.iter().map(|r| r.signed_freq_diff).collect(),
        records.iter().map(|r| r.pair_cosine).collect(),
    ];
    let k = columns.len();
    let mut values = vec![vec![0.0; k]; k];
    for i in 0..k {
        values[i][i] = 1.0;
        for j in (i + 1)..k {
            let r = pearson(&columns[i], &columns[j])?;
            values[i][j] = r;
            values[j][i] = r;
        }
    }
    Ok(CorrelationMatrix { variables, values })
}

/// CSV rows `panel,frequency,var_a,var_b,r` for one labeled panel.
pub fn correlation_to_csv(panels: &[(&str, FreqTransform, &CorrelationMatrix)]) -> String {
    let mut out = String::from("panel,frequency,var_a,var_b,r\n");
    for (panel, freq, matrix) in panels {
        let freq = match freq {
            FreqTransform::Log10 => "log10",
            FreqTransform::Raw => "raw",
        };
        for (i, a) in matrix.variables.iter().enumerate() {
            for (j, b) in matrix.variables.iter().enumerate() {
                out.push_str(&format!("{panel},{freq},{a},{b},{}\n", matrix.values[i][j]));
            }
        }
    }
    out
}

/// Jaccard index |A∩B| / |A∪B|; two empty sets are defined as identical (1).
pub fn jaccard<T: std::hash::Hash + Eq>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 1.0;
    }
    a.intersection(b).count() as f64 / union as f64
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverlapPoint {
    pub k: usize,
    pub jaccard: f64,
    /// Expected Jaccard of two independent uniform k-subsets of the combined
    /// word universe (hypergeometric closed form).
    pub expected_random_jaccard: f64,
}

/// Expected Jaccard index of two independent uniformly random k-subsets of an
/// n-element universe: `E[m / (2k - m)]` with `m` hypergeometric.
pub fn expected_random_jaccard(n: usize, k: usize) -> f64 {
    if k == 0 || n == 0 {
        return 1.0; // two empty sets
    }
    let k = k.min(n);
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=n).scan(0.0, |acc, i| {
            *acc += (i as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_choose = |n: usize, r: usize| ln_fact[n] - ln_fact[r] - ln_fact[n - r];
    let lo = k.saturating_sub(n - k);
    let mut expectation = 0.0;
    for m in lo..=k {
        if k - m > n - k {
            continue;
        }
        let ln_p = ln_choose(k, m) + ln_choose(n - k, k - m) - ln_choose(n, k);
        expectation += ln_p.exp() * m as f64 / (2 * k - m) as f64;
    }
    expectation
}

/// Top-k most-misclassified word overlap between two runs (different corpora,
/// same lexicon). The random baseline uses the union of the two word sets as
/// its universe.
pub fn cross_corpus_overlap(
    table_a: &MisclassTable,
    table_b: &MisclassTable,
    k_list: &[usize],
) -> Vec<OverlapPoint> {
    let ranked_a = rank_errors(table_a);
    let ranked_b = rank_errors(table_b);
    let universe: HashSet<&str> = ranked_a
        .iter()
        .chain(&ranked_b)
        .map(|w| w.surface.as_str())
        .collect();
    k_list
        .iter()
        .map(|&k| {
            let top = |ranked: &[WordOutcome]| -> HashSet<String> {
                ranked.iter().take(k).map(|w| w.surface.clone()).collect()
            };
            OverlapPoint {
                k,
                jaccard: jaccard(&top(&ranked_a), &top(&ranked_b)),
                expected_random_jaccard: expected_random_jaccard(universe.len(), k),
            }
        })
        .collect()
}

pub fn overlap_to_csv(points: &[OverlapPoint]) -> String {
    let mut out = String::from("k,jaccard,expected_random_jaccard\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.k, p.jaccard, p.expected_random_jaccard
        ));
    }
    out
}

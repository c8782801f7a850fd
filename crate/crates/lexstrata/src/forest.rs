//! Binary decision trees and a random forest over labeled embedding vectors,
//! built from scratch.
//!
//! Trees are grown CART-style: at every node a random subset of candidate
//! features is drawn, every midpoint between consecutive distinct feature
//! values is scored, and the split with the largest weighted impurity
//! decrease wins (ties broken toward the lower feature index, then the lower
//! threshold). Samples with `x[feature] <= threshold` go left. Every node
//! records how many training samples reached it (its cover) and leaves keep
//! their class counts; the SHAP explainer relies on both.
//!
//! All randomness derives from the forest seed: tree `t` uses
//! `split_mix(seed, t)`, and inside a tree each node's candidate-feature draw
//! is keyed by the node's position, so a forest is a pure function of
//! (dataset, params, seed) no matter how trees are scheduled.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::Origin;
use crate::rng::{split_mix, Rng};

/// Split quality measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Gini,
    Entropy,
}

/// How many candidate features each node considers. Serializes as the
/// string `"sqrt"` or a plain integer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "MaxFeaturesRepr", into = "MaxFeaturesRepr")]
pub enum MaxFeatures {
    /// floor(sqrt(feature_count)), at least 1.
    Sqrt,
    /// A fixed number (clamped to the feature count).
    Count(usize),
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum MaxFeaturesRepr {
    Count(usize),
    Name(String),
}

impl TryFrom<MaxFeaturesRepr> for MaxFeatures {
    type Error = String;

    fn try_from(repr: MaxFeaturesRepr) -> std::result::Result<Self, String> {
        match repr {
            MaxFeaturesRepr::Count(k) => Ok(MaxFeatures::Count(k)),
            MaxFeaturesRepr::Name(name) if name == "sqrt" => Ok(MaxFeatures::Sqrt),
            MaxFeaturesRepr::Name(other) => Err(format!(
                "max_features must be \"sqrt\" or an integer, got \"{other}\""
            )),
        }
    }
}

impl From<MaxFeatures> for MaxFeaturesRepr {
    fn from(mf: MaxFeatures) -> MaxFeaturesRepr {
        match mf {
            MaxFeatures::Sqrt => MaxFeaturesRepr::Name("sqrt".to_string()),
            MaxFeatures::Count(k) => MaxFeaturesRepr::Count(k),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub criterion: Criterion,
    pub max_features: MaxFeatures,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_estimators: 50,
            max_depth: 5,
            criterion: Criterion::Gini,
            max_features: MaxFeatures::Sqrt,
            min_samples_split: 2,
            bootstrap: true,
            seed: 42,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators < 1 {
            return Err(Error::config("n_estimators must be at least 1"));
        }
        if self.max_depth < 1 {
            return Err(Error::config("max_depth must be at least 1"));
        }
        if self.min_samples_split < 2 {
            return Err(Error::config("min_samples_split must be at least 2"));
        }
        if let MaxFeatures::Count(0) = self.max_features {
            return Err(Error::config("max_features count must be at least 1"));
        }
        Ok(())
    }

    fn resolve_max_features(&self, n_features: usize) -> usize {
        match self.max_features {
            MaxFeatures::Sqrt => ((n_features as f64).sqrt().floor() as usize).max(1),
            MaxFeatures::Count(k) => k.min(n_features).max(1),
        }
    }
}

pub const N_CLASSES: usize = 2;

pub fn class_index(origin: Origin) -> usize {
    match origin {
        Origin::Sanskrit => 0,
        Origin::PersoArabic => 1,
    }
}

/// Labeled feature vectors with their word surfaces (row-major storage).
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Vec<f64>,
    n_features: usize,
    labels: Vec<Origin>,
    surfaces: Vec<String>,
    pair_ids: Option<Vec<u32>>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        n_features: usize,
        labels: Vec<Origin>,
        surfaces: Vec<String>,
        pair_ids: Option<Vec<u32>>,
    ) -> Result<Dataset> {
        if n_features == 0 {
            return Err(Error::config("dataset needs at least one feature"));
        }
        let n = labels.len();
        if features.len() != n * n_features || surfaces.len() != n {
            return Err(Error::config(
                "dataset rows, labels and surfaces must be consistent",
            ));
        }
        if let Some(p) = &pair_ids {
            if p.len() != n {
                return Err(Error::config("pair id list must match the sample count"));
            }
        }
        if features.iter().any(|x| !x.is_finite()) {
            return Err(Error::validation("dataset contains non-finite features"));
        }
        Ok(Dataset {
            features,
            n_features,
            labels,
            surfaces,
            pair_ids,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn feature_count(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.features[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn label(&self, i: usize) -> Origin {
        self.labels[i]
    }

    pub fn surface(&self, i: usize) -> &str {
        &self.surfaces[i]
    }

    pub fn labels(&self) -> &[Origin] {
        &self.labels
    }

    pub fn surfaces(&self) -> &[String] {
        &self.surfaces
    }

    pub fn pair_ids(&self) -> Option<&[u32]> {
        self.pair_ids.as_deref()
    }

    pub fn has_both_classes(&self) -> bool {
        let mut seen = [false; N_CLASSES];
        for &l in &self.labels {
            seen[class_index(l)] = true;
        }
        seen.iter().all(|&s| s)
    }

    /// New dataset restricted to `rows` (in the given order).
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let mut features = Vec::with_capacity(rows.len() * self.n_features);
        let mut labels = Vec::with_capacity(rows.len());
        let mut surfaces = Vec::with_capacity(rows.len());
        let mut pair_ids = self
            .pair_ids
            .as_ref()
            .map(|_| Vec::with_capacity(rows.len()));
        for &r in rows {
            features.extend_from_slice(self.row(r));
            labels.push(self.labels[r]);
            surfaces.push(self.surfaces[r].clone());
            if let (Some(dst), Some(src)) = (&mut pair_ids, &self.pair_ids) {
                dst.push(src[r]);
            }
        }
        Dataset {
            features,
            n_features: self.n_features,
            labels,
            surfaces,
            pair_ids,
        }
    }

    /// New dataset keeping only the feature columns in `dims` (in order).
    pub fn project(&self, dims: &[usize]) -> Result<Dataset> {
        if dims.is_empty() {
            return Err(Error::config("feature projection needs at least one dim"));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d >= self.n_features) {
            return Err(Error::config(format!(
                "projection dim {bad} out of range ({} features)",
                self.n_features
            )));
        }
        let mut features = Vec::with_capacity(self.len() * dims.len());
        for i in 0..self.len() {
            let row = self.row(i);
            features.extend(dims.iter().map(|&d| row[d]));
        }
        Ok(Dataset {
            features,
            n_features: dims.len(),
            labels: self.labels.clone(),
            surfaces: self.surfaces.clone(),
            pair_ids: self.pair_ids.clone(),
        })
    }
}

/// A tree node; leaves carry training class counts, internal nodes the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Leaf {
        /// Training samples per class at this leaf, [sanskrit, perso_arabic].
        class_counts: [u64; N_CLASSES],
        label: Origin,
        cover: u64,
    },
    Internal {
        feature: usize,
        threshold: f64,
        cover: u64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn cover(&self) -> u64 {
        match self {
            TreeNode::Leaf { cover, .. } | TreeNode::Internal { cover, .. } => *cover,
        }
    }

    /// Leaf probability of the PERSO_ARABIC class for sample `x`.
    pub fn leaf_probability(&self, x: &[f64]) -> f64 {
        match self {
            TreeNode::Leaf {
                class_counts,
                cover,
                ..
            } => class_counts[1] as f64 / *cover as f64,
            TreeNode::Internal {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                if x[*feature] <= *threshold {
                    left.leaf_probability(x)
                } else {
                    right.leaf_probability(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Internal { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Does any node in this tree split on `feature`?
    pub fn uses_feature(&self, feature: usize) -> bool {
        match self {
            TreeNode::Leaf { .. } => false,
            TreeNode::Internal {
                feature: f,
                left,
                right,
                ..
            } => *f == feature || left.uses_feature(feature) || right.uses_feature(feature),
        }
    }
}

/// Impurity of a class-count vector. `0·log 0 = 0`; entropy is in bits.
pub fn impurity(criterion: Criterion, class_counts: &[u64]) -> Result<f64> {
    let total: u64 = class_counts.iter().sum();
    if total == 0 {
        return Err(Error::validation(
            "impurity of all-zero counts is undefined",
        ));
    }
    Ok(impurity_unchecked(criterion, class_counts, total))
}

fn impurity_unchecked(criterion: Criterion, class_counts: &[u64], total: u64) -> f64 {
    let n = total as f64;
    match criterion {
        Criterion::Gini => {
            1.0 - class_counts
                .iter()
                .map(|&c| {
                    let p = c as f64 / n;
                    p * p
                })
                .sum::<f64>()
        }
        Criterion::Entropy => -class_counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / n;
                p * p.log2()
            })
            .sum::<f64>(),
    }
}

/// The split-threshold convention shared by search and prediction: the
/// midpoint of two consecutive distinct values, falling back to the lower
/// value when rounding would escape the open interval.
pub fn split_threshold(lower: f64, upper: f64) -> f64 {
    let t = lower / 2.0 + upper / 2.0;
    if t >= lower && t < upper {
        t
    } else {
        lower
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Split {
    pub feature: usize,
    pub threshold: f64,
    pub decrease: f64,
}

/// Exhaustive best split over `candidate_features` for the rows in `indices`.
///
/// Returns `None` when no threshold yields a positive weighted impurity
/// decrease (pure node, constant features ...). Deterministic tie-break:
/// lower feature index first (candidates are scanned in ascending order),
/// then lower threshold.
pub fn best_split(
    dataset: &Dataset,
    indices: &[usize],
    candidate_features: &[usize],
    criterion: Criterion,
) -> Option<Split> {
    let n = indices.len();
    if n < 2 {
        return None;
    }
    let mut total_counts = [0u64; N_CLASSES];
    for &i in indices {
        total_counts[class_index(dataset.label(i))] += 1;
    }
    let parent_impurity = impurity_unchecked(criterion, &total_counts, n as u64);

    let mut best: Option<Split> = None;
    let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(n);
    let mut features: Vec<usize> = candidate_features.to_vec();
    features.sort_unstable();
    features.dedup();

    for &feature in &features {
        sorted.clear();
        sorted.extend(
            indices
                .iter()
                .map(|&i| (dataset.row(i)[feature], class_index(dataset.label(i)))),
        );
        sorted.sort_by(|a, b| a.0.total_cmp(&b.0));

        let mut left_counts = [0u64; N_CLASSES];
        for k in 1..n {
            left_counts[sorted[k - 1].1] += 1;
            let (prev, curr) = (sorted[k - 1].0, sorted[k].0);
            if prev == curr {
                continue;
            }
            let right_counts = [
                total_counts[0] - left_counts[0],
                total_counts[1] - left_counts[1],
            ];
            let nl = k as u64;
            let nr = (n - k) as u64;
            let decrease = parent_impurity
                - (nl as f64 / n as f64) * impurity_unchecked(criterion, &left_counts, nl)
                - (nr as f64 / n as f64) * impurity_unchecked(criterion, &right_counts, nr);
            if decrease > best.map_or(0.0, |b| b.decrease) {
                best = Some(Split {
                    feature,
                    threshold: split_threshold(prev, curr),
                    decrease,
                });
            }
        }
    }
    best
}

const BOOTSTRAP_STREAM: u64 = 0;
const NODE_STREAM: u64 = 1;

/// Grow one tree over all rows of `dataset` with per-node feature draws
/// keyed by `(seed, node position)`.
pub fn grow_tree(dataset: &Dataset, params: &ForestParams, seed: u64) -> Result<TreeNode> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(Error::validation("cannot grow a tree on an empty dataset"));
    }
    let indices: Vec<usize> = (0..dataset.len()).collect();
    Ok(grow_node(dataset, &indices, params, seed, 1, 0))
}

fn grow_node(
    dataset: &Dataset,
    indices: &[usize],
    params: &ForestParams,
    tree_seed: u64,
    node_id: u64,
    depth: usize,
) -> TreeNode {
    let mut class_counts = [0u64; N_CLASSES];
    for &i in indices {
        class_counts[class_index(dataset.label(i))] += 1;
    }
    let cover = indices.len() as u64;
    let make_leaf = || TreeNode::Leaf {
        class_counts,
        // Exact ties go to SANSKRIT, the first enum value.
        label: if class_counts[1] > class_counts[0] {
            Origin::PersoArabic
        } else {
            Origin::Sanskrit
        },
        cover,
    };

    let pure = class_counts.iter().filter(|&&c| c > 0).count() <= 1;
    if depth >= params.max_depth || pure || indices.len() < params.min_samples_split {
        return make_leaf();
    }

    let k = params.resolve_max_features(dataset.feature_count());
    let mut node_rng = Rng::from_seed(split_mix(split_mix(tree_seed, NODE_STREAM), node_id));
    let candidates = node_rng.sample_indices(dataset.feature_count(), k);

    let Some(split) = best_split(dataset, indices, &candidates, params.criterion) else {
        return make_leaf();
    };

    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = indices
        .iter()
        .partition(|&&i| dataset.row(i)[split.feature] <= split.threshold);
    debug_assert!(!left_idx.is_empty() && !right_idx.is_empty());

    // Children are keyed by heap position; stay deterministic (and still a
    // function of the path) if the tree outgrows the u64 heap indexing.
    let left_id = node_id.wrapping_mul(2);
    let right_id = node_id.wrapping_mul(2).wrapping_add(1);
    TreeNode::Internal {
        feature: split.feature,
        threshold: split.threshold,
        cover,
        left: Box::new(grow_node(
            dataset,
            &left_idx,
            params,
            tree_seed,
            left_id,
            depth + 1,
        )),
        right: Box::new(grow_node(
            dataset,
            &right_idx,
            params,
            tree_seed,
            right_id,
            depth + 1,
        )),
    }
}

/// A fitted forest, with the per-tree seeds that reproduce it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub tree_seeds: Vec<u64>,
    pub trees: Vec<TreeNode>,
}

/// Train a forest: tree `t` is grown on a bootstrap resample (size n, with
/// replacement) drawn with the rng seeded `split_mix(params.seed, t)`;
/// `bootstrap = false` trains every tree on the full data. Trees are
/// independent, so they may be fitted in parallel without changing the
/// result.
pub fn fit(dataset: &Dataset, params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    if dataset.is_empty() {
        return Err(Error::validation("cannot fit a forest on an empty dataset"));
    }
    if !dataset.has_both_classes() {
        return Err(Error::validation("training data must contain both classes"));
    }
    let tree_seeds: Vec<u64> = (0..params.n_estimators)
        .map(|t| split_mix(params.seed, t as u64))
        .collect();
    let trees: Vec<TreeNode> = tree_seeds
        .par_iter()
        .map(|&tree_seed| {
            let n = dataset.len();
            let rows: Vec<usize> = if params.bootstrap {
                let mut rng = Rng::from_seed(split_mix(tree_seed, BOOTSTRAP_STREAM));
                (0..n).map(|_| rng.gen_range(n)).collect()
            } else {
                (0..n).collect()
            };
            let sample = dataset.select(&rows);
            let indices: Vec<usize> = (0..sample.len()).collect();
            grow_node(&sample, &indices, params, tree_seed, 1, 0)
        })
        .collect();
    Ok(Forest {
        params: params.clone(),
        tree_seeds,
        trees,
    })
}

impl Forest {
    /// Mean over trees of the leaf PERSO_ARABIC probability, plus the label.
    /// A score of exactly 0.5 resolves to SANSKRIT.
    pub fn predict(&self, x: &[f64]) -> (Origin, f64) {
        let score = self
            .trees
            .iter()
            .map(|t| t.leaf_probability(x))
            .sum::<f64>()
            / self.trees.len() as f64;
        let label = if score > 0.5 {
            Origin::PersoArabic
        } else {
            Origin::Sanskrit
        };
        (label, score)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("forest serializes")
    }

    pub fn from_json(text: &str) -> Result<Forest> {
        serde_json::from_str(text)
            .map_err(|e| Error::validation(format!("malformed forest file: {e}")))
    }
}

/// Accuracy plus per-sample correctness flags on a test set.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub accuracy: f64,
    pub correct: Vec<bool>,
}

pub fn evaluate(forest: &Forest, testset: &Dataset) -> Result<Evaluation> {
    if testset.is_empty() {
        return Err(Error::validation("cannot evaluate on an empty test set"));
    }
    let correct: Vec<bool> = (0..testset.len())
        .map(|i| forest.predict(testset.row(i)).0 == testset.label(i))
        .collect();
    let hits = correct.iter().filter(|&&c| c).count();
    Ok(Evaluation {
        accuracy: hits as f64 / testset.len() as f64,
        correct,
    })
}

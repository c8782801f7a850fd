//! Exact per-feature SHAP attributions for trees and forests.
//!
//! This is the path-dependent variant: conditional expectations are estimated
//! from the training cover counts stored in every node, so explanations are
//! self-contained; no background dataset is required. For a tree with cover
//! data, `tree_shap` returns the exact Shapley values of that
//! cover-weighted conditional-expectation game; the test suite checks it
//! against a brute-force enumeration over all feature coalitions.
//!
//! Attributions target the PERSO_ARABIC-probability output, a single scalar;
//! the SANSKRIT view is its negation. Local accuracy holds on every sample:
//! `base_value + Σ phi = predicted score`.
//!
//! One documented asymmetry of the path-dependent variant: two features used
//! interchangeably by the model attribute to whichever feature the tree
//! actually split on, not half-and-half.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forest::{Forest, TreeNode};

/// Per-feature contributions to one prediction.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ShapExplanation {
    /// Contribution of each feature to the PERSO_ARABIC score.
    pub phi: Vec<f64>,
    /// Expected model score over the training distribution.
    pub base_value: f64,
}

impl ShapExplanation {
    pub fn prediction(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

/// Walk a tree checking that cover data is present and consistent: positive
/// everywhere, children partitioning their parent, leaf counts summing to
/// the leaf cover.
fn validate_covers(node: &TreeNode) -> Result<()> {
    match node {
        TreeNode::Leaf {
            class_counts,
            cover,
            ..
        } => {
            if *cover == 0 {
                return Err(Error::validation("leaf with zero cover"));
            }
            if class_counts.iter().sum::<u64>() != *cover {
                return Err(Error::validation("leaf class counts do not sum to cover"));
            }
            Ok(())
        }
        TreeNode::Internal {
            cover, left, right, ..
        } => {
            if *cover == 0 {
                return Err(Error::validation("internal node with zero cover"));
            }
            if left.cover() + right.cover() != *cover {
                return Err(Error::validation(
                    "child covers do not partition their parent",
                ));
            }
            validate_covers(left)?;
            validate_covers(right)
        }
    }
}

fn max_feature(node: &TreeNode) -> Option<usize> {
    match node {
        TreeNode::Leaf { .. } => None,
        TreeNode::Internal {
            feature,
            left,
            right,
            ..
        } => [max_feature(left), max_feature(right), Some(*feature)]
            .into_iter()
            .flatten()
            .max(),
    }
}

/// Cover-weighted expected leaf score of a (sub)tree.
fn expected_value(node: &TreeNode) -> f64 {
    match node {
        TreeNode::Leaf {
            class_counts,
            cover,
            ..
        } => class_counts[1] as f64 / *cover as f64,
        TreeNode::Internal {
            cover, left, right, ..
        } => {
            (left.cover() as f64 * expected_value(left)
                + right.cover() as f64 * expected_value(right))
                / *cover as f64
        }
    }
}

/// One step of the feature path threaded through the recursion.
#[derive(Debug, Clone)]
struct PathElement {
    /// `None` only for the root sentinel.
    feature: Option<usize>,
    /// Fraction of coalitions flowing this way when the feature is absent.
    zero_fraction: f64,
    /// 1 on the hot path, 0 on the cold path.
    one_fraction: f64,
    /// Shapley permutation weight.
    pweight: f64,
}

fn extend(path: &mut Vec<PathElement>, pz: f64, po: f64, feature: Option<usize>) {
    let l = path.len();
    path.push(PathElement {
        feature,
        zero_fraction: pz,
        one_fraction: po,
        pweight: if l == 0 { 1.0 } else { 0.0 },
    });
    for i in (0..l).rev() {
        path[i + 1].pweight += po * path[i].pweight * (i + 1) as f64 / (l + 1) as f64;
        path[i].pweight = pz * path[i].pweight * (l - i) as f64 / (l + 1) as f64;
    }
}

fn unwind(path: &[PathElement], idx: usize) -> Vec<PathElement> {
    let l = path.len();
    let one = path[idx].one_fraction;
    let zero = path[idx].zero_fraction;
    let mut out: Vec<PathElement> = path[..l - 1].to_vec();
    let mut n = path[l - 1].pweight;
    if one != 0.0 {
        for j in (0..l - 1).rev() {
            let t = out[j].pweight;
            out[j].pweight = n * l as f64 / ((j + 1) as f64 * one);
            n = t - out[j].pweight * zero * (l - 1 - j) as f64 / l as f64;
        }
    } else {
        for j in (0..l - 1).rev() {
            out[j].pweight = out[j].pweight * l as f64 / (zero * (l - 1 - j) as f64);
        }
    }
    for j in idx..out.len() {
        out[j].feature = path[j + 1].feature;
        out[j].zero_fraction = path[j + 1].zero_fraction;
        out[j].one_fraction = path[j + 1].one_fraction;
    }
    out
}

/// Total permutation weight of the path with element `idx` removed.
fn unwound_weight_sum(path: &[PathElement], idx: usize) -> f64 {
    let l = path.len();
    let one = path[idx].one_fraction;
    let zero = path[idx].zero_fraction;
    let mut total = 0.0;
    if one != 0.0 {
        let mut n = path[l - 1].pweight;
        for j in (0..l - 1).rev() {
            let w = n * l as f64 / ((j + 1) as f64 * one);
            total += w;
            n = path[j].pweight - w * zero * (l - 1 - j) as f64 / l as f64;
        }
    } else {
        for j in (0..l - 1).rev() {
            total += path[j].pweight * l as f64 / (zero * (l - 1 - j) as f64);
        }
    }
    total
}

fn recurse(
    node: &TreeNode,
    path: Vec<PathElement>,
    pz: f64,
    po: f64,
    feature: Option<usize>,
    x: &[f64],
    phi: &mut [f64],
) {
    let mut path = path;
    extend(&mut path, pz, po, feature);
    match node {
        TreeNode::Leaf {
            class_counts,
            cover,
            ..
        } => {
            let value = class_counts[1] as f64 / *cover as f64;
            for i in 1..path.len() {
                let w = unwound_weight_sum(&path, i);
                let e = &path[i];
                phi[e.feature.expect("non-sentinel path element")] +=
                    w * (e.one_fraction - e.zero_fraction) * value;
            }
        }
        TreeNode::Internal {
            feature: split_feature,
            threshold,
            cover,
            left,
            right,
        } => {
            let (hot, cold): (&TreeNode, &TreeNode) = if x[*split_feature] <= *threshold {
                (left, right)
            } else {
                (right, left)
            };
            let mut incoming_zero = 1.0;
            let mut incoming_one = 1.0;
            // A feature met again along the path: undo its previous entry
            // and fold its fractions into the new one.
            if let Some(k) = path.iter().position(|e| e.feature == Some(*split_feature)) {
                incoming_zero = path[k].zero_fraction;
                incoming_one = path[k].one_fraction;
                path = unwind(&path, k);
            }
            let total = *cover as f64;
            recurse(
                hot,
                path.clone(),
                incoming_zero * hot.cover() as f64 / total,
                incoming_one,
                Some(*split_feature),
                x,
                phi,
            );
            recurse(
                cold,
                path,
                incoming_zero * cold.cover() as f64 / total,
                0.0,
                Some(*split_feature),
                x,
                phi,
            );
        }
    }
}

/// Exact path-dependent SHAP values of one tree for sample `x`.
pub fn tree_shap(tree: &TreeNode, x: &[f64]) -> Result<ShapExplanation> {
    validate_covers(tree)?;
    if let Some(max) = max_feature(tree) {
        if max >= x.len() {
            return Err(Error::validation(format!(
                "tree splits on feature {max} but the sample has {} features",
                x.len()
            )));
        }
    }
    let mut phi = vec![0.0; x.len()];
    recurse(tree, Vec::new(), 1.0, 1.0, None, x, &mut phi);
    Ok(ShapExplanation {
        phi,
        base_value: expected_value(tree),
    })
}

/// Per-feature attributions averaged over all trees of a forest. Local
/// accuracy holds against the forest score.
pub fn forest_shap(forest: &Forest, x: &[f64]) -> Result<ShapExplanation> {
    if forest.trees.is_empty() {
        return Err(Error::validation("cannot explain an empty forest"));
    }
    let mut phi = vec![0.0; x.len()];
    let mut base = 0.0;
    for tree in &forest.trees {
        let single = tree_shap(tree, x)?;
        for (acc, p) in phi.iter_mut().zip(&single.phi) {
            *acc += p;
        }
        base += single.base_value;
    }
    let n = forest.trees.len() as f64;
    for p in &mut phi {
        *p /= n;
    }
    Ok(ShapExplanation {
        phi,
        base_value: base / n,
    })
}

/// Signed-contribution dispersion of one embedding dimension across a
/// dataset (the data behind a beeswarm-style figure).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionSummary {
    pub dimension: usize,
    pub mean_abs_phi: f64,
    pub min_phi: f64,
    pub max_phi: f64,
    /// 1 = most important; equal `mean_abs_phi` shares a rank.
    pub rank: usize,
}

/// Explain every sample of `dataset` and aggregate per dimension, ranked by
/// mean |phi| descending.
pub fn shap_summary(
    forest: &Forest,
    dataset: &crate::forest::Dataset,
) -> Result<Vec<DimensionSummary>> {
    if dataset.is_empty() {
        return Err(Error::validation("cannot summarize an empty dataset"));
    }
    let explanations: Vec<ShapExplanation> = (0..dataset.len())
        .into_par_iter()
        .map(|i| forest_shap(forest, dataset.row(i)))
        .collect::<Result<_>>()?;
    let dims = dataset.feature_count();
    let n = dataset.len() as f64;
    let mut rows: Vec<DimensionSummary> = (0..dims)
        .map(|d| {
            let mut abs_sum = 0.0;
            let mut min = f64::INFINITY;
            let mut max = f64::NEG_INFINITY;
            for e in &explanations {
                let p = e.phi[d];
                abs_sum += p.abs();
                min = min.min(p);
                max = max.max(p);
            }
            DimensionSummary {
                dimension: d,
                mean_abs_phi: abs_sum / n,
                min_phi: min,
                max_phi: max,
                rank: 0,
            }
        })
        .collect();

    // Competition ranking on mean |phi| (ties share the earlier rank).
    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| {
        rows[b]
            .mean_abs_phi
            .total_cmp(&rows[a].mean_abs_phi)
            .then(a.cmp(&b))
    });
    let mut rank = 0;
    let mut prev: Option<f64> = None;
    for (pos, &d) in order.iter().enumerate() {
        if prev != Some(rows[d].mean_abs_phi) {
            rank = pos + 1;
            prev = Some(rows[d].mean_abs_phi);
        }
        rows[d].rank = rank;
    }
    Ok(rows)
}

/// CSV rows `dimension,mean_abs_phi,min_phi,max_phi,rank`.
pub fn summary_to_csv(rows: &[DimensionSummary]) -> String {
    let mut out = String::from("dimension,mean_abs_phi,min_phi,max_phi,rank\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.dimension, r.mean_abs_phi, r.min_phi, r.max_phi, r.rank
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit, Dataset, ForestParams, MaxFeatures};
    use crate::lexicon::Origin;
    use crate::rng::Rng;

    use Origin::{PersoArabic as P, Sanskrit as S};

    fn leaf(sanskrit: u64, perso: u64) -> TreeNode {
        TreeNode::Leaf {
            class_counts: [sanskrit, perso],
            label: if perso > sanskrit { P } else { S },
            cover: sanskrit + perso,
        }
    }

    fn internal(feature: usize, threshold: f64, left: TreeNode, right: TreeNode) -> TreeNode {
        TreeNode::Internal {
            feature,
            threshold,
            cover: left.cover() + right.cover(),
            left: Box::new(left),
            right: Box::new(right),
        }
    }

    #[test]
    fn single_leaf_has_zero_phi_and_leaf_base() {
        let tree = leaf(3, 1);
        let e = tree_shap(&tree, &[0.0, 0.0]).unwrap();
        assert_eq!(e.phi, vec![0.0, 0.0]);
        assert_eq!(e.base_value, 0.25);
    }

    #[test]
    fn balanced_stump_attributes_only_the_split_feature() {
        let tree = internal(1, 0.5, leaf(4, 0), leaf(0, 4));
        let e = tree_shap(&tree, &[9.0, 0.2, 7.0]).unwrap();
        let base = 0.5;
        assert_eq!(e.base_value, base);
        assert!((e.phi[1] - (0.0 - base)).abs() < 1e-12);
        assert_eq!(e.phi[0], 0.0);
        assert_eq!(e.phi[2], 0.0);
        let e2 = tree_shap(&tree, &[9.0, 0.9, 7.0]).unwrap();
        assert!((e2.phi[1] - (1.0 - base)).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_cover_data_is_rejected() {
        let bad = TreeNode::Internal {
            feature: 0,
            threshold: 0.5,
            cover: 10, // children sum to 8
            left: Box::new(leaf(4, 0)),
            right: Box::new(leaf(0, 4)),
        };
        assert!(tree_shap(&bad, &[0.0]).is_err());
        let zero = TreeNode::Leaf {
            class_counts: [0, 0],
            label: S,
            cover: 0,
        };
        assert!(tree_shap(&zero, &[0.0]).is_err());
    }

    #[test]
    fn sample_narrower_than_tree_is_rejected() {
        let tree = internal(2, 0.5, leaf(1, 0), leaf(0, 1));
        assert!(tree_shap(&tree, &[0.0, 0.0]).is_err());
    }

    /// Cover-weighted conditional expectation with the coalition fixed: the
    /// game the brute-force Shapley oracle evaluates.
    fn cond_exp(node: &TreeNode, x: &[f64], mask: u32) -> f64 {
        match node {
            TreeNode::Leaf {
                class_counts,
                cover,
                ..
            } => class_counts[1] as f64 / *cover as f64,
            TreeNode::Internal {
                feature,
                threshold,
                cover,
                left,
                right,
            } => {
                if mask & (1 << feature) != 0 {
                    if x[*feature] <= *threshold {
                        cond_exp(left, x, mask)
                    } else {
                        cond_exp(right, x, mask)
                    }
                } else {
                    (left.cover() as f64 * cond_exp(left, x, mask)
                        + right.cover() as f64 * cond_exp(right, x, mask))
                        / *cover as f64
                }
            }
        }
    }

    /// Exponential-time exact Shapley values over all 2^F coalitions.
    #[allow(clippy::needless_range_loop)]
    fn brute_force_shapley(tree: &TreeNode, x: &[f64]) -> Vec<f64> {
        let f = x.len();
        let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
        let mut phi = vec![0.0; f];
        for i in 0..f {
            for mask in 0u32..(1 << f) {
                if mask & (1 << i) != 0 {
                    continue;
                }
                let s = mask.count_ones() as usize;
                let weight = fact(s) * fact(f - s - 1) / fact(f);
                let with = cond_exp(tree, x, mask | (1 << i));
                let without = cond_exp(tree, x, mask);
                phi[i] += weight * (with - without);
            }
        }
        phi
    }

    #[test]
    fn matches_brute_force_on_random_trees() {
        let mut rng = Rng::from_seed(404);
        for case in 0..60 {
            let n = 20 + rng.gen_range(20);
            let n_features = 2 + rng.gen_range(3); // 2..=4
            let mut features = Vec::new();
            let mut labels = Vec::new();
            let mut surfaces = Vec::new();
            for i in 0..n {
                for _ in 0..n_features {
                    features.push(rng.gen_range(8) as f64 * 0.25);
                }
                labels.push(if rng.gen_range(2) == 0 { S } else { P });
                surfaces.push(format!("w{i}"));
            }
            let data = Dataset::new(features, n_features, labels, surfaces, None).unwrap();
            if !data.has_both_classes() {
                continue;
            }
            let params = ForestParams {
                n_estimators: 1,
                max_depth: 4,
                max_features: MaxFeatures::Count(n_features),
                bootstrap: false,
                seed: case,
                ..ForestParams::default()
            };
            let forest = fit(&data, &params).unwrap();
            let tree = &forest.trees[0];
            for _ in 0..5 {
                let x: Vec<f64> = (0..n_features)
                    .map(|_| rng.gen_range(9) as f64 * 0.25 - 0.125)
                    .collect();
                let fast = tree_shap(tree, &x).unwrap();
                let slow = brute_force_shapley(tree, &x);
                for (a, b) in fast.phi.iter().zip(&slow) {
                    assert!((a - b).abs() < 1e-9, "case {case}: {a} vs {b}");
                }
                // Local accuracy against the actual leaf score.
                let score = tree.leaf_probability(&x);
                assert!((fast.prediction() - score).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn matches_brute_force_with_repeated_feature_on_path() {
        // Feature 0 is split twice along the left spine.
        let tree = internal(
            0,
            2.0,
            internal(0, 1.0, leaf(5, 1), internal(1, 0.0, leaf(2, 2), leaf(0, 4))),
            leaf(1, 7),
        );
        for x in [[0.5, -1.0], [0.5, 1.0], [1.5, -1.0], [1.5, 1.0], [3.0, 0.0]] {
            let fast = tree_shap(&tree, &x).unwrap();
            let slow = brute_force_shapley(&tree, &x);
            for (a, b) in fast.phi.iter().zip(&slow) {
                assert!((a - b).abs() < 1e-9, "x={x:?}: {a} vs {b}");
            }
            assert!((fast.prediction() - tree.leaf_probability(&x)).abs() < 1e-12);
        }
    }

    fn random_dataset(rng: &mut Rng, n: usize, dims: usize) -> Dataset {
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut surfaces = Vec::new();
        for i in 0..n {
            let row: Vec<f64> = (0..dims).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            labels.push(if row[1] > 0.0 { P } else { S });
            features.extend(row);
            surfaces.push(format!("w{i}"));
        }
        Dataset::new(features, dims, labels, surfaces, None).unwrap()
    }

    #[test]
    fn forest_of_identical_trees_equals_single_tree() {
        let mut rng = Rng::from_seed(77);
        let data = random_dataset(&mut rng, 40, 3);
        let params = ForestParams {
            n_estimators: 5,
            bootstrap: false, // every tree sees the full data
            max_features: MaxFeatures::Count(3),
            seed: 3,
            ..ForestParams::default()
        };
        let forest = fit(&data, &params).unwrap();
        // With identical training rows and full feature candidates the five
        // trees are identical; per-node rngs differ but candidates are all.
        let x = [0.3, -0.4, 0.9];
        let whole = forest_shap(&forest, &x).unwrap();
        let single = tree_shap(&forest.trees[0], &x).unwrap();
        for (a, b) in whole.phi.iter().zip(&single.phi) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((whole.base_value - single.base_value).abs() < 1e-12);
    }

    #[test]
    fn local_accuracy_on_a_forest() {
        let mut rng = Rng::from_seed(909);
        let data = random_dataset(&mut rng, 60, 5);
        let forest = fit(
            &data,
            &ForestParams {
                n_estimators: 20,
                seed: 15,
                ..ForestParams::default()
            },
        )
        .unwrap();
        for _ in 0..50 {
            let x: Vec<f64> = (0..5).map(|_| rng.next_f64() * 2.0 - 1.0).collect();
            let e = forest_shap(&forest, &x).unwrap();
            let (_, score) = forest.predict(&x);
            assert!(
                (e.prediction() - score).abs() < 1e-9,
                "{} vs {score}",
                e.prediction()
            );
        }
    }

    #[test]
    fn phi_is_permutation_invariant_up_to_rounding() {
        let mut rng = Rng::from_seed(31);
        let data = random_dataset(&mut rng, 30, 3);
        let forest = fit(
            &data,
            &ForestParams {
                n_estimators: 9,
                seed: 1,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let mut shuffled = forest.clone();
        shuffled.trees.reverse();
        let x = [0.1, 0.2, -0.3];
        let a = forest_shap(&forest, &x).unwrap();
        let b = forest_shap(&shuffled, &x).unwrap();
        for (p, q) in a.phi.iter().zip(&b.phi) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn unused_feature_has_exactly_zero_phi() {
        let mut rng = Rng::from_seed(5);
        // Only feature 1 carries label signal; feature 2 is constant so no
        // tree can ever split on it.
        let n = 40;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut surfaces = Vec::new();
        for i in 0..n {
            let f1 = rng.next_f64() * 2.0 - 1.0;
            features.extend([rng.next_f64(), f1, 0.0]);
            labels.push(if f1 > 0.0 { P } else { S });
            surfaces.push(format!("w{i}"));
        }
        let data = Dataset::new(features, 3, labels, surfaces, None).unwrap();
        let forest = fit(
            &data,
            &ForestParams {
                n_estimators: 10,
                max_features: MaxFeatures::Count(3),
                seed: 2,
                ..ForestParams::default()
            },
        )
        .unwrap();
        assert!(forest.trees.iter().all(|t| !t.uses_feature(2)));
        let e = forest_shap(&forest, &[0.5, 0.5, 0.5]).unwrap();
        assert_eq!(e.phi[2], 0.0);
    }

    #[test]
    fn constant_model_summary_ties_all_ranks() {
        // Identical feature rows make every node unsplittable: a forest of
        // bare leaves predicting the class balance.
        let n = 10;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        let mut surfaces = Vec::new();
        for i in 0..n {
            features.extend([1.0, 2.0]);
            labels.push(if i % 2 == 0 { P } else { S });
            surfaces.push(format!("w{i}"));
        }
        let data = Dataset::new(features, 2, labels, surfaces, None).unwrap();
        let forest = fit(
            &data,
            &ForestParams {
                n_estimators: 4,
                bootstrap: false,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let summary = shap_summary(&forest, &data).unwrap();
        assert!(summary.iter().all(|r| r.mean_abs_phi == 0.0));
        assert!(summary.iter().all(|r| r.rank == 1));
    }

    #[test]
    fn informative_dimension_ranks_first() {
        let mut rng = Rng::from_seed(6);
        let data = random_dataset(&mut rng, 80, 4); // label depends on dim 1
        let forest = fit(
            &data,
            &ForestParams {
                n_estimators: 15,
                seed: 9,
                ..ForestParams::default()
            },
        )
        .unwrap();
        let summary = shap_summary(&forest, &data).unwrap();
        let top = summary.iter().find(|r| r.rank == 1).unwrap();
        assert_eq!(top.dimension, 1);
        let csv = summary_to_csv(&summary);
        assert!(csv.starts_with("dimension,mean_abs_phi"));
        assert_eq!(csv.lines().count(), 5);
    }
}

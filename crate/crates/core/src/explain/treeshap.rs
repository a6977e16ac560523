//! Path-dependent TreeSHAP and a brute-force Shapley oracle over the same
//! cover-weighted coalition value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::{Ensemble, ModelKind, RegressionTree};

/// Largest feature count the exhaustive oracle accepts.
pub const BRUTE_FORCE_MAX_FEATURES: usize = 15;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapExplanation {
    /// Expected model output with no feature known.
    pub base_value: f64,
    /// One attribution per feature, in model feature order.
    pub phi: Vec<f64>,
    /// Row of the explained data set, when there is one.
    pub row: Option<usize>,
    /// True when the model is not additive and `phi` explains its
    /// weighted-mean surrogate instead.
    pub surrogate: bool,
}

impl ShapExplanation {
    pub fn reconstruction(&self) -> f64 {
        self.base_value + self.phi.iter().sum::<f64>()
    }
}

fn check_instance(tree: &RegressionTree, x: &[f64]) -> Result<()> {
    if x.len() != tree.n_features {
        return Err(Error::usage(format!(
            "instance has {} features, tree expects {}",
            x.len(),
            tree.n_features
        )));
    }
    if let Some(j) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::Prediction(format!("feature {j} is not finite ({})", x[j])));
    }
    if let Some(i) = tree.nodes.iter().position(|n| !(n.cover > 0.0)) {
        return Err(Error::CorruptModel(format!("node {i} has cover {}", tree.nodes[i].cover)));
    }
    Ok(())
}

/// Cover-weighted mean of the leaves below `node`.
fn expected_value(tree: &RegressionTree, node: usize) -> f64 {
    let n = &tree.nodes[node];
    match (n.left, n.right) {
        (Some(l), Some(r)) => {
            (tree.nodes[l].cover * expected_value(tree, l) + tree.nodes[r].cover * expected_value(tree, r)) / n.cover
        }
        _ => n.value,
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct PathElement {
    feature: Option<usize>,
    zero_fraction: f64,
    one_fraction: f64,
    weight: f64,
}

fn extend_path(path: &mut [PathElement], depth: usize, zero: f64, one: f64, feature: Option<usize>) {
    path[depth] = PathElement {
        feature,
        zero_fraction: zero,
        one_fraction: one,
        weight: if depth == 0 { 1.0 } else { 0.0 },
    };
    let d1 = (depth + 1) as f64;
    for i in (0..depth).rev() {
        path[i + 1].weight += one * path[i].weight * (i + 1) as f64 / d1;
        path[i].weight = zero * path[i].weight * (depth - i) as f64 / d1;
    }
}

fn unwind_path(path: &mut [PathElement], depth: usize, index: usize) {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = path[i].weight;
            path[i].weight = next * d1 / ((i + 1) as f64 * one);
            next = tmp - path[i].weight * zero * (depth - i) as f64 / d1;
        } else {
            path[i].weight = path[i].weight * d1 / (zero * (depth - i) as f64);
        }
    }
    for i in index..depth {
        path[i].feature = path[i + 1].feature;
        path[i].zero_fraction = path[i + 1].zero_fraction;
        path[i].one_fraction = path[i + 1].one_fraction;
    }
}

/// Total permutation weight the path would carry with element `index` removed.
fn unwound_sum(path: &[PathElement], depth: usize, index: usize) -> f64 {
    let one = path[index].one_fraction;
    let zero = path[index].zero_fraction;
    let d1 = (depth + 1) as f64;
    let mut next = path[depth].weight;
    let mut total = 0.0;
    for i in (0..depth).rev() {
        if one != 0.0 {
            let tmp = next * d1 / ((i + 1) as f64 * one);
            total += tmp;
            next = path[i].weight - tmp * zero * (depth - i) as f64 / d1;
        } else if zero != 0.0 {
            total += path[i].weight / zero / ((depth - i) as f64 / d1);
        }
    }
    total
}

struct Walker<'a> {
    tree: &'a RegressionTree,
    x: &'a [f64],
    phi: &'a mut [f64],
    scale: f64,
}

impl Walker<'_> {
    /// `parent` holds the path of the caller; `buf` is scratch for deeper levels.
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        &mut self,
        node: usize,
        parent: &[PathElement],
        buf: &mut [PathElement],
        mut depth: usize,
        zero: f64,
        one: f64,
        feature: Option<usize>,
    ) {
        let (path, rest) = buf.split_at_mut(depth + 1);
        path[..depth].copy_from_slice(&parent[..depth]);
        extend_path(path, depth, zero, one, feature);

        let n = &self.tree.nodes[node];
        let (Some(f), Some(l), Some(r)) = (n.feature, n.left, n.right) else {
            for i in 1..=depth {
                let w = unwound_sum(path, depth, i);
                let el = path[i];
                let j = el.feature.expect("path elements past the root carry a feature");
                self.phi[j] += self.scale * w * (el.one_fraction - el.zero_fraction) * n.value;
            }
            return;
        };
        let (hot, cold) = if self.x[f] <= n.threshold { (l, r) } else { (r, l) };
        let hot_zero = self.tree.nodes[hot].cover / n.cover;
        let cold_zero = self.tree.nodes[cold].cover / n.cover;
        let (mut in_zero, mut in_one) = (1.0, 1.0);
        if let Some(k) = (1..=depth).find(|&k| path[k].feature == Some(f)) {
            in_zero = path[k].zero_fraction;
            in_one = path[k].one_fraction;
            unwind_path(path, depth, k);
            depth -= 1;
        }
        let path: &[PathElement] = path;
        self.recurse(hot, path, rest, depth + 1, hot_zero * in_zero, in_one, Some(f));
        self.recurse(cold, path, rest, depth + 1, cold_zero * in_zero, 0.0, Some(f));
    }
}

/// Adds `scale` times the tree's attributions for `x` to `phi`.
fn accumulate(tree: &RegressionTree, x: &[f64], scale: f64, phi: &mut [f64]) {
    let max_depth = tree.depth() + 2;
    // depth d of the recursion uses d + 1 slots past its parent's
    let mut buf = vec![PathElement::default(); max_depth * (max_depth + 1) / 2 + max_depth];
    let mut walker = Walker { tree, x, phi, scale };
    walker.recurse(0, &[], &mut buf, 0, 1.0, 1.0, None);
}

/// Exact path-dependent SHAP values of a single tree.
pub fn tree_shap(tree: &RegressionTree, x: &[f64]) -> Result<ShapExplanation> {
    check_instance(tree, x)?;
    let mut phi = vec![0.0; tree.n_features];
    accumulate(tree, x, 1.0, &mut phi);
    Ok(ShapExplanation {
        base_value: expected_value(tree, 0),
        phi,
        row: None,
        surrogate: false,
    })
}

/// SHAP values of an ensemble's additive form: per-tree attributions scaled
/// by the tree's share (1/T for forests, the learning rate for boosters,
/// the normalized vote weight for AdaBoost's surrogate).
pub fn ensemble_shap(model: &Ensemble, x: &[f64]) -> Result<ShapExplanation> {
    let (offset, scales) = model.additive_form();
    let mut phi = vec![0.0; model.n_features()];
    let mut base = offset;
    for (tree, &s) in model.trees.iter().zip(&scales) {
        check_instance(tree, x)?;
        accumulate(tree, x, s, &mut phi);
        base += s * expected_value(tree, 0);
    }
    Ok(ShapExplanation {
        base_value: base,
        phi,
        row: None,
        surrogate: model.kind == ModelKind::AdaboostR2,
    })
}

/// v(S): features in `mask` follow `x`, the others split by cover.
fn coalition_value(tree: &RegressionTree, node: usize, x: &[f64], mask: u32) -> f64 {
    let n = &tree.nodes[node];
    match (n.feature, n.left, n.right) {
        (Some(f), Some(l), Some(r)) => {
            if mask & (1 << f) != 0 {
                let next = if x[f] <= n.threshold { l } else { r };
                coalition_value(tree, next, x, mask)
            } else {
                (tree.nodes[l].cover * coalition_value(tree, l, x, mask)
                    + tree.nodes[r].cover * coalition_value(tree, r, x, mask))
                    / n.cover
            }
        }
        _ => n.value,
    }
}

/// Shapley values by enumerating all 2^M coalitions.
pub fn brute_force_shapley(tree: &RegressionTree, x: &[f64]) -> Result<Vec<f64>> {
    let m = tree.n_features;
    if m > BRUTE_FORCE_MAX_FEATURES {
        return Err(Error::usage(format!(
            "brute-force Shapley supports at most {BRUTE_FORCE_MAX_FEATURES} features, got {m}"
        )));
    }
    check_instance(tree, x)?;
    let v: Vec<f64> = (0..1u32 << m).map(|mask| coalition_value(tree, 0, x, mask)).collect();
    // |S|!(M-|S|-1)!/M!
    let mut fact = vec![1.0f64; m + 1];
    for i in 1..=m {
        fact[i] = fact[i - 1] * i as f64;
    }
    let weight: Vec<f64> = (0..m).map(|s| fact[s] * fact[m - s - 1] / fact[m]).collect();
    let mut phi = vec![0.0; m];
    for (i, p) in phi.iter_mut().enumerate() {
        let bit = 1u32 << i;
        for mask in 0..1u32 << m {
            if mask & bit == 0 {
                *p += weight[mask.count_ones() as usize] * (v[(mask | bit) as usize] - v[mask as usize]);
            }
        }
    }
    Ok(phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::TreeNode;

    fn node(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> TreeNode {
        TreeNode::split(feature, threshold, left, right, cover)
    }

    fn stump() -> RegressionTree {
        RegressionTree {
            nodes: vec![node(0, 1.5, 1, 2, 4.0), TreeNode::leaf(0.0, 2.0), TreeNode::leaf(10.0, 2.0)],
            n_features: 3,
        }
    }

    #[test]
    fn single_leaf() {
        let t = RegressionTree { nodes: vec![TreeNode::leaf(4.0, 3.0)], n_features: 2 };
        let e = tree_shap(&t, &[1.0, 2.0]).unwrap();
        assert_eq!(e.base_value, 4.0);
        assert_eq!(e.phi, vec![0.0, 0.0]);
        assert_eq!(brute_force_shapley(&t, &[1.0, 2.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn stump_example() {
        let e = tree_shap(&stump(), &[2.0, 0.0, 0.0]).unwrap();
        assert_eq!(e.base_value, 5.0);
        assert_eq!(e.phi, vec![5.0, 0.0, 0.0]);
    }

    #[test]
    fn depth_two_unequal_covers() {
        // x0 <= 0 ? (x1 <= 0 ? 1 : 4) : 10 with covers 3/1 under the left
        let t = RegressionTree {
            nodes: vec![
                node(0, 0.0, 1, 4, 10.0),
                node(1, 0.0, 2, 3, 4.0),
                TreeNode::leaf(1.0, 3.0),
                TreeNode::leaf(4.0, 1.0),
                TreeNode::leaf(10.0, 6.0),
            ],
            n_features: 2,
        };
        for x in [[-1.0, -1.0], [-1.0, 1.0], [1.0, -1.0], [1.0, 1.0]] {
            let e = tree_shap(&t, &x).unwrap();
            let b = brute_force_shapley(&t, &x).unwrap();
            for (a, b) in e.phi.iter().zip(&b) {
                assert!((a - b).abs() < 1e-12);
            }
            assert!((e.reconstruction() - t.predict(&x).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn additive_value_recovered() {
        // two stumps on different features summed into one tree: the
        // coalition value is additive, so phi is each feature's own effect
        let t = RegressionTree {
            nodes: vec![
                node(0, 0.0, 1, 4, 4.0),
                node(1, 0.0, 2, 3, 2.0),
                TreeNode::leaf(0.0, 1.0),
                TreeNode::leaf(3.0, 1.0),
                node(1, 0.0, 5, 6, 2.0),
                TreeNode::leaf(2.0, 1.0),
                TreeNode::leaf(5.0, 1.0),
            ],
            n_features: 2,
        };
        let phi = brute_force_shapley(&t, &[1.0, 1.0]).unwrap();
        // f0 contributes 0 or 2 (mean 1), f1 contributes 0 or 3 (mean 1.5)
        assert!((phi[0] - 1.0).abs() < 1e-12);
        assert!((phi[1] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn duplicated_feature_symmetry() {
        // features 0 and 1 are copies; the leaf value counts how many exceed 0.5
        let t = RegressionTree {
            nodes: vec![
                node(0, 0.5, 1, 4, 4.0),
                node(1, 0.5, 2, 3, 2.0),
                TreeNode::leaf(0.0, 1.0),
                TreeNode::leaf(3.0, 1.0),
                node(1, 0.5, 5, 6, 2.0),
                TreeNode::leaf(3.0, 1.0),
                TreeNode::leaf(8.0, 1.0),
            ],
            n_features: 3,
        };
        let x = [1.0, 1.0, 0.0];
        let phi = brute_force_shapley(&t, &x).unwrap();
        assert!((phi[0] - phi[1]).abs() < 1e-12);
        assert_eq!(phi[2], 0.0);
        let e = tree_shap(&t, &x).unwrap();
        assert!((e.phi[0] - e.phi[1]).abs() < 1e-12);
    }

    #[test]
    fn zero_cover_is_corrupt() {
        let mut t = stump();
        t.nodes[1].cover = 0.0;
        assert!(matches!(tree_shap(&t, &[0.0; 3]), Err(Error::CorruptModel(_))));
    }

    #[test]
    fn too_many_features_for_oracle() {
        let t = RegressionTree { nodes: vec![TreeNode::leaf(1.0, 1.0)], n_features: 16 };
        assert!(matches!(brute_force_shapley(&t, &[0.0; 16]), Err(Error::Usage(_))));
    }
}

use rand::seq::index::sample;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

/// One node of a fitted tree. Internal nodes route `x[feature] <= threshold`
/// to `left`, everything else to `right`. Leaves have no feature or children.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreeNode {
    pub feature: Option<usize>,
    pub threshold: f64,
    pub left: Option<usize>,
    pub right: Option<usize>,
    /// Prediction at this node (leaf value; node estimate for internal nodes).
    pub value: f64,
    /// Weighted number of training samples reaching the node.
    pub cover: f64,
    /// Weighted mean squared deviation of the node's targets.
    pub impurity: f64,
}

impl TreeNode {
    pub fn is_leaf(&self) -> bool {
        self.feature.is_none()
    }

    pub fn leaf(value: f64, cover: f64) -> Self {
        TreeNode {
            feature: None,
            threshold: 0.0,
            left: None,
            right: None,
            value,
            cover,
            impurity: 0.0,
        }
    }

    pub fn split(feature: usize, threshold: f64, left: usize, right: usize, cover: f64) -> Self {
        TreeNode {
            feature: Some(feature),
            threshold,
            left: Some(left),
            right: Some(right),
            value: 0.0,
            cover,
            impurity: 0.0,
        }
    }
}

/// Binary regression tree stored as a node array in preorder; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    pub nodes: Vec<TreeNode>,
    pub n_features: usize,
}

impl RegressionTree {
    pub fn root(&self) -> &TreeNode {
        &self.nodes[0]
    }

    /// Leaf reached by threshold routing; `x` must be finite.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::usage(format!(
                "instance has {} features, tree expects {}",
                x.len(),
                self.n_features
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Prediction(format!("feature {j} is not finite ({})", x[j])));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let mut node = &self.nodes[0];
        while let (Some(f), Some(l), Some(r)) = (node.feature, node.left, node.right) {
            node = if x[f] <= node.threshold {
                &self.nodes[l]
            } else {
                &self.nodes[r]
            };
        }
        node.value
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &RegressionTree, i: usize) -> usize {
            match (t.nodes[i].left, t.nodes[i].right) {
                (Some(l), Some(r)) => 1 + walk(t, l).max(walk(t, r)),
                _ => 0,
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    /// Structural checks: preorder child links, feature bounds, finite values.
    pub fn validate(&self) -> Result<()> {
        if self.nodes.is_empty() {
            return Err(Error::CorruptModel("tree has no nodes".into()));
        }
        for (i, n) in self.nodes.iter().enumerate() {
            if !n.value.is_finite() || !n.cover.is_finite() || !n.threshold.is_finite() {
                return Err(Error::CorruptModel(format!("node {i} holds a non-finite value")));
            }
            match (n.feature, n.left, n.right) {
                (None, None, None) => {}
                (Some(f), Some(l), Some(r)) => {
                    if f >= self.n_features {
                        return Err(Error::CorruptModel(format!(
                            "node {i} splits on feature {f} of {}",
                            self.n_features
                        )));
                    }
                    if l <= i || r <= i || l >= self.nodes.len() || r >= self.nodes.len() || l == r {
                        return Err(Error::CorruptModel(format!("node {i} has invalid children")));
                    }
                }
                _ => return Err(Error::CorruptModel(format!("node {i} is half split"))),
            }
        }
        Ok(())
    }
}

/// How split quality is scored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Criterion {
    /// Weighted variance reduction; leaf = weighted mean.
    Variance,
    /// ½[G_L²/(H_L+λ) + G_R²/(H_R+λ) − G²/(H+λ)] − γ; leaf = −G/(H+λ).
    SecondOrder { lambda: f64, gamma: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Splitter {
    /// Every midpoint between consecutive distinct values.
    Best,
    /// One uniform threshold per feature between node min and max.
    Random,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct GrowConfig {
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: usize,
    pub criterion: Criterion,
    pub splitter: Splitter,
}

/// Per-sample first and second order statistics. A plain weighted
/// regression on targets `y` uses g = −w·y, h = w.
pub(crate) struct Samples<'a> {
    pub x: &'a [f64],
    pub n_features: usize,
    pub grad: &'a [f64],
    pub hess: &'a [f64],
}

impl Samples<'_> {
    fn value(&self, i: usize, f: usize) -> f64 {
        self.x[i * self.n_features + f]
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    g: f64,
    h: f64,
    count: usize,
}

impl Sums {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.count += 1;
    }

    fn sub(self, o: Sums) -> Sums {
        Sums {
            g: self.g - o.g,
            h: self.h - o.h,
            count: self.count - o.count,
        }
    }

    fn score(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Variance => self.g * self.g / self.h,
            Criterion::SecondOrder { lambda, .. } => self.g * self.g / (self.h + lambda),
        }
    }

    fn leaf_value(&self, criterion: Criterion) -> f64 {
        match criterion {
            Criterion::Variance => -self.g / self.h,
            Criterion::SecondOrder { lambda, .. } => -self.g / (self.h + lambda),
        }
    }

}

fn gain(criterion: Criterion, left: &Sums, right: &Sums, parent: &Sums) -> f64 {
    let raw = left.score(criterion) + right.score(criterion) - parent.score(criterion);
    match criterion {
        Criterion::Variance => raw,
        Criterion::SecondOrder { gamma, .. } => 0.5 * raw - gamma,
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

pub(crate) fn grow(samples: &Samples<'_>, indices: Vec<usize>, cfg: &GrowConfig, rng: &mut Rng) -> RegressionTree {
    let mut nodes = Vec::new();
    grow_node(samples, indices, cfg, rng, 0, &mut nodes);
    RegressionTree {
        nodes,
        n_features: samples.n_features,
    }
}

fn node_sums(samples: &Samples<'_>, idx: &[usize]) -> Sums {
    let mut s = Sums::default();
    for &i in idx {
        s.add(samples.grad[i], samples.hess[i]);
    }
    s
}

fn grow_node(
    samples: &Samples<'_>,
    idx: Vec<usize>,
    cfg: &GrowConfig,
    rng: &mut Rng,
    depth: usize,
    nodes: &mut Vec<TreeNode>,
) -> usize {
    let sums = node_sums(samples, &idx);
    let value = sums.leaf_value(cfg.criterion);
    let impurity = {
        let mean = -sums.g / sums.h;
        idx.iter()
            .map(|&i| {
                let d = -samples.grad[i] / samples.hess[i] - mean;
                samples.hess[i] * d * d
            })
            .sum::<f64>()
            / sums.h
    };
    let me = nodes.len();
    let mut leaf = TreeNode::leaf(value, sums.h);
    leaf.impurity = impurity;
    nodes.push(leaf);

    let depth_reached = cfg.max_depth.is_some_and(|d| depth >= d);
    let targets_constant = {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &i in &idx {
            let t = -samples.grad[i] / samples.hess[i];
            lo = lo.min(t);
            hi = hi.max(t);
        }
        hi - lo <= 1e-12 * hi.abs().max(lo.abs()).max(1.0)
    };
    if depth_reached || targets_constant || idx.len() < 2 * cfg.min_samples_leaf {
        return me;
    }

    let Some(best) = find_split(samples, &idx, &sums, cfg, rng) else {
        return me;
    };
    let (left_idx, right_idx): (Vec<usize>, Vec<usize>) = idx
        .iter()
        .partition(|&&i| samples.value(i, best.feature) <= best.threshold);
    drop(idx);
    let l = grow_node(samples, left_idx, cfg, rng, depth + 1, nodes);
    let r = grow_node(samples, right_idx, cfg, rng, depth + 1, nodes);
    let cover = nodes[l].cover + nodes[r].cover;
    nodes[me] = TreeNode {
        feature: Some(best.feature),
        threshold: best.threshold,
        left: Some(l),
        right: Some(r),
        value,
        cover,
        impurity,
    };
    me
}

fn candidate_features(p: usize, k: usize, rng: &mut Rng) -> Vec<usize> {
    if k >= p {
        return (0..p).collect();
    }
    let mut f = sample(rng, p, k).into_vec();
    f.sort_unstable();
    f
}

fn find_split(samples: &Samples<'_>, idx: &[usize], parent: &Sums, cfg: &GrowConfig, rng: &mut Rng) -> Option<Candidate> {
    let features = candidate_features(samples.n_features, cfg.max_features, rng);
    let mut best: Option<Candidate> = None;
    let mut consider = |c: Candidate| {
        if c.gain > 0.0 && best.is_none_or(|b| c.gain > b.gain) {
            best = Some(c);
        }
    };
    let msl = cfg.min_samples_leaf.max(1);
    match cfg.splitter {
        Splitter::Best => {
            let mut order: Vec<(f64, usize)> = Vec::with_capacity(idx.len());
            for &f in &features {
                order.clear();
                order.extend(idx.iter().map(|&i| (samples.value(i, f), i)));
                order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                let mut left = Sums::default();
                for k in 0..order.len() - 1 {
                    let i = order[k].1;
                    left.add(samples.grad[i], samples.hess[i]);
                    let (lo, hi) = (order[k].0, order[k + 1].0);
                    if lo == hi || k + 1 < msl || order.len() - k - 1 < msl {
                        continue;
                    }
                    let right = parent.sub(left);
                    let mut threshold = lo + (hi - lo) / 2.0;
                    if threshold >= hi {
                        threshold = lo;
                    }
                    consider(Candidate {
                        feature: f,
                        threshold,
                        gain: gain(cfg.criterion, &left, &right, parent),
                    });
                }
            }
        }
        Splitter::Random => {
            for &f in &features {
                let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
                for &i in idx {
                    let v = samples.value(i, f);
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
                if lo >= hi {
                    continue;
                }
                let threshold = rng.random_range(lo..hi);
                let mut left = Sums::default();
                for &i in idx {
                    if samples.value(i, f) <= threshold {
                        left.add(samples.grad[i], samples.hess[i]);
                    }
                }
                if left.count < msl || idx.len() - left.count < msl {
                    continue;
                }
                let right = parent.sub(left);
                consider(Candidate {
                    feature: f,
                    threshold,
                    gain: gain(cfg.criterion, &left, &right, parent),
                });
            }
        }
    }
    best
}

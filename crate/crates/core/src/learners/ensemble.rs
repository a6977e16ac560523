use log::debug;
use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow, Criterion, GrowConfig, RegressionTree, Samples, Splitter};
use super::{HyperParams, ModelKind, SquaredLoss};
use crate::error::{Error, Result};
use crate::preprocess::FeatureMatrix;
use crate::rng::{domain, substream};

/// A fitted tree ensemble. `tree_weights` has one entry per tree: the
/// AdaBoost voting weights, 1.0 for every other kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub kind: ModelKind,
    pub params: HyperParams,
    pub feature_names: Vec<String>,
    pub trees: Vec<RegressionTree>,
    pub tree_weights: Vec<f64>,
    pub base_score: f64,
    pub learning_rate: f64,
    /// Set when AdaBoost's first tree already fits the training data exactly.
    pub exact_fit: bool,
    /// Training MSE after each boosting round (index 0 is the base score alone).
    #[serde(default)]
    pub training_mse: Vec<f64>,
}

fn check_training_data(data: &FeatureMatrix, params: &HyperParams) -> Result<()> {
    if data.n_rows() == 0 {
        return Err(Error::usage("cannot fit on an empty matrix"));
    }
    if data.n_features() == 0 {
        return Err(Error::usage("cannot fit without features"));
    }
    if let Some(i) = data.target.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("target at row {i} is not finite")));
    }
    params.validate(data.n_features())
}

fn grow_config(params: &HyperParams, p: usize, criterion: Criterion, splitter: Splitter) -> Result<GrowConfig> {
    Ok(GrowConfig {
        max_depth: params.max_depth,
        min_samples_leaf: params.min_samples_leaf,
        max_features: params.max_features.resolve(p)?,
        criterion,
        splitter,
    })
}

/// Weighted least-squares tree on `targets` using the rows with positive weight.
fn weighted_tree(
    data: &FeatureMatrix,
    targets: &[f64],
    weights: &[f64],
    cfg: &GrowConfig,
    rng: &mut crate::rng::Rng,
) -> RegressionTree {
    let grad: Vec<f64> = targets.iter().zip(weights).map(|(y, w)| -w * y).collect();
    let idx: Vec<usize> = (0..targets.len()).filter(|&i| weights[i] > 0.0).collect();
    let samples = Samples {
        x: &data.data,
        n_features: data.n_features(),
        grad: &grad,
        hess: weights,
    };
    grow(&samples, idx, cfg, rng)
}

/// Single CART regression tree. `weights` default to 1.
pub fn fit_cart(data: &FeatureMatrix, weights: Option<&[f64]>, params: &HyperParams) -> Result<RegressionTree> {
    check_training_data(data, params)?;
    let ones;
    let w = match weights {
        Some(w) => {
            if w.len() != data.n_rows() {
                return Err(Error::usage("weight vector length differs from row count"));
            }
            if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::usage("weights must be finite and nonnegative"));
            }
            if !w.iter().any(|v| *v > 0.0) {
                return Err(Error::usage("weights are all zero"));
            }
            w
        }
        None => {
            ones = vec![1.0; data.n_rows()];
            &ones
        }
    };
    let cfg = grow_config(params, data.n_features(), Criterion::Variance, Splitter::Best)?;
    let mut rng = substream(params.seed, domain::CART, 0);
    Ok(weighted_tree(data, &data.target, w, &cfg, &mut rng))
}

fn fit_bagged(kind: ModelKind, data: &FeatureMatrix, params: &HyperParams, splitter: Splitter) -> Result<Ensemble> {
    check_training_data(data, params)?;
    let n = data.n_rows();
    let cfg = grow_config(params, data.n_features(), Criterion::Variance, splitter)?;
    let trees: Vec<RegressionTree> = (0..params.n_estimators)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(params.seed, domain::TREE, t as u64);
            let mut w = vec![0.0; n];
            if params.bootstrap {
                for _ in 0..n {
                    w[rng.random_range(0..n)] += 1.0;
                }
            } else {
                w.fill(1.0);
            }
            weighted_tree(data, &data.target, &w, &cfg, &mut rng)
        })
        .collect();
    Ok(Ensemble {
        kind,
        params: params.clone(),
        feature_names: data.feature_names.clone(),
        tree_weights: vec![1.0; trees.len()],
        trees,
        base_score: 0.0,
        learning_rate: 1.0,
        exact_fit: false,
        training_mse: Vec::new(),
    })
}

/// Bagged CARTs with per-split feature subsampling; predicts the tree mean.
pub fn fit_random_forest(data: &FeatureMatrix, params: &HyperParams) -> Result<Ensemble> {
    fit_bagged(ModelKind::RandomForest, data, params, Splitter::Best)
}

/// Trees with one random threshold per candidate feature at each node.
pub fn fit_extra_trees(data: &FeatureMatrix, params: &HyperParams) -> Result<Ensemble> {
    fit_bagged(ModelKind::ExtraTrees, data, params, Splitter::Random)
}

/// AdaBoost.R2 with weighted-median prediction.
pub fn fit_adaboost_r2(data: &FeatureMatrix, params: &HyperParams) -> Result<Ensemble> {
    check_training_data(data, params)?;
    let n = data.n_rows();
    let cfg = grow_config(params, data.n_features(), Criterion::Variance, Splitter::Best)?;
    let lr = params.learning_rate;
    let mut w = vec![1.0 / n as f64; n];
    let mut trees = Vec::new();
    let mut weights = Vec::new();
    let mut exact_fit = false;

    for t in 0..params.n_estimators {
        let mut rng = substream(params.seed, domain::TREE, t as u64);
        let tree = weighted_tree(data, &data.target, &w, &cfg, &mut rng);
        let err: Vec<f64> = (0..n)
            .map(|i| (tree.predict_unchecked(data.row(i)) - data.target[i]).abs())
            .collect();
        let max_err = err.iter().cloned().fold(0.0, f64::max);
        if max_err == 0.0 {
            exact_fit = t == 0;
            trees.push(tree);
            weights.push(1.0);
            break;
        }
        let loss: Vec<f64> = err.iter().map(|e| params.loss.apply(e / max_err)).collect();
        let avg: f64 = loss.iter().zip(&w).map(|(l, w)| l * w).sum();
        if avg >= 0.5 {
            debug!("adaboost stopped at round {t}: average loss {avg:.4}");
            if trees.is_empty() {
                trees.push(tree);
                weights.push(1.0);
            }
            break;
        }
        let beta = avg / (1.0 - avg);
        trees.push(tree);
        weights.push(lr * (1.0 / beta).ln());
        for (wi, li) in w.iter_mut().zip(&loss) {
            *wi *= beta.powf((1.0 - li) * lr);
        }
        let total: f64 = w.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            break;
        }
        for wi in &mut w {
            *wi /= total;
        }
    }
    Ok(Ensemble {
        kind: ModelKind::AdaboostR2,
        params: params.clone(),
        feature_names: data.feature_names.clone(),
        trees,
        tree_weights: weights,
        base_score: 0.0,
        learning_rate: lr,
        exact_fit,
        training_mse: Vec::new(),
    })
}

fn mse(y: &[f64], pred: &[f64]) -> f64 {
    y.iter().zip(pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64
}

fn fit_boosted(kind: ModelKind, data: &FeatureMatrix, params: &HyperParams, criterion: Criterion) -> Result<Ensemble> {
    check_training_data(data, params)?;
    let n = data.n_rows();
    let y = &data.target;
    let cfg = grow_config(params, data.n_features(), criterion, Splitter::Best)?;
    let lr = params.learning_rate;
    let loss = SquaredLoss;
    let base = y.iter().sum::<f64>() / n as f64;
    let mut raw = vec![0.0; n];
    let mut pred = vec![base; n];
    let hess: Vec<f64> = (0..n).map(|i| loss.hessian(y[i], pred[i])).collect();
    let mut trace = vec![mse(y, &pred)];
    let mut trees = Vec::with_capacity(params.n_estimators);

    for t in 0..params.n_estimators {
        let grad: Vec<f64> = (0..n).map(|i| loss.gradient(y[i], pred[i])).collect();
        let samples = Samples {
            x: &data.data,
            n_features: data.n_features(),
            grad: &grad,
            hess: &hess,
        };
        let mut rng = substream(params.seed, domain::TREE, t as u64);
        let tree = grow(&samples, (0..n).collect(), &cfg, &mut rng);
        for i in 0..n {
            raw[i] += tree.predict_unchecked(data.row(i));
            pred[i] = base + lr * raw[i];
        }
        trace.push(mse(y, &pred));
        trees.push(tree);
    }
    Ok(Ensemble {
        kind,
        params: params.clone(),
        feature_names: data.feature_names.clone(),
        tree_weights: vec![1.0; trees.len()],
        trees,
        base_score: base,
        learning_rate: lr,
        exact_fit: false,
        training_mse: trace,
    })
}

/// Least-squares gradient boosting: each tree fits the current residuals.
pub fn fit_gradient_boost(data: &FeatureMatrix, params: &HyperParams) -> Result<Ensemble> {
    fit_boosted(ModelKind::GradientBoost, data, params, Criterion::Variance)
}

/// Newton boosting with L2 leaf penalty `lambda` and split penalty `gamma`.
pub fn fit_second_order_boost(data: &FeatureMatrix, params: &HyperParams) -> Result<Ensemble> {
    fit_boosted(
        ModelKind::SecondOrderBoost,
        data,
        params,
        Criterion::SecondOrder {
            lambda: params.lambda,
            gamma: params.gamma,
        },
    )
}

pub fn fit(kind: ModelKind, data: &FeatureMatrix, params: &HyperParams) -> Result<Ensemble> {
    match kind {
        ModelKind::RandomForest => fit_random_forest(data, params),
        ModelKind::ExtraTrees => fit_extra_trees(data, params),
        ModelKind::AdaboostR2 => fit_adaboost_r2(data, params),
        ModelKind::GradientBoost => fit_gradient_boost(data, params),
        ModelKind::SecondOrderBoost => fit_second_order_boost(data, params),
    }
}

/// Smallest value whose cumulative weight reaches half the total weight.
pub fn weighted_median(values: &[f64], weights: &[f64]) -> f64 {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]).then(a.cmp(&b)));
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    for &i in &order {
        acc += weights[i];
        if acc >= 0.5 * total {
            return values[i];
        }
    }
    values[order[order.len() - 1]]
}

impl Ensemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Structural consistency between kind, trees and weights.
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() {
            return Err(Error::CorruptModel("ensemble has no trees".into()));
        }
        if self.tree_weights.len() != self.trees.len() {
            return Err(Error::CorruptModel(format!(
                "{} trees but {} tree weights",
                self.trees.len(),
                self.tree_weights.len()
            )));
        }
        if !self.base_score.is_finite() || !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::CorruptModel("invalid base score or learning rate".into()));
        }
        match self.kind {
            ModelKind::AdaboostR2 => {
                if self.tree_weights.iter().any(|w| !(w.is_finite() && *w >= 0.0))
                    || !(self.tree_weights.iter().sum::<f64>() > 0.0)
                {
                    return Err(Error::CorruptModel("AdaBoost weights must be nonnegative with a positive sum".into()));
                }
            }
            _ => {
                if self.tree_weights.iter().any(|&w| w != 1.0) {
                    return Err(Error::CorruptModel(format!("{} trees carry non-unit weights", self.kind)));
                }
            }
        }
        for (t, tree) in self.trees.iter().enumerate() {
            if tree.n_features != self.n_features() {
                return Err(Error::CorruptModel(format!(
                    "tree {t} expects {} features, model has {}",
                    tree.n_features,
                    self.n_features()
                )));
            }
            tree.validate()
                .map_err(|e| Error::CorruptModel(format!("tree {t}: {e}")))?;
        }
        Ok(())
    }

    pub fn predict_row(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::usage(format!(
                "instance has {} features, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        if let Some(j) = x.iter().position(|v| !v.is_finite()) {
            return Err(Error::Prediction(format!("feature {j} is not finite ({})", x[j])));
        }
        Ok(self.predict_unchecked(x))
    }

    fn predict_unchecked(&self, x: &[f64]) -> f64 {
        match self.kind {
            ModelKind::RandomForest | ModelKind::ExtraTrees => {
                self.trees.iter().map(|t| t.predict_unchecked(x)).sum::<f64>() / self.trees.len() as f64
            }
            ModelKind::AdaboostR2 => {
                let outputs: Vec<f64> = self.trees.iter().map(|t| t.predict_unchecked(x)).collect();
                weighted_median(&outputs, &self.tree_weights)
            }
            ModelKind::GradientBoost | ModelKind::SecondOrderBoost => {
                self.base_score + self.learning_rate * self.trees.iter().map(|t| t.predict_unchecked(x)).sum::<f64>()
            }
        }
    }

    pub fn predict(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        if data.feature_names != self.feature_names {
            return Err(Error::usage(format!(
                "model trained on {:?}, matrix has {:?}",
                self.feature_names, data.feature_names
            )));
        }
        data.rows().map(|r| self.predict_row(r)).collect()
    }

    /// The model written as `offset + Σ scale_t · tree_t(x)`. For AdaBoost
    /// this is the weighted mean of the trees, a surrogate of the median.
    pub fn additive_form(&self) -> (f64, Vec<f64>) {
        let t = self.trees.len() as f64;
        match self.kind {
            ModelKind::RandomForest | ModelKind::ExtraTrees => (0.0, vec![1.0 / t; self.trees.len()]),
            ModelKind::AdaboostR2 => {
                let total: f64 = self.tree_weights.iter().sum();
                (0.0, self.tree_weights.iter().map(|w| w / total).collect())
            }
            ModelKind::GradientBoost | ModelKind::SecondOrderBoost => {
                (self.base_score, vec![self.learning_rate; self.trees.len()])
            }
        }
    }

    /// Prediction of [`Ensemble::additive_form`]; equals `predict_row` for
    /// every kind except AdaBoost.
    pub fn predict_additive(&self, x: &[f64]) -> Result<f64> {
        self.predict_row(x)?;
        let (offset, scales) = self.additive_form();
        Ok(offset
            + self
                .trees
                .iter()
                .zip(&scales)
                .map(|(t, s)| s * t.predict_unchecked(x))
                .sum::<f64>())
    }
}

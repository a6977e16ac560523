//! From-scratch regression trees and the five tree ensembles.

mod artifact;
mod ensemble;
mod tree;

pub use artifact::{ModelArtifact, FORMAT_VERSION};
pub use ensemble::{
    fit, fit_adaboost_r2, fit_cart, fit_extra_trees, fit_gradient_boost, fit_random_forest,
    fit_second_order_boost, weighted_median, Ensemble,
};
pub use tree::{RegressionTree, TreeNode};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    RandomForest,
    ExtraTrees,
    AdaboostR2,
    GradientBoost,
    SecondOrderBoost,
}

impl ModelKind {
    pub const ALL: [ModelKind; 5] = [
        ModelKind::RandomForest,
        ModelKind::ExtraTrees,
        ModelKind::AdaboostR2,
        ModelKind::GradientBoost,
        ModelKind::SecondOrderBoost,
    ];

    /// Short name used on the command line and in file names.
    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "forest",
            ModelKind::ExtraTrees => "extra",
            ModelKind::AdaboostR2 => "adaboost",
            ModelKind::GradientBoost => "gbm",
            ModelKind::SecondOrderBoost => "xgb2",
        }
    }

    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::RandomForest => "RandomForest",
            ModelKind::ExtraTrees => "ExtraTrees",
            ModelKind::AdaboostR2 => "AdaBoostR2",
            ModelKind::GradientBoost => "GradientBoost",
            ModelKind::SecondOrderBoost => "SecondOrderBoost",
        }
    }

    /// Whether predictions are an additive function of the tree outputs.
    pub fn is_additive(self) -> bool {
        !matches!(self, ModelKind::AdaboostR2)
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.short_name() == s)
            .ok_or_else(|| {
                Error::usage(format!(
                    "unknown model `{s}` (expected forest, extra, adaboost, gbm or xgb2)"
                ))
            })
    }
}

/// Features examined at each split.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    All,
    Count(usize),
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, n_features: usize) -> Result<usize> {
        let k = match self {
            MaxFeatures::All => n_features,
            MaxFeatures::Count(k) => k,
            MaxFeatures::Fraction(f) => {
                if !(f > 0.0 && f <= 1.0) {
                    return Err(Error::usage(format!("max_features fraction {f} not in (0, 1]")));
                }
                ((f * n_features as f64).round() as usize).max(1)
            }
        };
        if k == 0 || k > n_features {
            return Err(Error::usage(format!(
                "max_features {k} not in 1..={n_features}"
            )));
        }
        Ok(k)
    }
}

/// Per-sample loss used by AdaBoost.R2 reweighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdaLoss {
    Linear,
    Square,
    Exponential,
}

impl AdaLoss {
    /// Loss of an absolute error already normalized by the maximum error.
    pub fn apply(self, e: f64) -> f64 {
        match self {
            AdaLoss::Linear => e,
            AdaLoss::Square => e * e,
            AdaLoss::Exponential => 1.0 - (-e).exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperParams {
    pub n_estimators: usize,
    /// `None` grows until leaves are pure or too small to split.
    pub max_depth: Option<usize>,
    pub min_samples_leaf: usize,
    pub max_features: MaxFeatures,
    pub learning_rate: f64,
    pub loss: AdaLoss,
    pub lambda: f64,
    pub gamma: f64,
    pub bootstrap: bool,
    pub seed: u64,
}

impl HyperParams {
    pub fn defaults_for(kind: ModelKind) -> Self {
        let base = HyperParams {
            n_estimators: 100,
            max_depth: None,
            min_samples_leaf: 1,
            max_features: MaxFeatures::All,
            learning_rate: 0.1,
            loss: AdaLoss::Linear,
            lambda: 1.0,
            gamma: 0.0,
            bootstrap: false,
            seed: 0,
        };
        match kind {
            ModelKind::RandomForest => HyperParams {
                bootstrap: true,
                ..base
            },
            ModelKind::ExtraTrees => base,
            ModelKind::AdaboostR2 => HyperParams {
                max_depth: Some(3),
                learning_rate: 1.0,
                ..base
            },
            ModelKind::GradientBoost | ModelKind::SecondOrderBoost => HyperParams {
                max_depth: Some(3),
                ..base
            },
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::usage("n_estimators must be at least 1"));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::usage("min_samples_leaf must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate <= 1.0) {
            return Err(Error::usage(format!(
                "learning_rate {} not in (0, 1]",
                self.learning_rate
            )));
        }
        if !(self.lambda >= 0.0 && self.gamma >= 0.0) {
            return Err(Error::usage("lambda and gamma must be nonnegative"));
        }
        self.max_features.resolve(n_features)?;
        Ok(())
    }
}

/// ½(ŷ − y)², the loss both boosters descend.
#[derive(Debug, Clone, Copy, Default)]
pub struct SquaredLoss;

impl SquaredLoss {
    pub fn loss(&self, y: f64, pred: f64) -> f64 {
        0.5 * (pred - y) * (pred - y)
    }

    /// ∂loss/∂ŷ
    pub fn gradient(&self, y: f64, pred: f64) -> f64 {
        pred - y
    }

    /// ∂²loss/∂ŷ²
    pub fn hessian(&self, _y: f64, _pred: f64) -> f64 {
        1.0
    }
}

use std::collections::BTreeMap;

use rand::Rng as _;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::cv::{kfold_cv, CVResult, LearnerSpec};
use crate::error::{Error, Result};
use crate::learners::{AdaLoss, HyperParams, MaxFeatures, ModelKind};
use crate::preprocess::FeatureMatrix;
use crate::rng::{domain, substream, Rng};
use crate::stats::finite_or_null;

/// Sampling distribution of one hyperparameter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Distribution {
    /// Uniform over the integers `low..=high`.
    IntRange { low: i64, high: i64 },
    Uniform { low: f64, high: f64 },
    LogUniform { low: f64, high: f64 },
    /// Uniform over the listed values, written as text (`"none"` for an
    /// unlimited depth).
    Choice { values: Vec<String> },
}

#[derive(Debug, Clone, PartialEq)]
enum Draw {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Distribution {
    pub fn validate(&self, name: &str) -> Result<()> {
        let ok = match self {
            Distribution::IntRange { low, high } => low <= high,
            Distribution::Uniform { low, high } => low.is_finite() && high.is_finite() && low <= high,
            Distribution::LogUniform { low, high } => *low > 0.0 && high.is_finite() && low <= high,
            Distribution::Choice { values } => !values.is_empty(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::usage(format!("invalid search distribution for `{name}`")))
        }
    }

    fn sample(&self, rng: &mut Rng) -> Draw {
        match self {
            Distribution::IntRange { low, high } => Draw::Int(rng.random_range(*low..=*high)),
            Distribution::Uniform { low, high } => {
                Draw::Real(if low == high { *low } else { rng.random_range(*low..*high) })
            }
            Distribution::LogUniform { low, high } => {
                let (a, b) = (low.ln(), high.ln());
                Draw::Real(if a == b { *low } else { rng.random_range(a..b).exp() })
            }
            Distribution::Choice { values } => Draw::Text(values[rng.random_range(0..values.len())].clone()),
        }
    }
}

/// Parameter name → distribution. Names are `HyperParams` field names.
pub type SearchSpace = BTreeMap<String, Distribution>;

fn as_count(name: &str, d: &Draw) -> Result<usize> {
    let v = match d {
        Draw::Int(v) => *v,
        Draw::Text(s) => s
            .parse()
            .map_err(|_| Error::usage(format!("`{name}` choice `{s}` is not an integer")))?,
        Draw::Real(_) => return Err(Error::usage(format!("`{name}` needs an integer distribution"))),
    };
    usize::try_from(v).map_err(|_| Error::usage(format!("`{name}` draw {v} is negative")))
}

fn as_real(name: &str, d: &Draw) -> Result<f64> {
    match d {
        Draw::Real(v) => Ok(*v),
        Draw::Int(v) => Ok(*v as f64),
        Draw::Text(s) => s
            .parse()
            .map_err(|_| Error::usage(format!("`{name}` choice `{s}` is not a number"))),
    }
}

fn apply(params: &mut HyperParams, name: &str, d: &Draw) -> Result<()> {
    match name {
        "n_estimators" => params.n_estimators = as_count(name, d)?,
        "min_samples_leaf" => params.min_samples_leaf = as_count(name, d)?,
        "max_depth" => {
            params.max_depth = match d {
                Draw::Text(s) if s == "none" => None,
                _ => Some(as_count(name, d)?),
            }
        }
        "max_features" => {
            params.max_features = match d {
                Draw::Int(k) => MaxFeatures::Count(as_count(name, &Draw::Int(*k))?),
                Draw::Real(f) => MaxFeatures::Fraction(*f),
                Draw::Text(s) if s == "all" => MaxFeatures::All,
                Draw::Text(_) => MaxFeatures::Fraction(as_real(name, d)?),
            }
        }
        "learning_rate" => params.learning_rate = as_real(name, d)?,
        "lambda" => params.lambda = as_real(name, d)?,
        "gamma" => params.gamma = as_real(name, d)?,
        "loss" => {
            params.loss = match d {
                Draw::Text(s) if s == "linear" => AdaLoss::Linear,
                Draw::Text(s) if s == "square" => AdaLoss::Square,
                Draw::Text(s) if s == "exponential" => AdaLoss::Exponential,
                _ => return Err(Error::usage("`loss` must be linear, square or exponential")),
            }
        }
        "bootstrap" => {
            params.bootstrap = match d {
                Draw::Text(s) if s == "true" => true,
                Draw::Text(s) if s == "false" => false,
                _ => return Err(Error::usage("`bootstrap` choices must be true or false")),
            }
        }
        _ => return Err(Error::usage(format!("unknown hyperparameter `{name}` in search space"))),
    }
    Ok(())
}

fn choice(values: &[&str]) -> Distribution {
    Distribution::Choice {
        values: values.iter().map(|s| s.to_string()).collect(),
    }
}

/// Search space used when the run configuration names none.
pub fn default_space(kind: ModelKind) -> SearchSpace {
    let mut s = SearchSpace::new();
    match kind {
        ModelKind::RandomForest | ModelKind::ExtraTrees => {
            s.insert("n_estimators".into(), Distribution::IntRange { low: 100, high: 300 });
            s.insert("max_depth".into(), choice(&["none", "8", "12", "16"]));
            s.insert("min_samples_leaf".into(), Distribution::IntRange { low: 1, high: 4 });
            s.insert("max_features".into(), Distribution::Uniform { low: 0.5, high: 1.0 });
        }
        ModelKind::AdaboostR2 => {
            s.insert("n_estimators".into(), Distribution::IntRange { low: 25, high: 150 });
            s.insert("max_depth".into(), Distribution::IntRange { low: 3, high: 8 });
            s.insert("learning_rate".into(), Distribution::LogUniform { low: 0.1, high: 1.0 });
            s.insert("loss".into(), choice(&["linear", "square", "exponential"]));
        }
        ModelKind::GradientBoost | ModelKind::SecondOrderBoost => {
            s.insert("n_estimators".into(), Distribution::IntRange { low: 100, high: 400 });
            s.insert("max_depth".into(), Distribution::IntRange { low: 2, high: 5 });
            s.insert("learning_rate".into(), Distribution::LogUniform { low: 0.03, high: 0.3 });
            s.insert("min_samples_leaf".into(), Distribution::IntRange { low: 1, high: 5 });
            if kind == ModelKind::SecondOrderBoost {
                s.insert("lambda".into(), Distribution::LogUniform { low: 0.1, high: 10.0 });
                s.insert("gamma".into(), Distribution::Uniform { low: 0.0, high: 1.0 });
            }
        }
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub params: HyperParams,
    /// Mean CV R²; negative infinity (written `null`) when the trial failed.
    #[serde(with = "finite_or_null")]
    pub score: f64,
    pub cv: Option<CVResult>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub kind: ModelKind,
    pub seed: u64,
    pub trials: Vec<Trial>,
    pub best_index: usize,
}

impl SearchResult {
    pub fn best(&self) -> &Trial {
        &self.trials[self.best_index]
    }
}

/// Draws `n_trials` configurations around `base` and scores each by k-fold
/// CV on `data`. Failed trials score −∞ and the search continues.
pub fn random_search(
    kind: ModelKind,
    base: &HyperParams,
    space: &SearchSpace,
    n_trials: usize,
    data: &FeatureMatrix,
    cv_k: usize,
    seed: u64,
) -> Result<SearchResult> {
    if n_trials == 0 {
        return Err(Error::usage("random search needs at least one trial"));
    }
    if space.is_empty() {
        return Err(Error::usage("search space is empty"));
    }
    for (name, d) in space {
        d.validate(name)?;
    }
    let drawn: Vec<Result<HyperParams>> = (0..n_trials)
        .map(|t| {
            let mut rng = substream(seed, domain::SEARCH, t as u64);
            let mut p = base.clone();
            for (name, d) in space {
                apply(&mut p, name, &d.sample(&mut rng))?;
            }
            Ok(p)
        })
        .collect();
    // an unusable space is a configuration error, not a failed trial
    let drawn = drawn.into_iter().collect::<Result<Vec<_>>>()?;

    let trials: Vec<Trial> = drawn
        .into_par_iter()
        .enumerate()
        .map(|(index, params)| {
            let spec = LearnerSpec::Model { kind, params: params.clone() };
            match kfold_cv(&spec, data, cv_k, seed) {
                Ok(cv) => Trial {
                    index,
                    params,
                    score: cv.mean,
                    cv: Some(cv),
                    error: None,
                },
                Err(e) => Trial {
                    index,
                    params,
                    score: f64::NEG_INFINITY,
                    cv: None,
                    error: Some(e.to_string()),
                },
            }
        })
        .collect();
    let mut best_index = 0;
    for t in &trials {
        if t.score > trials[best_index].score {
            best_index = t.index;
        }
    }
    if trials[best_index].score == f64::NEG_INFINITY {
        return Err(Error::Numeric(format!(
            "every search trial failed; first error: {}",
            trials[0].error.as_deref().unwrap_or("unknown")
        )));
    }
    Ok(SearchResult {
        kind,
        seed,
        trials,
        best_index,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn step(n: usize) -> FeatureMatrix {
        let rows = (0..n)
            .map(|i| vec![if i < n / 2 { i as f64 } else { i as f64 + 100.0 }, (i * 7 % 5) as f64])
            .collect();
        let y = (0..n).map(|i| if i < n / 2 { 0.0 } else { 4.0 }).collect();
        FeatureMatrix::new(vec!["a".into(), "b".into()], rows, y).unwrap()
    }

    #[test]
    fn single_trial_is_best() {
        let d = step(30);
        let base = HyperParams { n_estimators: 5, ..HyperParams::defaults_for(ModelKind::RandomForest) };
        let space = SearchSpace::from([("max_depth".into(), choice(&["2", "none"]))]);
        let r = random_search(ModelKind::RandomForest, &base, &space, 1, &d, 3, 4).unwrap();
        assert_eq!(r.trials.len(), 1);
        assert_eq!(r.best_index, 0);
    }

    #[test]
    fn perfect_configuration_wins() {
        let d = step(40);
        let base = HyperParams { n_estimators: 3, learning_rate: 1.0, ..HyperParams::defaults_for(ModelKind::GradientBoost) };
        let space = SearchSpace::from([("max_depth".into(), Distribution::IntRange { low: 0, high: 1 })]);
        let r = random_search(ModelKind::GradientBoost, &base, &space, 10, &d, 4, 2).unwrap();
        assert!((r.best().score - 1.0).abs() < 1e-12);
        assert_eq!(r.best().params.max_depth, Some(1));
    }

    #[test]
    fn deterministic_and_failures_recorded() {
        let d = step(30);
        let base = HyperParams { n_estimators: 4, ..HyperParams::defaults_for(ModelKind::ExtraTrees) };
        // max_features 3 exceeds the two columns: those trials fail
        let space = SearchSpace::from([("max_features".into(), Distribution::IntRange { low: 1, high: 3 })]);
        let a = random_search(ModelKind::ExtraTrees, &base, &space, 12, &d, 3, 8).unwrap();
        let b = random_search(ModelKind::ExtraTrees, &base, &space, 12, &d, 3, 8).unwrap();
        assert_eq!(a, b);
        let failed: Vec<&Trial> = a.trials.iter().filter(|t| t.error.is_some()).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|t| t.score == f64::NEG_INFINITY));
        let json = serde_json::to_string(&a).unwrap();
        let back: SearchResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, a);
        let max = a.trials.iter().map(|t| t.score).fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(a.best().score, max);
    }

    #[test]
    fn unknown_parameter_rejected() {
        let d = step(30);
        let base = HyperParams::defaults_for(ModelKind::ExtraTrees);
        let space = SearchSpace::from([("depth".into(), Distribution::IntRange { low: 1, high: 3 })]);
        assert!(matches!(
            random_search(ModelKind::ExtraTrees, &base, &space, 2, &d, 3, 0),
            Err(Error::Usage(_))
        ));
    }
}

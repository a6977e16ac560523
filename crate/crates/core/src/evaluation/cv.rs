use log::warn;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::r_squared;
use crate::error::{Error, Result};
use crate::learners::{fit, Ensemble, HyperParams, ModelKind};
use crate::preprocess::FeatureMatrix;
use crate::rng::{domain, substream};

/// What to train inside cross-validation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerSpec {
    Model { kind: ModelKind, params: HyperParams },
    /// Predicts the training mean everywhere.
    MeanBaseline,
}

pub enum FittedLearner {
    Model(Ensemble),
    Mean(f64),
}

impl LearnerSpec {
    pub fn fit(&self, data: &FeatureMatrix) -> Result<FittedLearner> {
        match self {
            LearnerSpec::Model { kind, params } => Ok(FittedLearner::Model(fit(*kind, data, params)?)),
            LearnerSpec::MeanBaseline => {
                if data.n_rows() == 0 {
                    return Err(Error::usage("cannot fit on an empty matrix"));
                }
                Ok(FittedLearner::Mean(data.target.iter().sum::<f64>() / data.n_rows() as f64))
            }
        }
    }
}

impl FittedLearner {
    pub fn predict(&self, data: &FeatureMatrix) -> Result<Vec<f64>> {
        match self {
            FittedLearner::Model(m) => m.predict(data),
            FittedLearner::Mean(c) => Ok(vec![*c; data.n_rows()]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVResult {
    pub k: usize,
    pub seed: u64,
    /// Fold number of every row.
    pub assignment: Vec<usize>,
    /// Held-out R² per fold; `None` when the fold's targets are constant.
    pub fold_scores: Vec<Option<f64>>,
    pub mean: f64,
    /// Population standard deviation of the scored folds.
    pub std: f64,
}

/// Seeded shuffle into `k` folds whose sizes differ by at most one.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<usize>> {
    if k < 2 {
        return Err(Error::usage(format!("k-fold needs k >= 2 (got {k})")));
    }
    if n < k {
        return Err(Error::usage(format!("{n} rows cannot fill {k} folds")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut substream(seed, domain::FOLDS, 0));
    let mut assignment = vec![0; n];
    for (pos, &row) in perm.iter().enumerate() {
        assignment[row] = pos % k;
    }
    Ok(assignment)
}

pub fn kfold_cv(learner: &LearnerSpec, data: &FeatureMatrix, k: usize, seed: u64) -> Result<CVResult> {
    let assignment = fold_assignment(data.n_rows(), k, seed)?;
    let fold_scores = (0..k)
        .into_par_iter()
        .map(|fold| {
            let (held, rest): (Vec<usize>, Vec<usize>) =
                (0..data.n_rows()).partition(|&i| assignment[i] == fold);
            let test = data.subset(&held);
            let model = learner.fit(&data.subset(&rest))?;
            let pred = model.predict(&test)?;
            match r_squared(&test.target, &pred, 0) {
                Ok((r2, _)) => Ok(Some(r2)),
                Err(Error::Degenerate(_)) => {
                    warn!("fold {fold} has constant targets; excluded from the CV mean");
                    Ok(None)
                }
                Err(e) => Err(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let scored: Vec<f64> = fold_scores.iter().flatten().copied().collect();
    if scored.is_empty() {
        return Err(Error::Degenerate("every fold has constant targets".into()));
    }
    let mean = scored.iter().sum::<f64>() / scored.len() as f64;
    let std = (scored.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / scored.len() as f64).sqrt();
    Ok(CVResult {
        k,
        seed,
        assignment,
        fold_scores,
        mean,
        std,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn linear(n: usize) -> FeatureMatrix {
        let rows = (0..n).map(|i| vec![i as f64]).collect();
        let y = (0..n).map(|i| (i % 4) as f64).collect();
        FeatureMatrix::new(vec!["x".into()], rows, y).unwrap()
    }

    #[test]
    fn exact_fit_learner_scores_one() {
        // a wide gap at the step: any midpoint a training fold can pick separates the halves
        let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![if i < 20 { i as f64 } else { i as f64 + 100.0 }]).collect();
        let y: Vec<f64> = (0..40).map(|i| if i < 20 { 1.0 } else { 5.0 }).collect();
        let d = FeatureMatrix::new(vec!["x".into()], rows, y).unwrap();
        let spec = LearnerSpec::Model {
            kind: ModelKind::GradientBoost,
            params: HyperParams {
                n_estimators: 1,
                learning_rate: 1.0,
                max_depth: Some(1),
                ..HyperParams::defaults_for(ModelKind::GradientBoost)
            },
        };
        let cv = kfold_cv(&spec, &d, 5, 0).unwrap();
        for s in &cv.fold_scores {
            assert!((s.unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic() {
        let d = linear(53);
        let a = kfold_cv(&LearnerSpec::MeanBaseline, &d, 5, 9).unwrap();
        let b = kfold_cv(&LearnerSpec::MeanBaseline, &d, 5, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn mean_baseline_near_zero() {
        let d = linear(400);
        let cv = kfold_cv(&LearnerSpec::MeanBaseline, &d, 5, 1).unwrap();
        assert!(cv.mean <= 0.0 && cv.mean > -0.1, "{}", cv.mean);
    }

    #[test]
    fn constant_fold_flagged() {
        let rows = (0..4).map(|i| vec![i as f64]).collect();
        let d = FeatureMatrix::new(vec!["x".into()], rows, vec![3.0; 4]).unwrap();
        let err = kfold_cv(&LearnerSpec::MeanBaseline, &d, 2, 0).unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn bad_k() {
        assert!(fold_assignment(10, 1, 0).is_err());
        assert!(fold_assignment(3, 5, 0).is_err());
    }

    proptest! {
        #[test]
        fn folds_partition_rows(n in 2usize..300, k in 2usize..12, seed: u64) {
            prop_assume!(n >= k);
            let a = fold_assignment(n, k, seed).unwrap();
            let mut sizes = vec![0usize; k];
            for &f in &a {
                sizes[f] += 1;
            }
            prop_assert_eq!(sizes.iter().sum::<usize>(), n);
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}

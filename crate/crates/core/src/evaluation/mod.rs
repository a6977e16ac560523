//! Regression metrics, seeded k-fold cross-validation and random
//! hyperparameter search.

mod cv;
mod search;

pub use cv::{fold_assignment, kfold_cv, CVResult, FittedLearner, LearnerSpec};
pub use search::{default_space, random_search, Distribution, SearchResult, SearchSpace, Trial};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::Ensemble;
use crate::preprocess::FeatureMatrix;

/// Predictor count used for adjusted R² unless configured otherwise.
pub const DEFAULT_PREDICTORS: usize = 10;

fn check_pair(actual: &[f64], predicted: &[f64]) -> Result<()> {
    if actual.len() != predicted.len() {
        return Err(Error::usage(format!(
            "{} actual values but {} predictions",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::usage("metrics need at least one observation"));
    }
    if actual.iter().chain(predicted).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("metrics input holds a non-finite value".into()));
    }
    Ok(())
}

/// (MAE, MSE, RMSE).
pub fn error_metrics(actual: &[f64], predicted: &[f64]) -> Result<(f64, f64, f64)> {
    check_pair(actual, predicted)?;
    let n = actual.len() as f64;
    let (mut abs, mut sq) = (0.0, 0.0);
    for (a, p) in actual.iter().zip(predicted) {
        let e = a - p;
        abs += e.abs();
        sq += e * e;
    }
    let mse = sq / n;
    Ok((abs / n, mse, mse.sqrt()))
}

/// Adjusted R² for `n` observations and `p` predictors.
pub fn adjusted_r2(r2: f64, n: usize, p: usize) -> Result<f64> {
    if n < p + 2 {
        return Err(Error::usage(format!("adjusted R² needs n >= p + 2 (n = {n}, p = {p})")));
    }
    if p == 0 {
        return Ok(r2);
    }
    Ok(1.0 - (1.0 - r2) * (n - 1) as f64 / (n - p - 1) as f64)
}

/// (R², adjusted R²) with `p` predictors.
pub fn r_squared(actual: &[f64], predicted: &[f64], p: usize) -> Result<(f64, f64)> {
    check_pair(actual, predicted)?;
    let n = actual.len();
    if n < p + 2 {
        return Err(Error::usage(format!("R² needs n >= p + 2 (n = {n}, p = {p})")));
    }
    let mean = actual.iter().sum::<f64>() / n as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    if ss_tot == 0.0 {
        return Err(Error::Degenerate("R² undefined for constant actual values".into()));
    }
    let ss_res: f64 = actual.iter().zip(predicted).map(|(a, p)| (a - p) * (a - p)).sum();
    let r2 = 1.0 - ss_res / ss_tot;
    Ok((r2, adjusted_r2(r2, n, p)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub mae: f64,
    pub mse: f64,
    pub rmse: f64,
    pub r2: f64,
    pub adj_r2: f64,
    pub n: usize,
    pub p: usize,
}

impl MetricsReport {
    pub fn compute(actual: &[f64], predicted: &[f64], p: usize) -> Result<Self> {
        let (mae, mse, rmse) = error_metrics(actual, predicted)?;
        let (r2, adj_r2) = r_squared(actual, predicted, p)?;
        Ok(MetricsReport {
            mae,
            mse,
            rmse,
            r2,
            adj_r2,
            n: actual.len(),
            p,
        })
    }
}

pub fn evaluate_model(model: &Ensemble, test: &FeatureMatrix, p: usize) -> Result<MetricsReport> {
    if test.n_rows() == 0 {
        return Err(Error::usage("test set is empty"));
    }
    let pred = model.predict(test)?;
    MetricsReport::compute(&test.target, &pred, p)
}

/// One row of the model comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub model: String,
    pub cv_score: f64,
    pub train: MetricsReport,
    pub test: MetricsReport,
}

const TABLE_HEADER: [&str; 9] = [
    "model",
    "cv_score",
    "train_r2",
    "train_adj_r2",
    "test_r2",
    "test_adj_r2",
    "mae",
    "mse",
    "rmse",
];

fn table_cells(r: &ComparisonRow) -> Vec<String> {
    let mut cells = vec![r.model.clone()];
    cells.extend(
        [
            r.cv_score,
            r.train.r2,
            r.train.adj_r2,
            r.test.r2,
            r.test.adj_r2,
            r.test.mae,
            r.test.mse,
            r.test.rmse,
        ]
        .iter()
        .map(|v| format!("{v:.6}")),
    );
    cells
}

pub fn comparison_csv(rows: &[ComparisonRow]) -> Result<Vec<u8>> {
    let mut w = crate::io::csv_writer();
    w.write_record(TABLE_HEADER)?;
    for r in rows {
        w.write_record(table_cells(r))?;
    }
    crate::io::csv_finish(w)
}

pub fn comparison_markdown(rows: &[ComparisonRow]) -> String {
    let mut s = format!("| {} |\n", TABLE_HEADER.join(" | "));
    s.push_str(&format!("|{}\n", "---|".repeat(TABLE_HEADER.len())));
    for r in rows {
        s.push_str(&format!("| {} |\n", table_cells(r).join(" | ")));
    }
    s
}

//! Label encoding, standardization and the seeded train/test split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::dataset::{columns, ProjectRecord};
use crate::error::{Error, Result};
use crate::rng::{domain, substream};

/// Sorted vocabulary per categorical column; a category's code is its index.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderMap {
    pub columns: BTreeMap<String, Vec<String>>,
}

impl EncoderMap {
    pub fn code(&self, column: &str, value: &str) -> Option<usize> {
        self.columns
            .get(column)?
            .binary_search_by(|v| v.as_str().cmp(value))
            .ok()
    }

    pub fn decode(&self, column: &str, code: usize) -> Option<&str> {
        self.columns.get(column)?.get(code).map(String::as_str)
    }
}

/// Fits lexicographically sorted vocabularies for `categorical_columns`.
pub fn fit_encoders(records: &[ProjectRecord], categorical_columns: &[&str]) -> Result<EncoderMap> {
    let mut map = EncoderMap::default();
    for &col in categorical_columns {
        let mut vocab: Vec<String> = Vec::new();
        for r in records {
            let v = r
                .category(col)
                .ok_or_else(|| Error::usage(format!("`{col}` is not a categorical column")))?;
            vocab.push(v.to_string());
        }
        vocab.sort();
        vocab.dedup();
        map.columns.insert(col.to_string(), vocab);
    }
    Ok(map)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Full,
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub role: Role,
    pub split_seed: Option<u64>,
    pub encoders: Option<EncoderMap>,
    pub scaler: Option<ScalerParams>,
}

/// Dense numeric design matrix, row-major, with its target vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub feature_names: Vec<String>,
    pub data: Vec<f64>,
    pub target: Vec<f64>,
    pub provenance: Provenance,
}

impl FeatureMatrix {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, target: Vec<f64>) -> Result<Self> {
        let p = feature_names.len();
        if rows.len() != target.len() {
            return Err(Error::usage("row count and target length differ"));
        }
        let mut data = Vec::with_capacity(rows.len() * p);
        for (i, r) in rows.iter().enumerate() {
            if r.len() != p {
                return Err(Error::usage(format!("row {i} has {} values, expected {p}", r.len())));
            }
            if let Some(v) = r.iter().find(|v| !v.is_finite()) {
                return Err(Error::Numeric(format!("row {i} holds non-finite value {v}")));
            }
            data.extend_from_slice(r);
        }
        Ok(FeatureMatrix {
            feature_names,
            data,
            target,
            provenance: Provenance {
                role: Role::Full,
                split_seed: None,
                encoders: None,
                scaler: None,
            },
        })
    }

    pub fn n_rows(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_features();
        &self.data[i * p..(i + 1) * p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.n_features().max(1)).take(self.n_rows())
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    /// Rows at `idx`, in that order.
    pub fn subset(&self, idx: &[usize]) -> FeatureMatrix {
        let mut data = Vec::with_capacity(idx.len() * self.n_features());
        for &i in idx {
            data.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            feature_names: self.feature_names.clone(),
            data,
            target: idx.iter().map(|&i| self.target[i]).collect(),
            provenance: self.provenance.clone(),
        }
    }
}

/// Replaces categorical cells by their codes; returns the ten predictors in
/// model order plus the target.
pub fn encode(records: &[ProjectRecord], encoders: &EncoderMap) -> Result<FeatureMatrix> {
    let names: Vec<String> = columns::PREDICTORS.iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::with_capacity(records.len());
    for (i, r) in records.iter().enumerate() {
        let mut row = Vec::with_capacity(names.len());
        for &col in &columns::PREDICTORS {
            let v = match r.category(col) {
                Some(cat) => encoders.code(col, cat).ok_or_else(|| Error::UnseenCategory {
                    column: col.to_string(),
                    value: cat.to_string(),
                    row: i,
                })? as f64,
                None => r.number(col).expect("predictor is numeric"),
            };
            row.push(v);
        }
        rows.push(row);
    }
    let target = records.iter().map(|r| r.total_defects).collect();
    let mut m = FeatureMatrix::new(names, rows, target)?;
    m.provenance.encoders = Some(encoders.clone());
    Ok(m)
}

/// Per-column mean and population standard deviation of the training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub feature_names: Vec<String>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

pub fn fit_scaler(train: &FeatureMatrix) -> Result<ScalerParams> {
    let n = train.n_rows();
    if n < 2 {
        return Err(Error::usage("fit_scaler needs at least 2 rows"));
    }
    let p = train.n_features();
    let mut mean = vec![0.0; p];
    let mut std = vec![0.0; p];
    for j in 0..p {
        let col = train.column(j);
        let m = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n as f64;
        mean[j] = m;
        std[j] = var.sqrt();
    }
    Ok(ScalerParams {
        feature_names: train.feature_names.clone(),
        mean,
        std,
    })
}

impl ScalerParams {
    /// Standardizes one row in place. Zero-std columns are only centered.
    pub fn transform_row(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.std) {
            let s = if *s == 0.0 { 1.0 } else { *s };
            *v = (*v - m) / s;
        }
    }
}

pub fn scale(matrix: &FeatureMatrix, params: &ScalerParams) -> Result<FeatureMatrix> {
    if matrix.feature_names != params.feature_names {
        return Err(Error::usage(format!(
            "scaler fitted on {:?}, matrix has {:?}",
            params.feature_names, matrix.feature_names
        )));
    }
    let mut out = matrix.clone();
    let p = out.n_features().max(1);
    for row in out.data.chunks_mut(p) {
        params.transform_row(row);
    }
    out.provenance.scaler = Some(params.clone());
    Ok(out)
}

/// Row indices of a train/test partition, each ascending.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: u64,
    pub test_fraction: f64,
}

/// Test size is ⌈fraction · n⌉ (tolerant to the binary representation of
/// the fraction, so 0.3 · 10 gives 3).
pub fn test_size(n: usize, test_fraction: f64) -> usize {
    ((test_fraction * n as f64) - 1e-9).ceil().max(0.0) as usize
}

pub fn split_indices(n: usize, test_fraction: f64, seed: u64) -> Result<Split> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::usage(format!("test fraction {test_fraction} not in (0, 1)")));
    }
    if n < 4 {
        return Err(Error::usage(format!("{n} rows are too few to split")));
    }
    let mut perm: Vec<usize> = (0..n).collect();
    perm.shuffle(&mut substream(seed, domain::SPLIT, 0));
    let k = test_size(n, test_fraction).clamp(1, n - 1);
    let mut test = perm[..k].to_vec();
    let mut train = perm[k..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Ok(Split {
        train,
        test,
        seed,
        test_fraction,
    })
}

/// Seeded shuffle-split of `rows` into (train, test).
pub fn train_test_split<T: Clone>(rows: &[T], test_fraction: f64, seed: u64) -> Result<(Vec<T>, Vec<T>)> {
    let s = split_indices(rows.len(), test_fraction, seed)?;
    Ok((
        s.train.iter().map(|&i| rows[i].clone()).collect(),
        s.test.iter().map(|&i| rows[i].clone()).collect(),
    ))
}

/// Encoded, split and scaled matrices ready for learning.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub encoders: EncoderMap,
    pub scaler: ScalerParams,
    pub split: Split,
    pub train: FeatureMatrix,
    pub test: FeatureMatrix,
}

/// Encoders fitted on all rows, split, scaler fitted on the training rows.
pub fn prepare(records: &[ProjectRecord], test_fraction: f64, seed: u64) -> Result<Prepared> {
    let encoders = fit_encoders(records, &columns::CATEGORICAL)?;
    let full = encode(records, &encoders)?;
    let split = split_indices(full.n_rows(), test_fraction, seed)?;
    let mut train = full.subset(&split.train);
    let mut test = full.subset(&split.test);
    let scaler = fit_scaler(&train)?;
    train = scale(&train, &scaler)?;
    test = scale(&test, &scaler)?;
    train.provenance.role = Role::Train;
    test.provenance.role = Role::Test;
    train.provenance.split_seed = Some(seed);
    test.provenance.split_seed = Some(seed);
    Ok(Prepared {
        encoders,
        scaler,
        split,
        train,
        test,
    })
}

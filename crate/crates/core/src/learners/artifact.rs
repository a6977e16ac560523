use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Ensemble, HyperParams, ModelKind, RegressionTree};
use crate::dataset::ProjectRecord;
use crate::error::{Error, Result};
use crate::io;
use crate::preprocess::{encode, scale, EncoderMap, FeatureMatrix, ScalerParams};

pub const FORMAT_VERSION: u32 = 1;

/// Self-contained model file: the ensemble plus everything needed to turn
/// cleaned records into its inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub format_version: u32,
    pub kind: ModelKind,
    pub hyperparameters: HyperParams,
    pub base_score: f64,
    pub learning_rate: f64,
    pub exact_fit: bool,
    pub feature_names: Vec<String>,
    pub trees: Vec<RegressionTree>,
    pub tree_weights: Vec<f64>,
    pub encoders: EncoderMap,
    pub scaler: ScalerParams,
    pub seed: u64,
    pub split_seed: u64,
    pub test_fraction: f64,
}

impl ModelArtifact {
    pub fn new(model: &Ensemble, encoders: &EncoderMap, scaler: &ScalerParams, split_seed: u64, test_fraction: f64) -> Self {
        ModelArtifact {
            format_version: FORMAT_VERSION,
            kind: model.kind,
            hyperparameters: model.params.clone(),
            base_score: model.base_score,
            learning_rate: model.learning_rate,
            exact_fit: model.exact_fit,
            feature_names: model.feature_names.clone(),
            trees: model.trees.clone(),
            tree_weights: model.tree_weights.clone(),
            encoders: encoders.clone(),
            scaler: scaler.clone(),
            seed: model.params.seed,
            split_seed,
            test_fraction,
        }
    }

    /// Rebuilds the ensemble, checking it for structural damage.
    pub fn ensemble(&self) -> Result<Ensemble> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::CorruptModel(format!(
                "format version {} (expected {FORMAT_VERSION})",
                self.format_version
            )));
        }
        if self.scaler.feature_names != self.feature_names {
            return Err(Error::CorruptModel("scaler and model feature names differ".into()));
        }
        let model = Ensemble {
            kind: self.kind,
            params: self.hyperparameters.clone(),
            feature_names: self.feature_names.clone(),
            trees: self.trees.clone(),
            tree_weights: self.tree_weights.clone(),
            base_score: self.base_score,
            learning_rate: self.learning_rate,
            exact_fit: self.exact_fit,
            training_mse: Vec::new(),
        };
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let a: ModelArtifact =
            serde_json::from_slice(bytes).map_err(|e| Error::CorruptModel(e.to_string()))?;
        a.ensemble()?;
        Ok(a)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_atomic(path, &self.to_json()?).map_err(|e| e.in_file(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = io::read_bytes(path)?;
        Self::from_json(&bytes).map_err(|e| e.in_file(path))
    }

    /// Encodes and scales cleaned records into the model's input space.
    pub fn features(&self, records: &[ProjectRecord]) -> Result<FeatureMatrix> {
        scale(&encode(records, &self.encoders)?, &self.scaler)
    }

    pub fn predict_records(&self, records: &[ProjectRecord]) -> Result<Vec<f64>> {
        self.ensemble()?.predict(&self.features(records)?)
    }
}

//! Synthetic data generation, run configuration, end-to-end pipeline
//! stages and report emission.

mod generator;
mod pipeline;
mod report;

pub use generator::{
    generate_dataset, AnalyticCorrelations, ExpectedCleaning, Generated, GeneratorConfig, GroundTruth, Planted,
    QualityMix,
};
pub use pipeline::{
    clean_stage, correlate_stage, evaluate_stage, explain_stage, load_cleaned, model_path, run_pipeline,
    train_stage, CorrelationArtifact, EvaluationArtifact, PredictorCorrelation, RunLog, CLEANED_CSV,
    CLEANING_REPORT, COMPARISON_JSON, CORRELATION_JSON, IMPORTANCE_JSON, RUN_LOG, SHAP_SUMMARY_JSON,
};
pub use report::{emit_report, frequency_table, ReportBundle, REPORT_DIR};

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::dataset::CleaningConfig;
use crate::error::{Error, Result};
use crate::evaluation::{default_space, SearchSpace, DEFAULT_PREDICTORS};
use crate::learners::ModelKind;

/// Everything a pipeline run depends on. Read from TOML; echoed into the
/// run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    /// Root seed for the split, folds, search and models.
    pub seed: u64,
    /// Ages are measured up to this day (YYYY-MM-DD).
    pub reference_date: String,
    pub test_fraction: f64,
    pub cv_folds: usize,
    /// Random-search trials per model; 0 trains with default hyperparameters.
    pub trials: usize,
    /// Predictor count for adjusted R².
    pub predictors: usize,
    /// Test rows to explain with SHAP; 0 means all of them.
    pub explain_rows: usize,
    /// Short model names, in table order.
    pub models: Vec<String>,
    pub cleaning: CleaningConfig,
    /// Search space overrides keyed by short model name.
    pub search: BTreeMap<String, SearchSpace>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            input: None,
            output: None,
            seed: 42,
            reference_date: "2022-01-01".to_string(),
            test_fraction: 0.3,
            cv_folds: 5,
            trials: 25,
            predictors: DEFAULT_PREDICTORS,
            explain_rows: 0,
            models: ModelKind::ALL.iter().map(|k| k.short_name().to_string()).collect(),
            cleaning: CleaningConfig::default(),
            search: BTreeMap::new(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = crate::io::read_bytes(path)?;
        let text = String::from_utf8(bytes).map_err(|_| Error::Config("config is not UTF-8".into()).in_file(path))?;
        Self::from_toml(&text).map_err(|e| e.in_file(path))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return Err(Error::Config(format!("test_fraction {} not in (0, 1)", self.test_fraction)));
        }
        if self.cv_folds < 2 {
            return Err(Error::Config(format!("cv_folds must be at least 2 (got {})", self.cv_folds)));
        }
        self.reference()?;
        self.cleaning.validate()?;
        if self.models.is_empty() {
            return Err(Error::Config("model roster is empty".into()));
        }
        let kinds = self.kinds()?;
        for (i, k) in kinds.iter().enumerate() {
            if kinds[..i].contains(k) {
                return Err(Error::Config(format!("model `{k}` listed twice")));
            }
        }
        for (name, space) in &self.search {
            name.parse::<ModelKind>().map_err(|_| Error::Config(format!("search space for unknown model `{name}`")))?;
            for (param, d) in space {
                d.validate(param).map_err(|_| Error::Config(format!("invalid search distribution for `{param}` of `{name}`")))?;
            }
        }
        Ok(())
    }

    pub fn reference(&self) -> Result<NaiveDate> {
        NaiveDate::parse_from_str(&self.reference_date, "%Y-%m-%d")
            .map_err(|_| Error::Config(format!("reference_date `{}` is not YYYY-MM-DD", self.reference_date)))
    }

    pub fn kinds(&self) -> Result<Vec<ModelKind>> {
        self.models
            .iter()
            .map(|m| m.parse::<ModelKind>().map_err(|_| Error::Config(format!("unknown model `{m}` in roster"))))
            .collect()
    }

    /// The configured space for `kind`, or its default.
    pub fn space_for(&self, kind: ModelKind) -> SearchSpace {
        self.search
            .get(kind.short_name())
            .cloned()
            .unwrap_or_else(|| default_space(kind))
    }
}

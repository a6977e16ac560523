use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::RunConfig;
use crate::dataset::{columns, parse_csv_with, read_records_csv, run_cleaning_pipeline, write_records_csv, ProjectRecord};
use crate::error::{Error, Result};
use crate::evaluation::{kfold_cv, random_search, CVResult, ComparisonRow, LearnerSpec, MetricsReport};
use crate::explain::{explain_rows, impurity_importance, importance_markdown, shap_csv, shap_markdown, summarize};
use crate::explain::{Importance, ShapSummary};
use crate::io;
use crate::learners::{fit, HyperParams, ModelArtifact, ModelKind};
use crate::preprocess::{encode, prepare, split_indices, FeatureMatrix};
use crate::stats::{corr_matrix, pearson_test, CorrelationMatrix, CorrelationResult};

pub const CLEANED_CSV: &str = "cleaned.csv";
pub const CLEANING_REPORT: &str = "cleaning_report.json";
pub const CORRELATION_JSON: &str = "correlation.json";
pub const COMPARISON_JSON: &str = "evaluation/comparison.json";
pub const IMPORTANCE_JSON: &str = "explain/importance.json";
pub const SHAP_SUMMARY_JSON: &str = "explain/shap_summary.json";
pub const RUN_LOG: &str = "run_log.json";

pub fn model_path(out: &Path, kind: ModelKind) -> PathBuf {
    out.join("models").join(format!("{}.json", kind.short_name()))
}

/// Seeds, configuration and per-stage facts of a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub config: RunConfig,
    pub stages: BTreeMap<String, Value>,
}

fn log_stage(out: &Path, config: &RunConfig, stage: &str, entry: Value) -> Result<()> {
    let path = out.join(RUN_LOG);
    let mut log = match io::read_json::<RunLog>(&path) {
        Ok(l) => l,
        Err(Error::MissingArtifact(_)) => RunLog { config: config.clone(), stages: BTreeMap::new() },
        Err(e) => return Err(e),
    };
    log.config = config.clone();
    log.stages.insert(stage.to_string(), entry);
    io::write_json(&path, &log)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Reads a raw export, cleans it and writes the cleaned CSV and report.
pub fn clean_stage(input: &Path, out: &Path, config: &RunConfig) -> Result<Vec<ProjectRecord>> {
    let file = File::open(input).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::MissingArtifact(input.to_path_buf())
        } else {
            Error::from(e).in_file(input)
        }
    })?;
    let raw = parse_csv_with(file, &[columns::TOTAL_DEFECTS], &config.cleaning.missing_tokens).map_err(|e| e.in_file(input))?;
    let (records, report) = run_cleaning_pipeline(raw, &config.cleaning, config.reference()?)?;
    if records.is_empty() {
        return Err(Error::Degenerate("cleaning removed every record".into()));
    }
    io::write_atomic(&out.join(CLEANED_CSV), &write_records_csv(&records)?)?;
    io::write_json(&out.join(CLEANING_REPORT), &report)?;
    info!("clean: {} records kept", records.len());
    log_stage(
        out,
        config,
        "clean",
        json!({ "input": file_name(input), "records": records.len(), "reference_date": config.reference_date }),
    )?;
    Ok(records)
}

pub fn load_cleaned(path: &Path) -> Result<Vec<ProjectRecord>> {
    let bytes = io::read_bytes(path)?;
    read_records_csv(bytes.as_slice()).map_err(|e| e.in_file(path))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictorCorrelation {
    pub column: String,
    #[serde(flatten)]
    pub test: CorrelationResult,
}

/// Numeric predictors against the target, plus their pairwise matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationArtifact {
    pub target: String,
    pub n: usize,
    pub predictors: Vec<PredictorCorrelation>,
    pub matrix: CorrelationMatrix,
}

pub fn correlate_stage(records: &[ProjectRecord], out: &Path, config: &RunConfig) -> Result<CorrelationArtifact> {
    let column = |c: &str| records.iter().map(|r| r.number(c).unwrap()).collect::<Vec<f64>>();
    let y = column(columns::TOTAL_DEFECTS);
    let mut predictors = Vec::new();
    for c in columns::NUMERIC {
        predictors.push(PredictorCorrelation { column: c.to_string(), test: pearson_test(&column(c), &y)? });
    }
    let names: Vec<String> = columns::NUMERIC.iter().map(|s| s.to_string()).collect();
    let data: Vec<Vec<f64>> = columns::NUMERIC.iter().map(|c| column(c)).collect();
    let artifact = CorrelationArtifact {
        target: columns::TOTAL_DEFECTS.to_string(),
        n: records.len(),
        predictors,
        matrix: corr_matrix(&names, &data)?,
    };
    io::write_json(&out.join(CORRELATION_JSON), &artifact)?;
    log_stage(out, config, "correlate", json!({ "records": records.len() }))?;
    Ok(artifact)
}

/// Searches, fits and saves every model in `kinds`.
pub fn train_stage(records: &[ProjectRecord], out: &Path, config: &RunConfig, kinds: &[ModelKind]) -> Result<Vec<ModelArtifact>> {
    let prep = prepare(records, config.test_fraction, config.seed)?;
    let mut artifacts = Vec::new();
    let mut entries = BTreeMap::new();
    for &kind in kinds {
        let base = HyperParams::defaults_for(kind).with_seed(config.seed);
        let (params, best) = if config.trials > 0 {
            let space = config.space_for(kind);
            let search = random_search(kind, &base, &space, config.trials, &prep.train, config.cv_folds, config.seed)?;
            let best = search.best();
            if !best.score.is_finite() {
                return Err(Error::Numeric(format!(
                    "every search trial failed for {kind}: {}",
                    best.error.as_deref().unwrap_or("no score")
                )));
            }
            let picked = (best.params.clone(), Some((best.index, best.score)));
            io::write_json(&out.join(format!("evaluation/search_{}.json", kind.short_name())), &search)?;
            picked
        } else {
            (base, None)
        };
        let model = fit(kind, &prep.train, &params)?;
        let artifact = ModelArtifact::new(&model, &prep.encoders, &prep.scaler, config.seed, config.test_fraction);
        artifact.save(&model_path(out, kind))?;
        info!("train: {kind} fitted with {} trees", model.trees.len());
        entries.insert(
            kind.short_name().to_string(),
            json!({
                "seed": params.seed,
                "trees": model.trees.len(),
                "best_trial": best.map(|b| b.0),
                "best_cv_score": best.map(|b| b.1),
            }),
        );
        artifacts.push(artifact);
    }
    log_stage(
        out,
        config,
        "train",
        json!({
            "split_seed": config.seed,
            "train_rows": prep.split.train.len(),
            "test_rows": prep.split.test.len(),
            "trials": config.trials,
            "cv_folds": config.cv_folds,
            "models": entries,
        }),
    )?;
    Ok(artifacts)
}

/// Train and test rows of `records` under the artifact's split.
fn split_records(artifact: &ModelArtifact, records: &[ProjectRecord]) -> Result<(Vec<ProjectRecord>, Vec<ProjectRecord>)> {
    let s = split_indices(records.len(), artifact.test_fraction, artifact.split_seed)?;
    let pick = |idx: &[usize]| idx.iter().map(|&i| records[i].clone()).collect::<Vec<_>>();
    Ok((pick(&s.train), pick(&s.test)))
}

/// A model file loaded and checked, with its path in the error context.
fn load_model(path: &Path) -> Result<(ModelArtifact, crate::learners::Ensemble)> {
    let artifact = ModelArtifact::load(path)?;
    let model = artifact.ensemble().map_err(|e| e.in_file(path))?;
    Ok((artifact, model))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationArtifact {
    pub row: ComparisonRow,
    pub cv: CVResult,
}

/// Metrics for each model file on the train and test rows of its split;
/// the CV score is recomputed on the training rows.
pub fn evaluate_stage(records: &[ProjectRecord], out: &Path, config: &RunConfig, model_files: &[PathBuf]) -> Result<Vec<ComparisonRow>> {
    let mut rows = Vec::new();
    for path in model_files {
        let (artifact, model) = load_model(path)?;
        let (train_rec, test_rec) = split_records(&artifact, records)?;
        let train = artifact.features(&train_rec)?;
        let test = artifact.features(&test_rec)?;
        let spec = LearnerSpec::Model { kind: artifact.kind, params: artifact.hyperparameters.clone() };
        let cv = kfold_cv(&spec, &train, config.cv_folds, artifact.split_seed)?;
        let metrics = |m: &FeatureMatrix| -> Result<MetricsReport> {
            MetricsReport::compute(&m.target, &model.predict(m)?, config.predictors)
        };
        let row = ComparisonRow {
            model: artifact.kind.short_name().to_string(),
            cv_score: cv.mean,
            train: metrics(&train)?,
            test: metrics(&test)?,
        };
        info!("evaluate: {} test R² {:.4}", row.model, row.test.r2);
        io::write_json(
            &out.join(format!("evaluation/metrics_{}.json", row.model)),
            &EvaluationArtifact { row: row.clone(), cv },
        )?;
        rows.push(row);
    }
    io::write_json(&out.join(COMPARISON_JSON), &rows)?;
    io::write_atomic(&out.join("evaluation/comparison.csv"), &crate::evaluation::comparison_csv(&rows)?)?;
    io::write_atomic(
        &out.join("evaluation/comparison.md"),
        crate::evaluation::comparison_markdown(&rows).as_bytes(),
    )?;
    let entry: BTreeMap<String, f64> = rows.iter().map(|r| (r.model.clone(), r.test.r2)).collect();
    log_stage(out, config, "evaluate", json!({ "predictors": config.predictors, "test_r2": entry }))?;
    Ok(rows)
}

/// Impurity importances and SHAP attributions on the test rows.
pub fn explain_stage(
    records: &[ProjectRecord],
    out: &Path,
    config: &RunConfig,
    model_files: &[PathBuf],
) -> Result<(Vec<Importance>, Vec<ShapSummary>)> {
    let mut importances = Vec::new();
    let mut summaries = Vec::new();
    for path in model_files {
        let (artifact, model) = load_model(path)?;
        let (_, mut test_rec) = split_records(&artifact, records)?;
        if config.explain_rows > 0 {
            test_rec.truncate(config.explain_rows);
        }
        let scaled = artifact.features(&test_rec)?;
        let raw = encode(&test_rec, &artifact.encoders)?;
        let explanations = explain_rows(&model, &scaled)?;
        let name = artifact.kind.short_name();
        io::write_atomic(
            &out.join(format!("explain/shap_{name}.csv")),
            &shap_csv(&model.feature_names, &explanations, &raw)?,
        )?;
        summaries.push(summarize(name, &model.feature_names, &explanations)?);
        importances.push(impurity_importance(&model)?);
        info!("explain: {name} over {} rows", explanations.len());
    }
    io::write_json(&out.join(IMPORTANCE_JSON), &importances)?;
    io::write_json(&out.join(SHAP_SUMMARY_JSON), &summaries)?;
    io::write_atomic(&out.join("explain/importance.md"), importance_markdown(&importances).as_bytes())?;
    io::write_atomic(&out.join("explain/shap.md"), shap_markdown(&summaries).as_bytes())?;
    let entry: BTreeMap<&str, usize> = summaries.iter().map(|s| (s.model.as_str(), s.n_rows)).collect();
    log_stage(out, config, "explain", json!({ "rows_explained": entry }))?;
    Ok((importances, summaries))
}

/// Every stage in order, ending with the report bundle.
pub fn run_pipeline(input: &Path, out: &Path, config: &RunConfig) -> Result<RunLog> {
    config.validate()?;
    let kinds = config.kinds()?;
    io::write_atomic(&out.join("run_config.toml"), config.to_toml()?.as_bytes())?;
    let records = clean_stage(input, out, config)?;
    correlate_stage(&records, out, config)?;
    train_stage(&records, out, config, &kinds)?;
    let files: Vec<PathBuf> = kinds.iter().map(|&k| model_path(out, k)).collect();
    evaluate_stage(&records, out, config, &files)?;
    explain_stage(&records, out, config, &files)?;
    super::emit_report(out)?;
    io::read_json(&out.join(RUN_LOG))
}

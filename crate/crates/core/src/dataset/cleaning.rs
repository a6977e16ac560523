use std::collections::BTreeMap;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::columns::{self, *};
use super::{ProjectRecord, QualityRating, RawTable};
use crate::error::{Error, Result};
use crate::stats;

/// Knobs for [`run_cleaning_pipeline`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CleaningConfig {
    /// Columns removed as irrelevant once filtering is done.
    pub drop_columns: Vec<String>,
    /// Columns with a missing fraction above this are dropped.
    pub sparse_threshold: f64,
    /// Missing cells in these columns are filled instead of dropping.
    pub fill_values: BTreeMap<String, String>,
    /// Pairs with |r| above this are pruned.
    pub correlation_threshold: f64,
    /// Numeric columns considered for pruning, in keep-priority order.
    pub correlation_columns: Vec<String>,
    /// Literal cell values read as missing besides the empty string.
    pub missing_tokens: Vec<String>,
}

impl Default for CleaningConfig {
    fn default() -> Self {
        CleaningConfig {
            drop_columns: vec![
                PROJECT_ID.to_string(),
                DATA_QUALITY_RATING.to_string(),
                UFP_RATING.to_string(),
                IMPLEMENTATION_DATE.to_string(),
            ],
            sparse_threshold: 0.10,
            fill_values: BTreeMap::from([(PRIMARY_LANGUAGE.to_string(), "unknown".to_string())]),
            correlation_threshold: 0.70,
            correlation_columns: [
                FUNCTIONAL_SIZE,
                NORMALISED_EFFORT,
                DEFECT_DENSITY,
                AGE,
                SUMMARISED_EFFORT,
                ADJUSTED_FP,
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            missing_tokens: Vec::new(),
        }
    }
}

impl CleaningConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sparse_threshold > 0.0 && self.sparse_threshold < 1.0) {
            return Err(Error::Config(format!(
                "sparse_threshold {} not in (0, 1)",
                self.sparse_threshold
            )));
        }
        if !(self.correlation_threshold > 0.0 && self.correlation_threshold < 1.0) {
            return Err(Error::Config(format!(
                "correlation_threshold {} not in (0, 1)",
                self.correlation_threshold
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepReport {
    pub name: String,
    pub records_in: usize,
    pub records_out: usize,
    pub columns_in: usize,
    pub columns_out: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub column: String,
    pub step: String,
    pub reason: String,
}

/// Audit trail of one pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningReport {
    pub steps: Vec<StepReport>,
    pub dropped_columns: Vec<DroppedColumn>,
    /// Cells replaced by the configured fill value, per column.
    pub fill_counts: BTreeMap<String, usize>,
    /// Missing cells per column as seen on entry to missing-value resolution.
    pub missing_counts: BTreeMap<String, usize>,
}

impl CleaningReport {
    pub fn step(&self, name: &str) -> Option<&StepReport> {
        self.steps.iter().find(|s| s.name == name)
    }

    /// Rows removed by the named step (0 if the step did not run).
    pub fn rows_dropped(&self, name: &str) -> usize {
        self.step(name)
            .map(|s| s.records_in - s.records_out)
            .unwrap_or(0)
    }
}

/// Outcome of [`resolve_missing`].
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MissingResolution {
    pub dropped_columns: Vec<DroppedColumn>,
    pub fill_counts: BTreeMap<String, usize>,
    pub missing_counts: BTreeMap<String, usize>,
    pub rows_dropped: usize,
}

pub const STEP_TARGET: &str = "filter_missing_target";
pub const STEP_AGE: &str = "derive_age";
pub const STEP_QUALITY: &str = "filter_quality";
pub const STEP_DROP: &str = "drop_irrelevant";
pub const STEP_MISSING: &str = "resolve_missing";
pub const STEP_CORRELATION: &str = "prune_correlated";

/// Removes rows whose target is blank. Non-blank targets must be finite,
/// nonnegative numbers.
pub fn filter_missing_target(mut table: RawTable) -> Result<(RawTable, usize)> {
    let idx = table.require_column(TOTAL_DEFECTS)?;
    let before = table.len();
    for rec in &table.records {
        if let Some(v) = table.cell(rec, idx) {
            match v.parse::<f64>() {
                Ok(x) if x.is_finite() && x >= 0.0 => {}
                _ => {
                    return Err(Error::data(
                        rec.row,
                        TOTAL_DEFECTS,
                        format!("`{v}` is not a nonnegative number"),
                    ))
                }
            }
        }
    }
    table.records.retain(|r| r.values[idx].is_some());
    let dropped = before - table.len();
    Ok((table, dropped))
}

/// Years between the implementation date and the reference date
/// (days / 365.25, rounded to four decimals).
pub fn derive_age(implementation: NaiveDate, reference: NaiveDate) -> Result<f64> {
    if implementation > reference {
        return Err(Error::InvalidDate(format!(
            "implementation date {implementation} is after reference date {reference}"
        )));
    }
    let days = (reference - implementation).num_days() as f64;
    Ok((days / 365.25 * 1e4).round() / 1e4)
}

fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| Error::InvalidDate(format!("`{s}` is not an ISO-8601 date: {e}")))
}

/// Appends an `Age` column derived from `Implementation Date`. A missing
/// date yields a missing age, left for missing-value resolution.
fn add_age_column(mut table: RawTable, reference: NaiveDate) -> Result<RawTable> {
    let idx = table.require_column(IMPLEMENTATION_DATE)?;
    if table.has_column(AGE) {
        return Err(Error::Config(format!(
            "input already has an `{AGE}` column alongside `{IMPLEMENTATION_DATE}`"
        )));
    }
    for rec in &mut table.records {
        let age = match rec.values[idx].as_deref() {
            None => None,
            Some(s) => {
                let date = parse_date(s)
                    .map_err(|e| Error::data(rec.row, IMPLEMENTATION_DATE, e.to_string()))?;
                let age = derive_age(date, reference)
                    .map_err(|e| Error::data(rec.row, IMPLEMENTATION_DATE, e.to_string()))?;
                Some(age.to_string())
            }
        };
        rec.values.push(age);
    }
    table.columns.push(AGE.to_string());
    Ok(table)
}

fn rating(table: &RawTable, rec: &super::RawRecord, idx: usize, column: &str) -> Result<Option<QualityRating>> {
    match table.cell(rec, idx) {
        None => Ok(None),
        Some(s) => s
            .parse::<QualityRating>()
            .map(Some)
            .map_err(|m| Error::data(rec.row, column, m)),
    }
}

/// Keeps rows rated A or B in both `Data Quality Rating` and `UFP rating`.
/// A blank rating counts as not acceptable.
pub fn filter_quality(mut table: RawTable) -> Result<(RawTable, usize)> {
    let dq = table.require_column(DATA_QUALITY_RATING)?;
    let ufp = table.require_column(UFP_RATING)?;
    let mut keep = Vec::with_capacity(table.len());
    for rec in &table.records {
        let a = rating(&table, rec, dq, DATA_QUALITY_RATING)?;
        let b = rating(&table, rec, ufp, UFP_RATING)?;
        keep.push(matches!((a, b), (Some(a), Some(b)) if a.is_acceptable() && b.is_acceptable()));
    }
    let before = table.len();
    let mut it = keep.into_iter();
    table.records.retain(|_| it.next().unwrap());
    let dropped = before - table.len();
    Ok((table, dropped))
}

/// Removes the named columns. Every name must exist.
pub fn drop_irrelevant(mut table: RawTable, drop_list: &[String]) -> Result<RawTable> {
    let mut idx = Vec::with_capacity(drop_list.len());
    for name in drop_list {
        let i = table
            .column_index(name)
            .ok_or_else(|| Error::Config(format!("cannot drop absent column `{name}`")))?;
        idx.push(i);
    }
    table.remove_columns(&idx);
    Ok(table)
}

/// Resolves missing cells in three passes: drop columns whose missing
/// fraction exceeds `sparse_threshold` (fill columns are exempt), fill the
/// configured columns, then drop any row still holding a missing cell.
pub fn resolve_missing(
    mut table: RawTable,
    sparse_threshold: f64,
    fill_values: &BTreeMap<String, String>,
) -> Result<(RawTable, MissingResolution)> {
    if !(sparse_threshold > 0.0 && sparse_threshold < 1.0) {
        return Err(Error::Config(format!(
            "sparse threshold {sparse_threshold} not in (0, 1)"
        )));
    }
    let mut out = MissingResolution::default();
    let n = table.len();
    let counts = table.missing_counts();
    for (name, &c) in table.columns.iter().zip(&counts) {
        if c > 0 {
            out.missing_counts.insert(name.clone(), c);
        }
    }

    if n > 0 {
        let mut sparse = Vec::new();
        for (i, (name, &c)) in table.columns.iter().zip(&counts).enumerate() {
            let fraction = c as f64 / n as f64;
            if fraction > sparse_threshold && !fill_values.contains_key(name) {
                sparse.push(i);
                out.dropped_columns.push(DroppedColumn {
                    column: name.clone(),
                    step: STEP_MISSING.to_string(),
                    reason: format!(
                        "{c} of {n} values missing ({:.2}% > {:.2}%)",
                        fraction * 100.0,
                        sparse_threshold * 100.0
                    ),
                });
            }
        }
        table.remove_columns(&sparse);
    }

    for (name, fill) in fill_values {
        let Some(idx) = table.column_index(name) else {
            continue;
        };
        let mut filled = 0;
        for rec in &mut table.records {
            if rec.values[idx].is_none() {
                rec.values[idx] = Some(fill.clone());
                filled += 1;
            }
        }
        out.fill_counts.insert(name.clone(), filled);
    }

    let before = table.len();
    table.records.retain(|r| r.values.iter().all(Option::is_some));
    out.rows_dropped = before - table.len();
    Ok((table, out))
}

/// Prunes correlated numeric columns; returns the drop entries.
fn prune_table(table: &mut RawTable, config: &CleaningConfig) -> Result<Vec<DroppedColumn>> {
    let names: Vec<String> = config
        .correlation_columns
        .iter()
        .filter(|c| table.has_column(c))
        .cloned()
        .collect();
    if names.len() < 2 || table.len() < 3 {
        return Ok(Vec::new());
    }
    let data: Vec<Vec<f64>> = names
        .iter()
        .map(|c| table.numeric_column(c))
        .collect::<Result<_>>()?;
    let matrix = stats::corr_matrix(&names, &data)?;
    let dropped = stats::prune_correlated(&matrix, config.correlation_threshold);
    let mut entries = Vec::new();
    let mut idx = Vec::new();
    for name in &dropped {
        let j = matrix.index(name).unwrap();
        // the first retained column it exceeds the threshold against
        let partner = (0..j)
            .find(|&i| !dropped.contains(&matrix.names[i]) && matrix.get(i, j).abs() > config.correlation_threshold)
            .map(|i| (matrix.names[i].clone(), matrix.get(i, j)));
        let reason = match partner {
            Some((p, r)) => format!("|r| = {:.4} with `{p}` exceeds {}", r.abs(), config.correlation_threshold),
            None => format!("|r| exceeds {}", config.correlation_threshold),
        };
        entries.push(DroppedColumn {
            column: name.clone(),
            step: STEP_CORRELATION.to_string(),
            reason,
        });
        idx.push(table.column_index(name).unwrap());
    }
    table.remove_columns(&idx);
    Ok(entries)
}

/// Runs the six cleaning steps and types the result.
///
/// An input that is already in cleaned shape (an `Age` column and no
/// `Implementation Date`) passes through: age derivation and the quality
/// filter are skipped when their source columns are absent, and only the
/// configured drop columns that are present get dropped.
pub fn run_cleaning_pipeline(
    raw: RawTable,
    config: &CleaningConfig,
    reference_date: NaiveDate,
) -> Result<(Vec<ProjectRecord>, CleaningReport)> {
    config.validate()?;
    let cleaned_shape = raw.has_column(AGE) && !raw.has_column(IMPLEMENTATION_DATE);
    let mut report = CleaningReport::default();
    let mut table = raw;

    fn record(report: &mut CleaningReport, name: &str, before: (usize, usize), table: &RawTable) {
        report.steps.push(StepReport {
            name: name.to_string(),
            records_in: before.0,
            records_out: table.len(),
            columns_in: before.1,
            columns_out: table.columns.len(),
        });
    }
    let shape = |t: &RawTable| (t.len(), t.columns.len());

    // 1
    let before = shape(&table);
    table = filter_missing_target(table)
        .map_err(|e| e.in_step(STEP_TARGET))?
        .0;
    record(&mut report, STEP_TARGET, before, &table);

    // 2
    let before = shape(&table);
    if !cleaned_shape {
        table = add_age_column(table, reference_date).map_err(|e| e.in_step(STEP_AGE))?;
    }
    record(&mut report, STEP_AGE, before, &table);

    // 3
    let before = shape(&table);
    let has_dq = table.has_column(DATA_QUALITY_RATING);
    let has_ufp = table.has_column(UFP_RATING);
    if !(cleaned_shape && !has_dq && !has_ufp) {
        table = filter_quality(table)
            .map_err(|e| e.in_step(STEP_QUALITY))?
            .0;
    }
    record(&mut report, STEP_QUALITY, before, &table);

    // 4
    let before = shape(&table);
    let drop_list: Vec<String> = if cleaned_shape {
        config
            .drop_columns
            .iter()
            .filter(|c| table.has_column(c))
            .cloned()
            .collect()
    } else {
        config.drop_columns.clone()
    };
    table = drop_irrelevant(table, &drop_list).map_err(|e| e.in_step(STEP_DROP))?;
    for c in &drop_list {
        report.dropped_columns.push(DroppedColumn {
            column: c.clone(),
            step: STEP_DROP.to_string(),
            reason: "configured as irrelevant".to_string(),
        });
    }
    record(&mut report, STEP_DROP, before, &table);

    // 5
    let before = shape(&table);
    let (t, resolution) = resolve_missing(table, config.sparse_threshold, &config.fill_values)
        .map_err(|e| e.in_step(STEP_MISSING))?;
    table = t;
    report.dropped_columns.extend(resolution.dropped_columns);
    report.fill_counts = resolution.fill_counts;
    report.missing_counts = resolution.missing_counts;
    record(&mut report, STEP_MISSING, before, &table);

    // 6
    let before = shape(&table);
    let pruned = prune_table(&mut table, config).map_err(|e| e.in_step(STEP_CORRELATION))?;
    report.dropped_columns.extend(pruned);
    record(&mut report, STEP_CORRELATION, before, &table);

    for c in &table.columns {
        if !columns::SCHEMA.contains(&c.as_str()) {
            return Err(Error::Config(format!(
                "column `{c}` survives cleaning but is not a model column; add it to drop_columns"
            )));
        }
    }
    let records = table.to_project_records()?;
    Ok((records, report))
}

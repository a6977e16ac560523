//! ISBSG-shaped project tables: CSV parsing, the six-step cleaning
//! pipeline and the typed [`ProjectRecord`] rows it produces.

mod cleaning;
mod table;

pub use cleaning::{
    derive_age, drop_irrelevant, filter_missing_target, filter_quality, resolve_missing,
    run_cleaning_pipeline, CleaningConfig, CleaningReport, DroppedColumn, MissingResolution,
    StepReport, STEP_AGE, STEP_CORRELATION, STEP_DROP, STEP_MISSING, STEP_QUALITY, STEP_TARGET,
};
pub use table::{parse_csv, parse_csv_with, RawRecord, RawTable};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column names as they appear in the source repository export.
pub mod columns {
    pub const INDUSTRY_SECTOR: &str = "Industry Sector";
    pub const DEVELOPMENT_TYPE: &str = "Development Type";
    pub const PRIMARY_LANGUAGE: &str = "Primary Programming Language";
    pub const COUNT_APPROACH: &str = "Count Approach";
    pub const FUNCTIONAL_SIZE: &str = "Functional Size";
    pub const RELATIVE_SIZE: &str = "Relative Size";
    pub const NORMALISED_EFFORT: &str = "Normalised Work Effort";
    pub const DEFECT_DENSITY: &str = "Defect Density";
    pub const FIRST_LANGUAGE: &str = "1st Language";
    pub const AGE: &str = "Age";
    pub const TOTAL_DEFECTS: &str = "Total Defects Delivered";

    pub const DATA_QUALITY_RATING: &str = "Data Quality Rating";
    pub const UFP_RATING: &str = "UFP rating";
    pub const IMPLEMENTATION_DATE: &str = "Implementation Date";
    pub const PROJECT_ID: &str = "Project ID";
    pub const SUMMARISED_EFFORT: &str = "Summarised Work Effort";
    pub const ADJUSTED_FP: &str = "Adjusted Function Points";

    /// The ten predictors, in model feature order.
    pub const PREDICTORS: [&str; 10] = [
        INDUSTRY_SECTOR,
        DEVELOPMENT_TYPE,
        PRIMARY_LANGUAGE,
        COUNT_APPROACH,
        FUNCTIONAL_SIZE,
        RELATIVE_SIZE,
        NORMALISED_EFFORT,
        DEFECT_DENSITY,
        FIRST_LANGUAGE,
        AGE,
    ];

    pub const CATEGORICAL: [&str; 6] = [
        INDUSTRY_SECTOR,
        DEVELOPMENT_TYPE,
        PRIMARY_LANGUAGE,
        COUNT_APPROACH,
        RELATIVE_SIZE,
        FIRST_LANGUAGE,
    ];

    pub const NUMERIC: [&str; 4] = [FUNCTIONAL_SIZE, NORMALISED_EFFORT, DEFECT_DENSITY, AGE];

    /// Predictors followed by the target: the cleaned table layout.
    pub const SCHEMA: [&str; 11] = [
        INDUSTRY_SECTOR,
        DEVELOPMENT_TYPE,
        PRIMARY_LANGUAGE,
        COUNT_APPROACH,
        FUNCTIONAL_SIZE,
        RELATIVE_SIZE,
        NORMALISED_EFFORT,
        DEFECT_DENSITY,
        FIRST_LANGUAGE,
        AGE,
        TOTAL_DEFECTS,
    ];

    /// Columns a raw export must carry for the full pipeline.
    pub const RAW_REQUIRED: [&str; 12] = [
        INDUSTRY_SECTOR,
        DEVELOPMENT_TYPE,
        PRIMARY_LANGUAGE,
        COUNT_APPROACH,
        FUNCTIONAL_SIZE,
        RELATIVE_SIZE,
        NORMALISED_EFFORT,
        DEFECT_DENSITY,
        FIRST_LANGUAGE,
        TOTAL_DEFECTS,
        DATA_QUALITY_RATING,
        UFP_RATING,
    ];

    pub fn is_categorical(name: &str) -> bool {
        CATEGORICAL.contains(&name)
    }
}

/// Credibility code attached to a record and to its size count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum QualityRating {
    A,
    B,
    C,
    D,
}

impl QualityRating {
    pub fn is_acceptable(self) -> bool {
        matches!(self, QualityRating::A | QualityRating::B)
    }
}

impl FromStr for QualityRating {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "A" => Ok(QualityRating::A),
            "B" => Ok(QualityRating::B),
            "C" => Ok(QualityRating::C),
            "D" => Ok(QualityRating::D),
            other => Err(format!("rating `{other}` is not one of A, B, C, D")),
        }
    }
}

impl fmt::Display for QualityRating {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = match self {
            QualityRating::A => "A",
            QualityRating::B => "B",
            QualityRating::C => "C",
            QualityRating::D => "D",
        };
        f.write_str(c)
    }
}

/// One fully cleaned project: ten predictors plus the delivered defect count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectRecord {
    pub industry_sector: String,
    pub development_type: String,
    pub primary_language: String,
    pub count_approach: String,
    /// Unadjusted function points.
    pub functional_size: f64,
    pub relative_size: String,
    /// Person-hours.
    pub normalised_effort: f64,
    /// Defects per 1000 functional size units.
    pub defect_density: f64,
    pub first_language: String,
    /// Years since implementation.
    pub age: f64,
    pub total_defects: f64,
}

impl ProjectRecord {
    /// Categorical value by schema column name.
    pub fn category(&self, column: &str) -> Option<&str> {
        use columns::*;
        Some(match column {
            INDUSTRY_SECTOR => &self.industry_sector,
            DEVELOPMENT_TYPE => &self.development_type,
            PRIMARY_LANGUAGE => &self.primary_language,
            COUNT_APPROACH => &self.count_approach,
            RELATIVE_SIZE => &self.relative_size,
            FIRST_LANGUAGE => &self.first_language,
            _ => return None,
        })
    }

    /// Numeric value by schema column name (including the target).
    pub fn number(&self, column: &str) -> Option<f64> {
        use columns::*;
        Some(match column {
            FUNCTIONAL_SIZE => self.functional_size,
            NORMALISED_EFFORT => self.normalised_effort,
            DEFECT_DENSITY => self.defect_density,
            AGE => self.age,
            TOTAL_DEFECTS => self.total_defects,
            _ => return None,
        })
    }

    /// Builds a record from a dense table row laid out in [`columns::SCHEMA`] order.
    fn from_cells(row: usize, cells: &[&str]) -> Result<Self> {
        use columns::*;
        debug_assert_eq!(cells.len(), SCHEMA.len());
        let num = |i: usize| -> Result<f64> {
            let column = SCHEMA[i];
            let v: f64 = cells[i]
                .parse()
                .map_err(|_| Error::data(row, column, format!("`{}` is not a number", cells[i])))?;
            if !v.is_finite() || v < 0.0 {
                return Err(Error::data(
                    row,
                    column,
                    format!("`{}` is not a finite nonnegative number", cells[i]),
                ));
            }
            Ok(v)
        };
        Ok(ProjectRecord {
            industry_sector: cells[0].to_string(),
            development_type: cells[1].to_string(),
            primary_language: cells[2].to_string(),
            count_approach: cells[3].to_string(),
            functional_size: num(4)?,
            relative_size: cells[5].to_string(),
            normalised_effort: num(6)?,
            defect_density: num(7)?,
            first_language: cells[8].to_string(),
            age: num(9)?,
            total_defects: num(10)?,
        })
    }

    fn to_cells(&self) -> [String; 11] {
        [
            self.industry_sector.clone(),
            self.development_type.clone(),
            self.primary_language.clone(),
            self.count_approach.clone(),
            self.functional_size.to_string(),
            self.relative_size.clone(),
            self.normalised_effort.to_string(),
            self.defect_density.to_string(),
            self.first_language.clone(),
            self.age.to_string(),
            self.total_defects.to_string(),
        ]
    }
}

/// Serializes cleaned records with the input dialect (comma, double quotes).
pub fn write_records_csv(records: &[ProjectRecord]) -> Result<Vec<u8>> {
    let mut w = crate::io::csv_writer();
    w.write_record(columns::SCHEMA)?;
    for r in records {
        w.write_record(r.to_cells())?;
    }
    crate::io::csv_finish(w)
}

/// Reads a cleaned CSV (the [`columns::SCHEMA`] columns, any order, extras ignored).
pub fn read_records_csv<R: std::io::Read>(reader: R) -> Result<Vec<ProjectRecord>> {
    let table = parse_csv(reader, &columns::SCHEMA)?;
    table.to_project_records()
}

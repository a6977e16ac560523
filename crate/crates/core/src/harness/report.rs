use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::pipeline::{
    load_cleaned, CorrelationArtifact, CLEANED_CSV, CLEANING_REPORT, COMPARISON_JSON, CORRELATION_JSON,
    IMPORTANCE_JSON, SHAP_SUMMARY_JSON,
};
use crate::dataset::{columns, CleaningReport, ProjectRecord};
use crate::error::{Error, Result};
use crate::evaluation::{comparison_markdown, ComparisonRow};
use crate::explain::{importance_markdown, shap_markdown, Importance, ShapSummary};
use crate::io;
use crate::stats::scatter_csv;

pub const REPORT_DIR: &str = "report";

/// Machine-readable half of the report bundle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportBundle {
    pub records: usize,
    pub cleaning: CleaningReport,
    pub correlations: CorrelationArtifact,
    pub comparison: Vec<ComparisonRow>,
    pub importance: Vec<Importance>,
    pub shap: Vec<ShapSummary>,
    /// Category → count per categorical column, most frequent first.
    pub frequencies: BTreeMap<String, Vec<(String, usize)>>,
    /// Scatter files written next to the report.
    pub scatter_files: Vec<String>,
}

/// Counts per value, most frequent first, ties by value.
pub fn frequency_table(records: &[ProjectRecord], column: &str) -> Result<Vec<(String, usize)>> {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    for r in records {
        let v = r
            .category(column)
            .ok_or_else(|| Error::usage(format!("`{column}` is not a categorical column")))?;
        *counts.entry(v).or_default() += 1;
    }
    let mut out: Vec<(String, usize)> = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    out.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    Ok(out)
}

fn slug(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() { c.to_ascii_lowercase() } else { '_' })
        .collect();
    while s.contains("__") {
        s = s.replace("__", "_");
    }
    s.trim_matches('_').to_string()
}

fn markdown(b: &ReportBundle) -> String {
    let mut s = String::from("# Defect prediction report\n\n");
    s.push_str(&format!("{} cleaned records.\n\n## Cleaning\n\n", b.records));
    s.push_str("| step | records in | records out | columns in | columns out |\n|---|---|---|---|---|\n");
    for st in &b.cleaning.steps {
        s.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            st.name, st.records_in, st.records_out, st.columns_in, st.columns_out
        ));
    }
    if !b.cleaning.dropped_columns.is_empty() {
        s.push_str("\n| dropped column | step | reason |\n|---|---|---|\n");
        for d in &b.cleaning.dropped_columns {
            s.push_str(&format!("| {} | {} | {} |\n", d.column, d.step, d.reason.replace('|', "\\|")));
        }
    }

    s.push_str(&format!("\n## Correlation with {}\n\n", b.correlations.target));
    s.push_str("| column | r | t | df | p | log10 p |\n|---|---|---|---|---|---|\n");
    for c in &b.correlations.predictors {
        let t = &c.test;
        s.push_str(&format!(
            "| {} | {:.6} | {:.4} | {} | {:e} | {:.2} |\n",
            c.column, t.r, t.t_statistic, t.degrees_of_freedom, t.p_two_sided, t.log10_p
        ));
    }
    s.push_str("\nScatter data: ");
    s.push_str(&b.scatter_files.join(", "));
    s.push_str("\n\n## Model comparison\n\n");
    s.push_str(&comparison_markdown(&b.comparison));
    s.push_str("\n## Impurity importance\n\n");
    s.push_str(&importance_markdown(&b.importance));
    s.push_str("\n## SHAP ranking\n\n");
    s.push_str(&shap_markdown(&b.shap));
    s.push_str("\n## Category frequencies\n");
    for (column, table) in &b.frequencies {
        s.push_str(&format!("\n### {column}\n\n| value | count |\n|---|---|\n"));
        for (v, c) in table {
            s.push_str(&format!("| {v} | {c} |\n"));
        }
    }
    s
}

/// Builds `report/` inside `run_dir` from the stage artifacts.
pub fn emit_report(run_dir: &Path) -> Result<ReportBundle> {
    let records = load_cleaned(&run_dir.join(CLEANED_CSV))?;
    let cleaning: CleaningReport = io::read_json(&run_dir.join(CLEANING_REPORT))?;
    let correlations: CorrelationArtifact = io::read_json(&run_dir.join(CORRELATION_JSON))?;
    let comparison: Vec<ComparisonRow> = io::read_json(&run_dir.join(COMPARISON_JSON))?;
    let importance: Vec<Importance> = io::read_json(&run_dir.join(IMPORTANCE_JSON))?;
    let shap: Vec<ShapSummary> = io::read_json(&run_dir.join(SHAP_SUMMARY_JSON))?;

    let dir = run_dir.join(REPORT_DIR);
    let y: Vec<f64> = records.iter().map(|r| r.total_defects).collect();
    let mut scatter_files = Vec::new();
    for c in columns::NUMERIC {
        let x: Vec<f64> = records.iter().map(|r| r.number(c).unwrap()).collect();
        let name = format!("scatter_{}.csv", slug(c));
        io::write_atomic(&dir.join(&name), &scatter_csv(c, &x, columns::TOTAL_DEFECTS, &y)?)?;
        scatter_files.push(name);
    }
    let mut frequencies = BTreeMap::new();
    for c in columns::CATEGORICAL {
        let table = frequency_table(&records, c)?;
        let mut w = io::csv_writer();
        w.write_record(["value", "count"])?;
        for (v, n) in &table {
            w.write_record([v.as_str(), &n.to_string()])?;
        }
        io::write_atomic(&dir.join(format!("frequency_{}.csv", slug(c))), &io::csv_finish(w)?)?;
        frequencies.insert(c.to_string(), table);
    }

    let bundle = ReportBundle {
        records: records.len(),
        cleaning,
        correlations,
        comparison,
        importance,
        shap,
        frequencies,
        scatter_files,
    };
    io::write_json(&dir.join("report.json"), &bundle)?;
    io::write_atomic(&dir.join("report.md"), markdown(&bundle).as_bytes())?;
    Ok(bundle)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(sector: &str) -> ProjectRecord {
        ProjectRecord {
            industry_sector: sector.into(),
            development_type: "Enhancement".into(),
            primary_language: "Java".into(),
            count_approach: "IFPUG 4+".into(),
            functional_size: 100.0,
            relative_size: "S".into(),
            normalised_effort: 1000.0,
            defect_density: 10.0,
            first_language: "3GL".into(),
            age: 3.0,
            total_defects: 1.0,
        }
    }

    #[test]
    fn frequencies_sorted() {
        let recs: Vec<_> = ["b", "a", "b", "c", "a", "b"].iter().map(|s| record(s)).collect();
        let t = frequency_table(&recs, columns::INDUSTRY_SECTOR).unwrap();
        assert_eq!(t, vec![("b".into(), 3), ("a".into(), 2), ("c".into(), 1)]);
        assert!(frequency_table(&recs, columns::AGE).is_err());
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("Normalised Work Effort"), "normalised_work_effort");
        assert_eq!(slug("1st Language"), "1st_language");
    }

    #[test]
    fn empty_dir_names_first_artifact() {
        let dir = tempfile::tempdir().unwrap();
        match emit_report(dir.path()) {
            Err(Error::MissingArtifact(p)) => assert!(p.ends_with(CLEANED_CSV)),
            other => panic!("{other:?}"),
        }
    }
}

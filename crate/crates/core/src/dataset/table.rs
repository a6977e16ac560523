use std::io::Read;

use serde::Serialize;

use super::{columns, ProjectRecord};
use crate::error::{Error, Result};

/// One data row of a raw export. Values are positional, aligned with the
/// owning [`RawTable`]'s header; `None` marks a missing cell.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RawRecord {
    /// Zero-based position among the file's data rows.
    pub row: usize,
    pub values: Vec<Option<String>>,
}

/// Untyped table: a header plus rows of optional strings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RawTable {
    pub columns: Vec<String>,
    pub records: Vec<RawRecord>,
}

/// Parses a comma-separated, double-quote-escaped UTF-8 file with one header row.
///
/// Empty cells become missing values.
pub fn parse_csv<R: Read>(reader: R, required_columns: &[&str]) -> Result<RawTable> {
    parse_csv_with(reader, required_columns, &[])
}

/// Like [`parse_csv`], but additionally treats each of `missing_tokens`
/// (e.g. `"NA"`) as a missing cell.
pub fn parse_csv_with<R: Read>(
    reader: R,
    required_columns: &[&str],
    missing_tokens: &[String],
) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(|e| Error::Parse {
        row: 0,
        message: format!("unreadable header: {e}"),
    })?;
    let columns: Vec<String> = header.iter().map(str::to_string).collect();
    for &req in required_columns {
        if !columns.iter().any(|c| c == req) {
            return Err(Error::MissingColumn(req.to_string()));
        }
    }

    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result.map_err(|e| {
            let message = match e.kind() {
                csv::ErrorKind::UnequalLengths {
                    expected_len, len, ..
                } => format!("expected {expected_len} fields, found {len}"),
                _ => e.to_string(),
            };
            Error::Parse { row, message }
        })?;
        let values = rec
            .iter()
            .map(|cell| {
                if cell.is_empty() || missing_tokens.iter().any(|t| t == cell) {
                    None
                } else {
                    Some(cell.to_string())
                }
            })
            .collect();
        records.push(RawRecord { row, values });
    }
    Ok(RawTable { columns, records })
}

impl RawTable {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn has_column(&self, name: &str) -> bool {
        self.column_index(name).is_some()
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Cell value of `record` in column `idx`, `None` when missing.
    pub fn cell<'a>(&self, record: &'a RawRecord, idx: usize) -> Option<&'a str> {
        record.values[idx].as_deref()
    }

    /// Number of missing cells per column, in header order.
    pub fn missing_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.columns.len()];
        for rec in &self.records {
            for (c, v) in counts.iter_mut().zip(&rec.values) {
                if v.is_none() {
                    *c += 1;
                }
            }
        }
        counts
    }

    pub(crate) fn remove_columns(&mut self, drop: &[usize]) {
        if drop.is_empty() {
            return;
        }
        let keep: Vec<usize> = (0..self.columns.len())
            .filter(|i| !drop.contains(i))
            .collect();
        self.columns = keep.iter().map(|&i| self.columns[i].clone()).collect();
        for rec in &mut self.records {
            let mut values = std::mem::take(&mut rec.values);
            rec.values = keep.iter().map(|&i| values[i].take()).collect();
        }
    }

    /// Parses one column as finite reals; missing or malformed cells are errors.
    pub fn numeric_column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.require_column(name)?;
        self.records
            .iter()
            .map(|rec| {
                let cell = self
                    .cell(rec, idx)
                    .ok_or_else(|| Error::data(rec.row, name, "missing value"))?;
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => Ok(v),
                    _ => Err(Error::data(rec.row, name, format!("`{cell}` is not a number"))),
                }
            })
            .collect()
    }

    /// Types every row as a [`ProjectRecord`]. The table must be dense
    /// over the schema columns; extra columns are ignored.
    pub fn to_project_records(&self) -> Result<Vec<ProjectRecord>> {
        let idx: Vec<usize> = columns::SCHEMA
            .iter()
            .map(|c| self.require_column(c))
            .collect::<Result<_>>()?;
        self.records
            .iter()
            .map(|rec| {
                let cells: Vec<&str> = idx
                    .iter()
                    .zip(columns::SCHEMA)
                    .map(|(&i, name)| {
                        self.cell(rec, i)
                            .ok_or_else(|| Error::data(rec.row, name, "missing value"))
                    })
                    .collect::<Result<_>>()?;
                ProjectRecord::from_cells(rec.row, &cells)
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "Project ID,Functional Size,Total Defects Delivered\n";

    #[test]
    fn header_only_file_is_empty() {
        let t = parse_csv(HEADER.as_bytes(), &["Total Defects Delivered"]).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.columns.len(), 3);
    }

    #[test]
    fn missing_required_header_is_schema_error() {
        let err = parse_csv("Project ID,Functional Size\n1,2\n".as_bytes(), &["Total Defects Delivered"])
            .unwrap_err();
        match err {
            Error::MissingColumn(c) => assert_eq!(c, "Total Defects Delivered"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn empty_cell_is_missing() {
        let src = format!("{HEADER}1,100,3\n2,,4\n3,250,0\n");
        let t = parse_csv(src.as_bytes(), &["Functional Size"]).unwrap();
        assert_eq!(t.len(), 3);
        let fs = t.column_index("Functional Size").unwrap();
        let missing: Vec<usize> = t
            .records
            .iter()
            .filter(|r| r.values[fs].is_none())
            .map(|r| r.row)
            .collect();
        assert_eq!(missing, vec![1]);
        assert_eq!(t.missing_counts(), vec![0, 1, 0]);
    }

    #[test]
    fn ragged_row_reports_its_index() {
        let src = format!("{HEADER}1,100,3\n2,4\n");
        match parse_csv(src.as_bytes(), &[]).unwrap_err() {
            Error::Parse { row, .. } => assert_eq!(row, 1),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn quoted_commas_survive() {
        let src = format!("{HEADER}\"a,b\",1,2\n");
        let t = parse_csv(src.as_bytes(), &[]).unwrap();
        assert_eq!(t.records[0].values[0].as_deref(), Some("a,b"));
    }

    #[test]
    fn na_literal_only_missing_when_configured() {
        let src = format!("{HEADER}1,NA,2\n");
        let t = parse_csv(src.as_bytes(), &[]).unwrap();
        assert_eq!(t.records[0].values[1].as_deref(), Some("NA"));
        assert!(t.numeric_column("Functional Size").is_err());
        let t = parse_csv_with(src.as_bytes(), &[], &["NA".to_string()]).unwrap();
        assert_eq!(t.records[0].values[1], None);
    }
}

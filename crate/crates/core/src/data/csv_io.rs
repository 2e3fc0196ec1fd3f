//! CSV tables with a JSON schema sidecar.
//!
//! CSV is UTF-8, comma separated, with a header row. An empty field is a
//! missing cell. Numbers use `.` as decimal point and are written in their
//! shortest round-trip form. Row numbers in parse errors count data rows from 1.

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::table::{Cell, ColumnKind, ColumnSpec, RawTable};
use crate::encoder::exact;
use crate::error::{Error, Result};
use crate::label::FHLabel;

/// Column kinds plus the names of the score and label columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Schema {
    pub columns: Vec<ColumnSpec>,
    #[serde(default)]
    pub score_column: Option<String>,
    #[serde(default)]
    pub label_column: Option<String>,
    /// Free-form provenance written by the producer of the file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<serde_json::Value>,
}

pub const DEFAULT_SCORE_COLUMN: &str = "dutch_score";
pub const DEFAULT_LABEL_COLUMN: &str = "fh_label";

impl Schema {
    /// Schema describing `table` with the default target column names.
    pub fn for_table(table: &RawTable) -> Self {
        Self {
            columns: table.columns.clone(),
            score_column: table
                .dutch_score
                .as_ref()
                .map(|_| DEFAULT_SCORE_COLUMN.to_string()),
            label_column: table
                .labels
                .as_ref()
                .map(|_| DEFAULT_LABEL_COLUMN.to_string()),
            provenance: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// `data.csv` → `data.schema.json`.
pub fn schema_path_for(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("schema.json")
}

fn parse_err(row: usize, column: &str, message: impl Into<String>) -> Error {
    Error::Parse {
        row,
        column: column.to_string(),
        message: message.into(),
    }
}

/// Parses CSV text against `schema`. Feature columns must all be present;
/// the score and label columns are optional; any other header is rejected.
pub fn read_csv_str(text: &str, schema: &Schema) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
    let mut position: HashMap<&str, usize> = HashMap::new();
    for (i, h) in header.iter().enumerate() {
        let known = schema.columns.iter().any(|c| &c.name == h)
            || schema.score_column.as_deref() == Some(h)
            || schema.label_column.as_deref() == Some(h);
        if !known {
            return Err(parse_err(0, h, "column not declared in the schema"));
        }
        if position.insert(h.as_str(), i).is_some() {
            return Err(parse_err(0, h, "duplicate column"));
        }
    }
    let mut feature_pos = Vec::with_capacity(schema.columns.len());
    for c in &schema.columns {
        let p = position
            .get(c.name.as_str())
            .ok_or_else(|| parse_err(0, &c.name, "declared column missing from header"))?;
        feature_pos.push(*p);
    }
    let score_pos = schema
        .score_column
        .as_deref()
        .and_then(|s| position.get(s).copied());
    let label_pos = schema
        .label_column
        .as_deref()
        .and_then(|s| position.get(s).copied());

    let mut rows = Vec::new();
    let mut scores = score_pos.map(|_| Vec::new());
    let mut labels = label_pos.map(|_| Vec::new());
    for (i, record) in reader.records().enumerate() {
        let row_no = i + 1;
        let record = record?;
        if record.len() != header.len() {
            return Err(parse_err(
                row_no,
                "*",
                format!("{} fields under a {}-column header", record.len(), header.len()),
            ));
        }
        let mut row = Vec::with_capacity(schema.columns.len());
        for (spec, &p) in schema.columns.iter().zip(&feature_pos) {
            let raw = &record[p];
            let cell = if raw.is_empty() {
                Cell::Missing
            } else {
                match &spec.kind {
                    ColumnKind::Continuous => {
                        let v: f64 = raw
                            .trim()
                            .parse()
                            .map_err(|_| parse_err(row_no, &spec.name, format!("not a number: {raw:?}")))?;
                        if !v.is_finite() {
                            return Err(parse_err(row_no, &spec.name, "non-finite number"));
                        }
                        Cell::Number(v)
                    }
                    ColumnKind::Categorical { categories } => {
                        if !categories.iter().any(|c| c == raw) {
                            return Err(parse_err(
                                row_no,
                                &spec.name,
                                format!("undeclared category {raw:?}"),
                            ));
                        }
                        Cell::Category(raw.to_string())
                    }
                }
            };
            row.push(cell);
        }
        rows.push(row);
        if let (Some(p), Some(out)) = (score_pos, scores.as_mut()) {
            let name = schema.score_column.as_deref().unwrap_or_default();
            let v: f64 = record[p]
                .trim()
                .parse()
                .map_err(|_| parse_err(row_no, name, "score must be a number"))?;
            out.push(v);
        }
        if let (Some(p), Some(out)) = (label_pos, labels.as_mut()) {
            let name = schema.label_column.as_deref().unwrap_or_default();
            let l: FHLabel = record[p]
                .parse()
                .map_err(|_| parse_err(row_no, name, format!("unknown label {:?}", &record[p])))?;
            out.push(l);
        }
    }
    let table = RawTable {
        columns: schema.columns.clone(),
        rows,
        dutch_score: scores,
        labels,
    };
    table.validate()?;
    Ok(table)
}

/// Serializes `table` with the score and label column names from `schema`.
pub fn write_csv_string(table: &RawTable, schema: &Schema) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<&str> = table.columns.iter().map(|c| c.name.as_str()).collect();
    let score_name = schema.score_column.as_deref().unwrap_or(DEFAULT_SCORE_COLUMN);
    let label_name = schema.label_column.as_deref().unwrap_or(DEFAULT_LABEL_COLUMN);
    if table.dutch_score.is_some() {
        header.push(score_name);
    }
    if table.labels.is_some() {
        header.push(label_name);
    }
    writer.write_record(&header)?;
    for (i, row) in table.rows.iter().enumerate() {
        let mut fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Missing => String::new(),
                Cell::Category(s) => s.clone(),
                Cell::Number(v) => exact::encode(*v),
            })
            .collect();
        if let Some(s) = &table.dutch_score {
            fields.push(exact::encode(s[i]));
        }
        if let Some(l) = &table.labels {
            fields.push(l[i].name().to_string());
        }
        writer.write_record(&fields)?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Input(format!("csv buffer: {e}")))?;
    String::from_utf8(bytes).map_err(|e| Error::Input(e.to_string()))
}

/// Loads `path` with its schema sidecar (`<stem>.schema.json`) unless `schema` is given.
pub fn load_csv(path: &Path, schema: Option<&Schema>) -> Result<(RawTable, Schema)> {
    // read the data first so a missing file is reported under its own name
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let schema = match schema {
        Some(s) => s.clone(),
        None => Schema::load(&schema_path_for(path))?,
    };
    Ok((read_csv_str(&text, &schema)?, schema))
}

/// Writes `path` and its schema sidecar.
pub fn write_csv(table: &RawTable, schema: &Schema, path: &Path) -> Result<()> {
    let text = write_csv_string(table, schema)?;
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    schema.save(&schema_path_for(path))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema() -> Schema {
        Schema {
            columns: vec![
                ColumnSpec::categorical("arcus", ["no", "yes"]),
                ColumnSpec::continuous("ldl"),
                ColumnSpec::categorical("smoking", ["never", "former", "current"]),
                ColumnSpec::continuous("age"),
            ],
            score_column: Some("dutch_score".into()),
            label_column: None,
            provenance: None,
        }
    }

    #[test]
    fn empty_field_is_missing() {
        let t = read_csv_str("arcus,ldl,smoking,age\nyes,,never,40\n", &schema()).unwrap();
        assert_eq!(t.rows[0][1], Cell::Missing);
        assert!(t.dutch_score.is_none());
    }

    #[test]
    fn mixed_table_round_trips() {
        let text = "arcus,ldl,smoking,age,dutch_score\n\
                    yes,4.1,never,40,6\n\
                    no,,former,33.3,1.5\n\
                    ,0.30000000000000004,current,71,9.25\n\
                    no,2.2,,55,3\n\
                    yes,5.9,former,,0\n";
        let t = read_csv_str(text, &schema()).unwrap();
        assert_eq!(t.n_rows(), 5);
        let back = read_csv_str(&write_csv_string(&t, &schema()).unwrap(), &schema()).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn ragged_row_names_its_index() {
        let err = read_csv_str("arcus,ldl,smoking,age\nyes,1,never,2\nno,1,never\n", &schema()).unwrap_err();
        match err {
            Error::Parse { row, .. } => assert_eq!(row, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_column_and_type_violations() {
        assert!(matches!(
            read_csv_str("arcus,ldl,smoking,age,bogus\n", &schema()),
            Err(Error::Parse { .. })
        ));
        let err = read_csv_str("arcus,ldl,smoking,age\nmaybe,1,never,2\n", &schema()).unwrap_err();
        assert!(matches!(err, Error::Parse { ref column, .. } if column == "arcus"));
        let err = read_csv_str("arcus,ldl,smoking,age\nno,abc,never,2\n", &schema()).unwrap_err();
        assert!(matches!(err, Error::Parse { row: 1, ref column, .. } if column == "ldl"));
        assert!(read_csv_str("arcus,ldl,age\n", &schema()).is_err());
    }
}

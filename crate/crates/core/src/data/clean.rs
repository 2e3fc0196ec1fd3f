//! Column and row exclusion for incomplete data.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::table::RawTable;
use crate::error::{Error, Result};

pub const DEFAULT_MISSING_THRESHOLD: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedColumn {
    pub name: String,
    pub missing_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessReport {
    pub threshold: f64,
    pub input_rows: usize,
    pub input_columns: usize,
    pub dropped_columns: Vec<DroppedColumn>,
    pub rows_dropped: usize,
    pub final_rows: usize,
    /// Source columns kept after filtering.
    pub final_columns: usize,
    /// Encoded matrix width, when an encoding was fitted.
    pub final_features: Option<usize>,
    /// Label name → count, for tables that carry targets.
    pub class_distribution: BTreeMap<String, usize>,
}

/// Keeps the columns whose missing fraction is strictly below `threshold`.
pub fn filter_missing_columns(t: &RawTable, threshold: f64) -> Result<(RawTable, Vec<DroppedColumn>)> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::Spec {
            field: "threshold".into(),
            message: format!("must lie in (0, 1], got {threshold}"),
        });
    }
    if t.n_rows() == 0 {
        return Err(Error::EmptyTable("no rows to compute missing rates on".into()));
    }
    let n = t.n_rows() as f64;
    let mut keep = Vec::new();
    let mut dropped = Vec::new();
    for (j, spec) in t.columns.iter().enumerate() {
        let missing = t.rows.iter().filter(|r| r[j].is_missing()).count();
        let rate = missing as f64 / n;
        // compared as counts so that e.g. 5/100 against 0.05 is exact
        if (missing as f64) < threshold * n {
            keep.push(j);
        } else {
            dropped.push(DroppedColumn {
                name: spec.name.clone(),
                missing_rate: rate,
            });
        }
    }
    if keep.is_empty() {
        return Err(Error::EmptyTable(format!(
            "every column has a missing rate of at least {threshold}"
        )));
    }
    Ok((t.select_columns(&keep), dropped))
}

/// Keeps only the rows without a missing cell. Returns the number dropped.
pub fn drop_incomplete_rows(t: &RawTable) -> Result<(RawTable, usize)> {
    let keep: Vec<usize> = (0..t.n_rows())
        .filter(|&i| t.rows[i].iter().all(|c| !c.is_missing()))
        .collect();
    if keep.is_empty() {
        return Err(Error::EmptyTable("every row has a missing cell".into()));
    }
    let dropped = t.n_rows() - keep.len();
    Ok((t.select_rows(&keep), dropped))
}

/// Column filter followed by row exclusion.
pub fn clean_table(t: &RawTable, threshold: f64) -> Result<(RawTable, PreprocessReport)> {
    let (filtered, dropped_columns) = filter_missing_columns(t, threshold)?;
    let (clean, rows_dropped) = drop_incomplete_rows(&filtered)?;
    let mut class_distribution = BTreeMap::new();
    if clean.has_targets() {
        for l in clean.labels()? {
            *class_distribution.entry(l.name().to_string()).or_insert(0) += 1;
        }
    }
    let report = PreprocessReport {
        threshold,
        input_rows: t.n_rows(),
        input_columns: t.n_cols(),
        dropped_columns,
        rows_dropped,
        final_rows: clean.n_rows(),
        final_columns: clean.n_cols(),
        final_features: None,
        class_distribution,
    };
    Ok((clean, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::table::{Cell, ColumnSpec};

    fn column_with_missing(missing: usize, n: usize) -> RawTable {
        let rows = (0..n)
            .map(|i| {
                vec![
                    if i < missing { Cell::Missing } else { Cell::Number(i as f64) },
                    Cell::Number(1.0),
                ]
            })
            .collect();
        RawTable::new(vec![ColumnSpec::continuous("a"), ColumnSpec::continuous("b")], rows).unwrap()
    }

    #[test]
    fn threshold_is_strict() {
        let (t, dropped) = filter_missing_columns(&column_with_missing(6, 100), 0.05).unwrap();
        assert_eq!(t.n_cols(), 1);
        assert_eq!(dropped[0].name, "a");
        let (t, _) = filter_missing_columns(&column_with_missing(5, 100), 0.05).unwrap();
        assert_eq!(t.columns[0].name, "b");
        let (t, dropped) = filter_missing_columns(&column_with_missing(4, 100), 0.05).unwrap();
        assert_eq!(t.n_cols(), 2);
        assert!(dropped.is_empty());
        let (t, _) = filter_missing_columns(&column_with_missing(0, 100), 0.05).unwrap();
        assert_eq!(t.n_cols(), 2);
    }

    #[test]
    fn all_columns_dropped_is_an_error() {
        let t = RawTable::new(vec![ColumnSpec::continuous("a")], vec![vec![Cell::Missing]]).unwrap();
        assert!(matches!(filter_missing_columns(&t, 0.05), Err(Error::EmptyTable(_))));
        assert!(filter_missing_columns(&t, 0.0).is_err());
    }

    #[test]
    fn rows_with_any_missing_cell_are_dropped() {
        let cols = vec![ColumnSpec::continuous("a"), ColumnSpec::continuous("b"), ColumnSpec::continuous("c")];
        let rows = vec![
            vec![Cell::Number(1.0), Cell::Number(2.0), Cell::Number(3.0)],
            vec![Cell::Missing, Cell::Number(2.0), Cell::Number(3.0)],
            vec![Cell::Missing, Cell::Missing, Cell::Number(3.0)],
        ];
        let t = RawTable::new(cols, rows).unwrap();
        let (kept, dropped) = drop_incomplete_rows(&t).unwrap();
        assert_eq!((kept.n_rows(), dropped), (1, 2));
        let (same, none) = drop_incomplete_rows(&kept).unwrap();
        assert_eq!((same, none), (kept, 0));
    }
}

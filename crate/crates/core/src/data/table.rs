use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::{dutch_score_to_label, FHLabel};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ColumnKind {
    Categorical { categories: Vec<String> },
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn continuous(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn categorical<S: Into<String>>(name: impl Into<String>, categories: impl IntoIterator<Item = S>) -> Self {
        Self {
            name: name.into(),
            kind: ColumnKind::Categorical {
                categories: categories.into_iter().map(Into::into).collect(),
            },
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Missing,
    Category(String),
    Number(f64),
}

impl Cell {
    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }
}

/// A typed table of features with optional Dutch score and label columns.
#[derive(Debug, Clone, PartialEq)]
pub struct RawTable {
    pub columns: Vec<ColumnSpec>,
    pub rows: Vec<Vec<Cell>>,
    pub dutch_score: Option<Vec<f64>>,
    /// Explicit labels; when absent they are derived from `dutch_score`.
    pub labels: Option<Vec<FHLabel>>,
}

impl RawTable {
    /// Builds a table and checks the row/cell invariants.
    pub fn new(columns: Vec<ColumnSpec>, rows: Vec<Vec<Cell>>) -> Result<Self> {
        let t = Self {
            columns,
            rows,
            dutch_score: None,
            labels: None,
        };
        t.validate()?;
        Ok(t)
    }

    /// All-continuous table over the columns of `x`, named `x0, x1, ...`.
    pub fn from_matrix(x: &crate::numeric::Matrix) -> Result<Self> {
        let columns = (0..x.cols()).map(|j| ColumnSpec::continuous(format!("x{j}"))).collect();
        let rows = (0..x.rows())
            .map(|r| x.row(r).iter().map(|&v| Cell::Number(v)).collect())
            .collect();
        Self::new(columns, rows)
    }

    pub fn with_scores(mut self, scores: Vec<f64>) -> Result<Self> {
        self.dutch_score = Some(scores);
        self.validate()?;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<FHLabel>) -> Result<Self> {
        self.labels = Some(labels);
        self.validate()?;
        Ok(self)
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn validate(&self) -> Result<()> {
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != self.columns.len() {
                return Err(Error::Schema(format!(
                    "row {r} has {} cells for {} columns",
                    row.len(),
                    self.columns.len()
                )));
            }
            for (cell, spec) in row.iter().zip(&self.columns) {
                match (cell, &spec.kind) {
                    (Cell::Missing, _) => {}
                    (Cell::Number(v), ColumnKind::Continuous) if v.is_finite() => {}
                    (Cell::Category(v), ColumnKind::Categorical { categories })
                        if categories.contains(v) => {}
                    _ => {
                        return Err(Error::Schema(format!(
                            "row {r}, column `{}`: {cell:?} does not fit the column kind",
                            spec.name
                        )))
                    }
                }
            }
        }
        if let Some(s) = &self.dutch_score {
            if s.len() != self.rows.len() {
                return Err(Error::Schema("score column length differs from row count".into()));
            }
        }
        if let Some(l) = &self.labels {
            if l.len() != self.rows.len() {
                return Err(Error::Schema("label column length differs from row count".into()));
            }
        }
        Ok(())
    }

    /// Labels from the explicit column, else from the Dutch scores.
    pub fn labels(&self) -> Result<Vec<FHLabel>> {
        if let Some(l) = &self.labels {
            return Ok(l.clone());
        }
        let scores = self
            .dutch_score
            .as_ref()
            .ok_or_else(|| Error::Input("table has neither labels nor Dutch scores".into()))?;
        scores.iter().map(|&s| dutch_score_to_label(s)).collect()
    }

    pub fn has_targets(&self) -> bool {
        self.labels.is_some() || self.dutch_score.is_some()
    }

    /// Keeps the listed rows, in order, together with their targets.
    pub fn select_rows(&self, indices: &[usize]) -> RawTable {
        RawTable {
            columns: self.columns.clone(),
            rows: indices.iter().map(|&i| self.rows[i].clone()).collect(),
            dutch_score: self
                .dutch_score
                .as_ref()
                .map(|s| indices.iter().map(|&i| s[i]).collect()),
            labels: self
                .labels
                .as_ref()
                .map(|l| indices.iter().map(|&i| l[i]).collect()),
        }
    }

    /// Keeps the listed columns, in order.
    pub fn select_columns(&self, indices: &[usize]) -> RawTable {
        RawTable {
            columns: indices.iter().map(|&i| self.columns[i].clone()).collect(),
            rows: self
                .rows
                .iter()
                .map(|row| indices.iter().map(|&i| row[i].clone()).collect())
                .collect(),
            dutch_score: self.dutch_score.clone(),
            labels: self.labels.clone(),
        }
    }

    pub fn missing_count(&self) -> usize {
        self.rows
            .iter()
            .map(|r| r.iter().filter(|c| c.is_missing()).count())
            .sum()
    }
}

//! One-hot expansion of categorical columns and standardization of continuous ones.
//!
//! Statistics are fitted on one table (the training rows) and replayed on any
//! other table, so transforms never see held-out data.

use serde::{Deserialize, Serialize};

use super::table::{Cell, ColumnKind, RawTable};
use crate::encoder::exact;
use crate::error::{Error, Result};
use crate::numeric::Matrix;

/// Where an encoded matrix column comes from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub source: String,
    /// Category level for one-hot columns, `None` for continuous columns.
    pub level: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum EncodedColumn {
    Categorical {
        name: String,
        levels: Vec<String>,
    },
    Continuous {
        name: String,
        #[serde(with = "exact")]
        mean: f64,
        #[serde(with = "exact")]
        std: f64,
    },
}

impl EncodedColumn {
    pub fn name(&self) -> &str {
        match self {
            EncodedColumn::Categorical { name, .. } | EncodedColumn::Continuous { name, .. } => name,
        }
    }

    fn width(&self) -> usize {
        match self {
            EncodedColumn::Categorical { levels, .. } => levels.len(),
            EncodedColumn::Continuous { .. } => 1,
        }
    }
}

/// Fitted encoding: declared levels plus standardization statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEncoding {
    pub columns: Vec<EncodedColumn>,
}

/// Encoded features together with the encoding that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub matrix: Matrix,
    pub manifest: Vec<ManifestEntry>,
    pub encoding: FeatureEncoding,
}

impl FeatureEncoding {
    /// Fits on a table with no missing cells. Continuous columns use the
    /// population standard deviation; a constant column gets `std = 1`.
    pub fn fit(t: &RawTable) -> Result<Self> {
        if t.n_rows() == 0 {
            return Err(Error::EmptyTable("cannot fit an encoding on zero rows".into()));
        }
        let mut columns = Vec::with_capacity(t.n_cols());
        for (j, spec) in t.columns.iter().enumerate() {
            match &spec.kind {
                ColumnKind::Categorical { categories } => {
                    for (r, row) in t.rows.iter().enumerate() {
                        match &row[j] {
                            Cell::Category(v) if categories.contains(v) => {}
                            Cell::Missing => {
                                return Err(Error::Schema(format!(
                                    "row {r}, column `{}` is missing; clean the table first",
                                    spec.name
                                )))
                            }
                            other => {
                                return Err(Error::Schema(format!(
                                    "row {r}, column `{}`: undeclared category {other:?}",
                                    spec.name
                                )))
                            }
                        }
                    }
                    columns.push(EncodedColumn::Categorical {
                        name: spec.name.clone(),
                        levels: categories.clone(),
                    });
                }
                ColumnKind::Continuous => {
                    let mut values = Vec::with_capacity(t.n_rows());
                    for (r, row) in t.rows.iter().enumerate() {
                        match row[j] {
                            Cell::Number(v) => values.push(v),
                            _ => {
                                return Err(Error::Schema(format!(
                                    "row {r}, column `{}` needs a number",
                                    spec.name
                                )))
                            }
                        }
                    }
                    let n = values.len() as f64;
                    let mean = values.iter().sum::<f64>() / n;
                    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let std = if var > 0.0 { var.sqrt() } else { 1.0 };
                    columns.push(EncodedColumn::Continuous {
                        name: spec.name.clone(),
                        mean,
                        std,
                    });
                }
            }
        }
        Ok(Self { columns })
    }

    pub fn width(&self) -> usize {
        self.columns.iter().map(EncodedColumn::width).sum()
    }

    pub fn manifest(&self) -> Vec<ManifestEntry> {
        let mut out = Vec::with_capacity(self.width());
        for c in &self.columns {
            match c {
                EncodedColumn::Categorical { name, levels } => {
                    out.extend(levels.iter().map(|l| ManifestEntry {
                        source: name.clone(),
                        level: Some(l.clone()),
                    }));
                }
                EncodedColumn::Continuous { name, .. } => out.push(ManifestEntry {
                    source: name.clone(),
                    level: None,
                }),
            }
        }
        out
    }

    /// Encodes `t`, matching columns by name. Values outside the fitted
    /// levels encode as an all-zero block.
    pub fn transform(&self, t: &RawTable) -> Result<FeatureMatrix> {
        let mut positions = Vec::with_capacity(self.columns.len());
        let mut absent = Vec::new();
        for c in &self.columns {
            match t.column_index(c.name()) {
                Some(p) => positions.push(p),
                None => absent.push(c.name().to_string()),
            }
        }
        if !absent.is_empty() {
            return Err(Error::Schema(format!(
                "input lacks columns required by the encoding: {}",
                absent.join(", ")
            )));
        }
        let width = self.width();
        let mut matrix = Matrix::zeros(t.n_rows(), width);
        for (r, row) in t.rows.iter().enumerate() {
            let out = matrix.row_mut(r);
            let mut offset = 0;
            for (c, &p) in self.columns.iter().zip(&positions) {
                match (c, &row[p]) {
                    (EncodedColumn::Categorical { levels, .. }, Cell::Category(v)) => {
                        if let Some(k) = levels.iter().position(|l| l == v) {
                            out[offset + k] = 1.0;
                        }
                    }
                    (EncodedColumn::Continuous { mean, std, .. }, Cell::Number(v)) => {
                        out[offset] = (v - mean) / std;
                    }
                    (_, cell) => {
                        return Err(Error::Schema(format!(
                            "row {r}, column `{}`: cannot encode {cell:?}",
                            c.name()
                        )))
                    }
                }
                offset += c.width();
            }
        }
        Ok(FeatureMatrix {
            matrix,
            manifest: self.manifest(),
            encoding: self.clone(),
        })
    }
}

/// Fits the encoding on `t` and applies it to `t`.
pub fn one_hot_encode(t: &RawTable) -> Result<FeatureMatrix> {
    FeatureEncoding::fit(t)?.transform(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::table::ColumnSpec;

    fn toy() -> RawTable {
        RawTable::new(
            vec![
                ColumnSpec::categorical("grade", ["a", "b", "c"]),
                ColumnSpec::categorical("flag", ["no", "yes"]),
                ColumnSpec::continuous("x"),
            ],
            vec![
                vec![Cell::Category("b".into()), Cell::Category("yes".into()), Cell::Number(1.0)],
                vec![Cell::Category("a".into()), Cell::Category("no".into()), Cell::Number(3.0)],
            ],
        )
        .unwrap()
    }

    #[test]
    fn widths_and_blocks() {
        let fm = one_hot_encode(&toy()).unwrap();
        assert_eq!(fm.matrix.cols(), 6);
        assert_eq!(fm.manifest.len(), 6);
        assert_eq!(&fm.matrix.row(0)[..5], &[0.0, 1.0, 0.0, 0.0, 1.0]);
        assert_eq!(fm.matrix.get(0, 5), -1.0);
        assert_eq!(fm.matrix.get(1, 5), 1.0);
        assert_eq!(fm.manifest[1], ManifestEntry { source: "grade".into(), level: Some("b".into()) });
        assert_eq!(fm.manifest[5].level, None);
    }

    #[test]
    fn out_of_vocabulary_encodes_to_zero_block() {
        let enc = FeatureEncoding::fit(&toy()).unwrap();
        let mut other = toy();
        if let ColumnKind::Categorical { categories } = &mut other.columns[0].kind {
            categories.push("z".into());
        }
        other.rows[0][0] = Cell::Category("z".into());
        let fm = enc.transform(&other).unwrap();
        assert_eq!(&fm.matrix.row(0)[..3], &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn fit_rejects_undeclared_and_missing() {
        let mut t = toy();
        t.rows[0][0] = Cell::Category("zz".into());
        assert!(matches!(FeatureEncoding::fit(&t), Err(Error::Schema(_))));
        let mut t = toy();
        t.rows[1][2] = Cell::Missing;
        assert!(FeatureEncoding::fit(&t).is_err());
    }

    #[test]
    fn transform_names_missing_columns() {
        let enc = FeatureEncoding::fit(&toy()).unwrap();
        let t = toy().select_columns(&[0]);
        let err = enc.transform(&t).unwrap_err().to_string();
        assert!(err.contains("flag") && err.contains('x'));
    }
}

//! Typed tabular data and causal role binding.
//!
//! A [`Dataset`] is an immutable, column-oriented table of categorical and
//! continuous columns. Binding it to a [`RoleSchema`] yields a
//! [`RoledDataset`] that knows which column is the sensitive attribute, the
//! outcome, the confounders and the mediators; [`encode`] turns that into
//! numeric design matrices.

mod encode;
mod load;
pub mod presets;
mod roles;
mod split;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use encode::{encode, DesignBlock, EncodedView, FeatureInfo, FeatureRole, FeatureSource};
pub use load::{load_csv, write_csv};
pub use roles::{bind_roles, LevelSet, RoleSchema, RoledDataset};
pub use split::{split_stratified, StratifiedSplit};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ColumnKind {
    /// Levels in code order. An empty list in a declaration means "infer from
    /// the data" (sorted lexicographically).
    Categorical {
        #[serde(default)]
        levels: Vec<String>,
    },
    Continuous,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ColumnSpec {
    pub name: String,
    #[serde(flatten)]
    pub kind: ColumnKind,
}

impl ColumnSpec {
    pub fn categorical(name: impl Into<String>, levels: &[&str]) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Categorical {
                levels: levels.iter().map(|s| s.to_string()).collect(),
            },
        }
    }

    pub fn continuous(name: impl Into<String>) -> Self {
        ColumnSpec {
            name: name.into(),
            kind: ColumnKind::Continuous,
        }
    }

    pub fn levels(&self) -> Option<&[String]> {
        match &self.kind {
            ColumnKind::Categorical { levels } => Some(levels),
            ColumnKind::Continuous => None,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self.kind, ColumnKind::Categorical { .. })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ColumnData {
    /// Level codes indexing into the column's level list.
    Categorical(Vec<u32>),
    Continuous(Vec<f64>),
}

impl ColumnData {
    pub fn len(&self) -> usize {
        match self {
            ColumnData::Categorical(v) => v.len(),
            ColumnData::Continuous(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn take(&self, rows: &[usize]) -> ColumnData {
        match self {
            ColumnData::Categorical(v) => ColumnData::Categorical(rows.iter().map(|&r| v[r]).collect()),
            ColumnData::Continuous(v) => ColumnData::Continuous(rows.iter().map(|&r| v[r]).collect()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub spec: ColumnSpec,
    pub data: ColumnData,
}

impl Column {
    pub fn name(&self) -> &str {
        &self.spec.name
    }

    pub fn codes(&self) -> Option<&[u32]> {
        match &self.data {
            ColumnData::Categorical(c) => Some(c),
            ColumnData::Continuous(_) => None,
        }
    }

    pub fn values(&self) -> Option<&[f64]> {
        match &self.data {
            ColumnData::Continuous(v) => Some(v),
            ColumnData::Categorical(_) => None,
        }
    }

    /// Text rendering of one cell.
    pub fn cell_text(&self, row: usize) -> String {
        match (&self.data, &self.spec.kind) {
            (ColumnData::Categorical(c), ColumnKind::Categorical { levels }) => levels[c[row] as usize].clone(),
            (ColumnData::Continuous(v), _) => format_number(v[row]),
            _ => unreachable!("column kind and data disagree"),
        }
    }
}

fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}

/// Immutable rectangular table with stable row identifiers.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    columns: Vec<Column>,
    row_ids: Vec<usize>,
    dropped_rows: usize,
}

impl Dataset {
    /// Build a dataset, validating shape and column invariants. Row ids are
    /// assigned `0..n`.
    pub fn new(columns: Vec<Column>) -> Result<Self> {
        let n = columns.first().map(|c| c.data.len()).unwrap_or(0);
        let ds = Dataset {
            row_ids: (0..n).collect(),
            columns,
            dropped_rows: 0,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub(crate) fn with_dropped(mut self, dropped: usize) -> Self {
        self.dropped_rows = dropped;
        self
    }

    fn validate(&self) -> Result<()> {
        if self.columns.is_empty() {
            return Err(Error::Schema("dataset has no columns".into()));
        }
        let n = self.row_ids.len();
        if n == 0 {
            return Err(Error::Schema("dataset has no rows".into()));
        }
        let mut seen = std::collections::HashSet::new();
        for col in &self.columns {
            if !seen.insert(col.name()) {
                return Err(Error::Schema(format!("duplicate column '{}'", col.name())));
            }
            if col.data.len() != n {
                return Err(Error::Schema(format!(
                    "column '{}' has {} values, expected {n}",
                    col.name(),
                    col.data.len()
                )));
            }
            match (&col.spec.kind, &col.data) {
                (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
                    if levels.is_empty() {
                        return Err(Error::Schema(format!("column '{}' has no levels", col.name())));
                    }
                    let mut uniq = std::collections::HashSet::new();
                    if !levels.iter().all(|l| uniq.insert(l)) {
                        return Err(Error::Schema(format!("column '{}' has duplicate levels", col.name())));
                    }
                    if let Some(pos) = codes.iter().position(|&c| c as usize >= levels.len()) {
                        return Err(Error::Row {
                            row: pos + 1,
                            message: format!("column '{}': level code out of range", col.name()),
                        });
                    }
                }
                (ColumnKind::Continuous, ColumnData::Continuous(values)) => {
                    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
                        return Err(Error::Row {
                            row: pos + 1,
                            message: format!("column '{}': non-finite value", col.name()),
                        });
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "column '{}': declared kind does not match its data",
                        col.name()
                    )))
                }
            }
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_specs(&self) -> Vec<ColumnSpec> {
        self.columns.iter().map(|c| c.spec.clone()).collect()
    }

    /// Rows dropped at load because of missing cells.
    pub fn dropped_rows(&self) -> usize {
        self.dropped_rows
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name() == name)
    }

    pub fn column(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.name() == name)
    }

    /// Sub-table with the given rows (positions, not ids); row ids carry over.
    pub fn take_rows(&self, rows: &[usize]) -> Dataset {
        Dataset {
            columns: self
                .columns
                .iter()
                .map(|c| Column {
                    spec: c.spec.clone(),
                    data: c.data.take(rows),
                })
                .collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
            dropped_rows: self.dropped_rows,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_ragged_columns() {
        let cols = vec![
            Column {
                spec: ColumnSpec::continuous("a"),
                data: ColumnData::Continuous(vec![1.0, 2.0]),
            },
            Column {
                spec: ColumnSpec::continuous("b"),
                data: ColumnData::Continuous(vec![1.0]),
            },
        ];
        assert!(matches!(Dataset::new(cols), Err(Error::Schema(_))));
    }

    #[test]
    fn rejects_non_finite_continuous() {
        let cols = vec![Column {
            spec: ColumnSpec::continuous("a"),
            data: ColumnData::Continuous(vec![1.0, f64::NAN]),
        }];
        assert!(matches!(Dataset::new(cols), Err(Error::Row { row: 2, .. })));
    }

    #[test]
    fn column_spec_json_shape() {
        let spec: ColumnSpec = serde_json::from_str(r#"{"name":"sex","kind":"categorical","levels":["F","M"]}"#).unwrap();
        assert_eq!(spec, ColumnSpec::categorical("sex", &["F", "M"]));
        let spec: ColumnSpec = serde_json::from_str(r#"{"name":"age","kind":"continuous"}"#).unwrap();
        assert_eq!(spec, ColumnSpec::continuous("age"));
    }
}

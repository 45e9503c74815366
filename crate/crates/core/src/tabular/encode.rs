use ndarray::{Array2, Axis};
use serde::Serialize;

use super::{ColumnData, ColumnKind, RoledDataset};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureRole {
    Sensitive,
    Confounder,
    Mediator,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum FeatureSource {
    /// 1 if the row's sensitive level is in s2, else 0.
    SensitiveIndicator { column: String },
    /// Continuous column passed through unchanged.
    Identity { column: String },
    /// One-hot indicator of a categorical level.
    Level { column: String, level: String },
}

impl FeatureSource {
    pub fn column(&self) -> &str {
        match self {
            FeatureSource::SensitiveIndicator { column }
            | FeatureSource::Identity { column }
            | FeatureSource::Level { column, .. } => column,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct FeatureInfo {
    pub name: String,
    pub source: FeatureSource,
    pub role: FeatureRole,
}

/// One numeric design matrix with its column map.
///
/// Column 0 is always the sensitive indicator, followed by the confounder
/// block and then the mediator block.
#[derive(Clone, Debug)]
pub struct DesignBlock {
    pub matrix: Array2<f64>,
    pub features: Vec<FeatureInfo>,
    pub confounder_cols: Vec<usize>,
    pub mediator_cols: Vec<usize>,
}

impl DesignBlock {
    pub const SENSITIVE_COL: usize = 0;

    pub fn names(&self) -> Vec<String> {
        self.features.iter().map(|f| f.name.clone()).collect()
    }

    /// Columns for the given role subset, in design order.
    pub fn columns_for(&self, sensitive: bool, confounders: bool, mediators: bool) -> Vec<usize> {
        let mut cols = Vec::new();
        if sensitive {
            cols.push(Self::SENSITIVE_COL);
        }
        if confounders {
            cols.extend(&self.confounder_cols);
        }
        if mediators {
            cols.extend(&self.mediator_cols);
        }
        cols
    }

    pub fn select(&self, cols: &[usize]) -> (Array2<f64>, Vec<String>) {
        (
            self.matrix.select(Axis(1), cols),
            cols.iter().map(|&c| self.features[c].name.clone()).collect(),
        )
    }

    fn take_rows(&self, rows: &[usize]) -> DesignBlock {
        DesignBlock {
            matrix: self.matrix.select(Axis(0), rows),
            features: self.features.clone(),
            confounder_cols: self.confounder_cols.clone(),
            mediator_cols: self.mediator_cols.clone(),
        }
    }
}

/// Numeric encodings of a [`RoledDataset`].
///
/// `tree` one-hot encodes every categorical level (for tree learners);
/// `linear` drops the first level of each categorical (for linear learners).
/// Continuous columns are passed through unscaled in both.
#[derive(Clone, Debug)]
pub struct EncodedView {
    pub tree: DesignBlock,
    pub linear: DesignBlock,
    pub is_s2: Vec<bool>,
    pub y: Vec<f64>,
    pub row_ids: Vec<usize>,
    pub binary_outcome: bool,
}

impl EncodedView {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    /// Rows at the given positions; duplicates are allowed (bootstrap), in
    /// which case row ids repeat.
    pub fn take_rows(&self, rows: &[usize]) -> EncodedView {
        EncodedView {
            tree: self.tree.take_rows(rows),
            linear: self.linear.take_rows(rows),
            is_s2: rows.iter().map(|&r| self.is_s2[r]).collect(),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            row_ids: rows.iter().map(|&r| self.row_ids[r]).collect(),
            binary_outcome: self.binary_outcome,
        }
    }

    pub fn block(&self, linear: bool) -> &DesignBlock {
        if linear {
            &self.linear
        } else {
            &self.tree
        }
    }
}

fn build_block(data: &RoledDataset, drop_first: bool) -> DesignBlock {
    let n = data.n();
    let cols = data.data().columns();
    let mut features = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();

    let sens = &cols[data.sensitive_index()];
    features.push(FeatureInfo {
        name: format!("{}:s2", sens.name()),
        source: FeatureSource::SensitiveIndicator {
            column: sens.name().to_string(),
        },
        role: FeatureRole::Sensitive,
    });
    values.push(data.is_s2().iter().map(|&b| if b { 1.0 } else { 0.0 }).collect());

    let mut confounder_cols = Vec::new();
    let mut mediator_cols = Vec::new();
    for (role, indices) in [
        (FeatureRole::Confounder, data.confounder_indices()),
        (FeatureRole::Mediator, data.mediator_indices()),
    ] {
        for &ci in indices {
            let col = &cols[ci];
            let start = features.len();
            match (&col.spec.kind, &col.data) {
                (ColumnKind::Continuous, ColumnData::Continuous(v)) => {
                    features.push(FeatureInfo {
                        name: col.name().to_string(),
                        source: FeatureSource::Identity {
                            column: col.name().to_string(),
                        },
                        role,
                    });
                    values.push(v.clone());
                }
                (ColumnKind::Categorical { levels }, ColumnData::Categorical(codes)) => {
                    let skip = usize::from(drop_first);
                    for (k, level) in levels.iter().enumerate().skip(skip) {
                        features.push(FeatureInfo {
                            name: format!("{}={}", col.name(), level),
                            source: FeatureSource::Level {
                                column: col.name().to_string(),
                                level: level.clone(),
                            },
                            role,
                        });
                        values.push(codes.iter().map(|&c| if c as usize == k { 1.0 } else { 0.0 }).collect());
                    }
                }
                _ => unreachable!("validated dataset"),
            }
            let range = start..features.len();
            match role {
                FeatureRole::Confounder => confounder_cols.extend(range),
                _ => mediator_cols.extend(range),
            }
        }
    }

    let p = values.len();
    let matrix = Array2::from_shape_fn((n, p), |(i, j)| values[j][i]);
    DesignBlock {
        matrix,
        features,
        confounder_cols,
        mediator_cols,
    }
}

/// Encode a bound dataset into tree-learner and linear-learner design views.
pub fn encode(data: &RoledDataset) -> EncodedView {
    EncodedView {
        tree: build_block(data, false),
        linear: build_block(data, true),
        is_s2: data.is_s2().to_vec(),
        y: data.y().to_vec(),
        row_ids: data.row_ids().to_vec(),
        binary_outcome: data.binary_outcome(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{bind_roles, Column, ColumnSpec, Dataset, LevelSet, RoleSchema};
    use proptest::prelude::*;

    fn bound(codes: Vec<u32>, ages: Vec<f64>) -> RoledDataset {
        let n = codes.len();
        let ds = Dataset::new(vec![
            Column {
                spec: ColumnSpec::categorical("s", &["a", "b"]),
                data: ColumnData::Categorical((0..n).map(|i| (i % 2) as u32).collect()),
            },
            Column {
                spec: ColumnSpec::categorical("c", &["a", "b", "c"]),
                data: ColumnData::Categorical(codes),
            },
            Column {
                spec: ColumnSpec::continuous("age"),
                data: ColumnData::Continuous(ages),
            },
            Column {
                spec: ColumnSpec::categorical("y", &["0", "1"]),
                data: ColumnData::Categorical((0..n).map(|i| ((i / 2) % 2) as u32).collect()),
            },
        ])
        .unwrap();
        bind_roles(
            ds,
            &RoleSchema {
                sensitive: "s".into(),
                s1_levels: LevelSet::Listed(vec!["a".into()]),
                outcome: "y".into(),
                positive_level: Some("1".into()),
                confounders: vec!["age".into()],
                mediators: vec!["c".into()],
                columns: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn one_hot_and_identity() {
        let r = bound(vec![1, 0, 2, 1], vec![39.0, 20.0, 30.0, 41.5]);
        let e = encode(&r);
        assert_eq!(e.tree.names(), vec!["s:s2", "age", "c=a", "c=b", "c=c"]);
        assert_eq!(e.linear.names(), vec!["s:s2", "age", "c=b", "c=c"]);
        // row 0 has level b
        assert_eq!(e.tree.matrix.row(0).to_vec(), vec![0.0, 39.0, 0.0, 1.0, 0.0]);
        assert_eq!(e.tree.matrix[[1, 0]], 1.0);
        assert_eq!(e.tree.confounder_cols, vec![1]);
        assert_eq!(e.tree.mediator_cols, vec![2, 3, 4]);
    }

    proptest! {
        #[test]
        fn one_hot_blocks_sum_to_one(codes in proptest::collection::vec(0u32..3, 2..60)) {
            let n = codes.len();
            let r = bound(codes, (0..n).map(|i| i as f64).collect());
            let e = encode(&r);
            prop_assert_eq!(e.n(), n);
            prop_assert_eq!(&e.row_ids, r.row_ids());
            for i in 0..n {
                let s: f64 = e.tree.mediator_cols.iter().map(|&c| e.tree.matrix[[i, c]]).sum();
                prop_assert_eq!(s, 1.0);
                let lin: f64 = e.linear.mediator_cols.iter().map(|&c| e.linear.matrix[[i, c]]).sum();
                prop_assert!(lin == 0.0 || lin == 1.0);
                let ind = e.tree.matrix[[i, 0]];
                prop_assert_eq!(ind, if r.is_s2()[i] { 1.0 } else { 0.0 });
            }
        }
    }
}

use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ColumnKind, ColumnSpec, Dataset};
use crate::error::{Error, Result};

/// Which levels of the sensitive column form the baseline category s1.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelSet {
    Listed(Vec<String>),
    /// Every observed level except the listed ones.
    AllExcept { all_except: Vec<String> },
}

/// Binding of dataset columns to causal roles.
///
/// `s1_levels` is the baseline (marginalised) category; s2 is its complement.
/// A categorical outcome must have exactly two levels and name the positive
/// one; a continuous outcome (used with simulated data) has no positive
/// level.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RoleSchema {
    pub sensitive: String,
    pub s1_levels: LevelSet,
    pub outcome: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub positive_level: Option<String>,
    pub confounders: Vec<String>,
    pub mediators: Vec<String>,
    /// Optional explicit column declarations used when loading the CSV.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub columns: Vec<ColumnSpec>,
}

impl RoleSchema {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn column_specs(&self) -> Option<&[ColumnSpec]> {
        if self.columns.is_empty() {
            None
        } else {
            Some(&self.columns)
        }
    }

    fn check_disjoint(&self) -> Result<()> {
        let mut seen = HashSet::new();
        let all = std::iter::once(&self.sensitive)
            .chain(std::iter::once(&self.outcome))
            .chain(&self.confounders)
            .chain(&self.mediators);
        for name in all {
            if !seen.insert(name.as_str()) {
                return Err(Error::Schema(format!("column '{name}' is assigned to more than one role")));
            }
        }
        Ok(())
    }
}

/// A dataset whose columns are bound to causal roles.
///
/// Per row it exposes the sensitive category (`is_s2`), the numeric outcome
/// (`y`, 1.0 for the positive level of a binary outcome) and the column
/// indices of confounders and mediators.
#[derive(Clone, Debug)]
pub struct RoledDataset {
    data: Dataset,
    schema: RoleSchema,
    s1_levels: Vec<String>,
    s2_levels: Vec<String>,
    is_s2: Vec<bool>,
    y: Vec<f64>,
    binary_outcome: bool,
    sensitive_idx: usize,
    outcome_idx: usize,
    confounder_idx: Vec<usize>,
    mediator_idx: Vec<usize>,
}

/// Validate `schema` against `data` and bind the roles.
pub fn bind_roles(data: Dataset, schema: &RoleSchema) -> Result<RoledDataset> {
    schema.check_disjoint()?;
    let lookup = |name: &str| {
        data.column_index(name)
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found")))
    };
    let sensitive_idx = lookup(&schema.sensitive)?;
    let outcome_idx = lookup(&schema.outcome)?;
    let confounder_idx = schema.confounders.iter().map(|c| lookup(c)).collect::<Result<Vec<_>>>()?;
    let mediator_idx = schema.mediators.iter().map(|c| lookup(c)).collect::<Result<Vec<_>>>()?;

    let sens_col = &data.columns()[sensitive_idx];
    let levels = sens_col
        .spec
        .levels()
        .ok_or_else(|| Error::Schema(format!("sensitive column '{}' must be categorical", schema.sensitive)))?
        .to_vec();
    let s1_levels: Vec<String> = match &schema.s1_levels {
        LevelSet::Listed(listed) => {
            for l in listed {
                if !levels.contains(l) {
                    return Err(Error::Schema(format!("s1 level '{l}' is not a level of '{}'", schema.sensitive)));
                }
            }
            levels.iter().filter(|l| listed.contains(l)).cloned().collect()
        }
        LevelSet::AllExcept { all_except } => {
            for l in all_except {
                if !levels.contains(l) {
                    return Err(Error::Schema(format!("level '{l}' is not a level of '{}'", schema.sensitive)));
                }
            }
            levels.iter().filter(|l| !all_except.contains(l)).cloned().collect()
        }
    };
    if s1_levels.is_empty() || s1_levels.len() == levels.len() {
        return Err(Error::Schema("s1 levels must be a strict non-empty subset of the sensitive levels".into()));
    }
    let s2_levels: Vec<String> = levels.iter().filter(|l| !s1_levels.contains(l)).cloned().collect();
    let s2_code: Vec<bool> = levels.iter().map(|l| s2_levels.contains(l)).collect();
    let is_s2: Vec<bool> = sens_col
        .codes()
        .expect("categorical")
        .iter()
        .map(|&c| s2_code[c as usize])
        .collect();

    let out_col = &data.columns()[outcome_idx];
    let (y, binary_outcome) = match (&out_col.spec.kind, &schema.positive_level) {
        (ColumnKind::Categorical { levels }, Some(pos)) => {
            if levels.len() != 2 {
                return Err(Error::Schema(format!(
                    "outcome '{}' is not binary ({} levels)",
                    schema.outcome,
                    levels.len()
                )));
            }
            let pos_code = levels
                .iter()
                .position(|l| l == pos)
                .ok_or_else(|| Error::Schema(format!("positive level '{pos}' is not a level of '{}'", schema.outcome)))?;
            let y = out_col
                .codes()
                .expect("categorical")
                .iter()
                .map(|&c| if c as usize == pos_code { 1.0 } else { 0.0 })
                .collect();
            (y, true)
        }
        (ColumnKind::Categorical { .. }, None) => {
            return Err(Error::Schema(format!("categorical outcome '{}' needs a positive_level", schema.outcome)))
        }
        (ColumnKind::Continuous, None) => (out_col.values().expect("continuous").to_vec(), false),
        (ColumnKind::Continuous, Some(_)) => {
            return Err(Error::Schema(format!(
                "outcome '{}' is continuous; positive_level applies to binary outcomes only",
                schema.outcome
            )))
        }
    };

    let n2 = is_s2.iter().filter(|&&b| b).count();
    if n2 == 0 {
        return Err(Error::EmptyGroup("no rows in s2".into()));
    }
    if n2 == is_s2.len() {
        return Err(Error::EmptyGroup("no rows in s1".into()));
    }

    Ok(RoledDataset {
        data,
        schema: schema.clone(),
        s1_levels,
        s2_levels,
        is_s2,
        y,
        binary_outcome,
        sensitive_idx,
        outcome_idx,
        confounder_idx,
        mediator_idx,
    })
}

impl RoledDataset {
    pub fn n(&self) -> usize {
        self.is_s2.len()
    }

    pub fn data(&self) -> &Dataset {
        &self.data
    }

    pub fn schema(&self) -> &RoleSchema {
        &self.schema
    }

    pub fn row_ids(&self) -> &[usize] {
        self.data.row_ids()
    }

    /// `true` where the row belongs to s2.
    pub fn is_s2(&self) -> &[bool] {
        &self.is_s2
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn binary_outcome(&self) -> bool {
        self.binary_outcome
    }

    pub fn s1_levels(&self) -> &[String] {
        &self.s1_levels
    }

    pub fn s2_levels(&self) -> &[String] {
        &self.s2_levels
    }

    pub fn sensitive_index(&self) -> usize {
        self.sensitive_idx
    }

    pub fn outcome_index(&self) -> usize {
        self.outcome_idx
    }

    pub fn confounder_indices(&self) -> &[usize] {
        &self.confounder_idx
    }

    pub fn mediator_indices(&self) -> &[usize] {
        &self.mediator_idx
    }

    pub fn group_sizes(&self) -> (usize, usize) {
        let n2 = self.is_s2.iter().filter(|&&b| b).count();
        (self.n() - n2, n2)
    }

    /// Rows at the given positions. Either sensitive group may end up empty;
    /// callers that need both check for themselves.
    pub fn subset(&self, rows: &[usize]) -> RoledDataset {
        RoledDataset {
            data: self.data.take_rows(rows),
            schema: self.schema.clone(),
            s1_levels: self.s1_levels.clone(),
            s2_levels: self.s2_levels.clone(),
            is_s2: rows.iter().map(|&r| self.is_s2[r]).collect(),
            y: rows.iter().map(|&r| self.y[r]).collect(),
            binary_outcome: self.binary_outcome,
            sensitive_idx: self.sensitive_idx,
            outcome_idx: self.outcome_idx,
            confounder_idx: self.confounder_idx.clone(),
            mediator_idx: self.mediator_idx.clone(),
        }
    }

    /// The same data with s1 and s2 exchanged.
    pub fn swap_sensitive(&self) -> RoledDataset {
        let mut out = self.clone();
        std::mem::swap(&mut out.s1_levels, &mut out.s2_levels);
        out.schema.s1_levels = LevelSet::Listed(out.s1_levels.clone());
        out.is_s2.iter_mut().for_each(|b| *b = !*b);
        out
    }
}

//! Sub-groups of individuals binned by estimated direct effect.
//!
//! Group `k` holds effects in `[t_{k-1}, t_k)` with `t_0 = -inf` and
//! `t_K = +inf`, so a value equal to a threshold joins the upper group.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bootstrap::std_dev;
use crate::error::{Error, Result};
use crate::hetero_forest::IndividualEffects;
use crate::round6;
use crate::tabular::{ColumnData, RoledDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BinningSpec {
    pub thresholds: Vec<f64>,
    #[serde(default)]
    pub labels: Vec<String>,
}

impl BinningSpec {
    /// Thresholds with default labels "Sub-group 1", "Sub-group 2", ...
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        let labels = (1..=thresholds.len() + 1).map(|k| format!("Sub-group {k}")).collect();
        let spec = BinningSpec { thresholds, labels };
        spec.validate()?;
        Ok(spec)
    }

    /// Fill in default labels if none were given, then validate.
    pub fn normalized(mut self) -> Result<Self> {
        if self.labels.is_empty() {
            self.labels = (1..=self.thresholds.len() + 1).map(|k| format!("Sub-group {k}")).collect();
        }
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.thresholds.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidSpec("thresholds must be finite".into()));
        }
        if self.thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidSpec("thresholds must be strictly ascending".into()));
        }
        if self.labels.len() != self.thresholds.len() + 1 {
            return Err(Error::InvalidSpec(format!(
                "{} thresholds need {} labels, got {}",
                self.thresholds.len(),
                self.thresholds.len() + 1,
                self.labels.len()
            )));
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// 0-based group of one effect value.
    pub fn group_of(&self, tau: f64) -> usize {
        self.thresholds.partition_point(|&t| t <= tau)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubgroupAssignment {
    pub row_ids: Vec<usize>,
    /// 0-based group per row.
    pub group: Vec<usize>,
    pub tau: Vec<f64>,
    pub spec: BinningSpec,
}

pub fn assign(effects: &IndividualEffects, spec: &BinningSpec) -> Result<SubgroupAssignment> {
    spec.validate()?;
    if let Some(i) = effects.tau.iter().position(|t| !t.is_finite()) {
        return Err(Error::InvalidArgument(format!("non-finite effect for row {}", effects.row_ids[i])));
    }
    Ok(SubgroupAssignment {
        row_ids: effects.row_ids.clone(),
        group: effects.tau.iter().map(|&t| spec.group_of(t)).collect(),
        tau: effects.tau.clone(),
        spec: spec.clone(),
    })
}

impl SubgroupAssignment {
    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.spec.n_groups()];
        for &g in &self.group {
            sizes[g] += 1;
        }
        sizes
    }

    pub fn mean_tau(&self) -> Vec<Option<f64>> {
        let mut sums = vec![(0.0, 0usize); self.spec.n_groups()];
        for (&g, &t) in self.group.iter().zip(&self.tau) {
            sums[g].0 += t;
            sums[g].1 += 1;
        }
        sums.into_iter().map(|(s, k)| (k > 0).then(|| s / k as f64)).collect()
    }

    /// Groups of the given rows, looked up by row id.
    pub fn groups_for(&self, row_ids: &[usize]) -> Result<Vec<usize>> {
        let lookup: std::collections::HashMap<usize, usize> =
            self.row_ids.iter().copied().zip(self.group.iter().copied()).collect();
        row_ids
            .iter()
            .map(|id| {
                lookup
                    .get(id)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("row {id} has no sub-group assignment")))
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelShare {
    pub level: String,
    pub percent: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum VariableSummary {
    Categorical {
        variable: String,
        majority: LevelShare,
        minority: LevelShare,
    },
    Continuous {
        variable: String,
        mean: f64,
        sd: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CategorySummary {
    /// "s1" or "s2".
    pub category: String,
    pub n: usize,
    /// Empty when `n == 0`.
    pub variables: Vec<VariableSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GroupSummary {
    pub label: String,
    pub n: usize,
    pub mean_tau: Option<f64>,
    /// mean(y | s2, group) - mean(y | s1, group); `None` if a side is empty.
    pub tv: Option<f64>,
    pub categories: Vec<CategorySummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SubgroupSummary {
    pub sensitive: String,
    pub s1_levels: Vec<String>,
    pub s2_levels: Vec<String>,
    pub thresholds: Vec<f64>,
    pub groups: Vec<GroupSummary>,
}

fn summarize_cell(data: &RoledDataset, rows: &[usize]) -> Vec<VariableSummary> {
    let cols = data.data().columns();
    let mut out = Vec::new();
    for &ci in data.confounder_indices().iter().chain(data.mediator_indices()) {
        let col = &cols[ci];
        match &col.data {
            ColumnData::Categorical(codes) => {
                let levels = col.spec.levels().unwrap_or_default();
                let mut counts = vec![0usize; levels.len()];
                for &r in rows {
                    counts[codes[r] as usize] += 1;
                }
                let n = rows.len() as f64;
                let share = |k: usize| LevelShare {
                    level: levels[k].clone(),
                    percent: round6(100.0 * counts[k] as f64 / n),
                };
                // first level wins ties in both directions
                let mut maj = 0;
                let mut min: Option<usize> = None;
                for k in 0..counts.len() {
                    if counts[k] > counts[maj] {
                        maj = k;
                    }
                    if counts[k] > 0 && min.map_or(true, |m| counts[k] < counts[m]) {
                        min = Some(k);
                    }
                }
                out.push(VariableSummary::Categorical {
                    variable: col.name().to_string(),
                    majority: share(maj),
                    minority: share(min.unwrap_or(maj)),
                });
            }
            ColumnData::Continuous(values) => {
                let v: Vec<f64> = rows.iter().map(|&r| values[r]).collect();
                out.push(VariableSummary::Continuous {
                    variable: col.name().to_string(),
                    mean: round6(v.iter().sum::<f64>() / v.len() as f64),
                    sd: round6(std_dev(&v)),
                });
            }
        }
    }
    out
}

/// Per group and sensitive category: counts, majority / minority levels of
/// categorical variables, mean and sd of continuous ones, and the group TV.
pub fn summarize(data: &RoledDataset, assignment: &SubgroupAssignment) -> Result<SubgroupSummary> {
    let groups = assignment.groups_for(data.row_ids())?;
    let k = assignment.spec.n_groups();
    let mean_tau = assignment.mean_tau();
    let mut out = Vec::with_capacity(k);
    for g in 0..k {
        let mut cells: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
        for (i, &gi) in groups.iter().enumerate() {
            if gi == g {
                cells[usize::from(data.is_s2()[i])].push(i);
            }
        }
        let mean_y = |rows: &[usize]| (!rows.is_empty()).then(|| rows.iter().map(|&r| data.y()[r]).sum::<f64>() / rows.len() as f64);
        let tv = match (mean_y(&cells[1]), mean_y(&cells[0])) {
            (Some(a), Some(b)) => Some(round6(a - b)),
            _ => None,
        };
        let categories = ["s1", "s2"]
            .iter()
            .zip(&cells)
            .map(|(name, rows)| CategorySummary {
                category: name.to_string(),
                n: rows.len(),
                variables: if rows.is_empty() { Vec::new() } else { summarize_cell(data, rows) },
            })
            .collect();
        out.push(GroupSummary {
            label: assignment.spec.labels[g].clone(),
            n: cells[0].len() + cells[1].len(),
            mean_tau: mean_tau[g].map(round6),
            tv,
            categories,
        });
    }
    Ok(SubgroupSummary {
        sensitive: data.schema().sensitive.clone(),
        s1_levels: data.s1_levels().to_vec(),
        s2_levels: data.s2_levels().to_vec(),
        thresholds: assignment.spec.thresholds.clone(),
        groups: out,
    })
}

impl SubgroupSummary {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    /// Flat form: group, category, variable, statistic, value.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["group", "category", "variable", "statistic", "value"])?;
        let num = |v: f64| format!("{:.6}", round6(v));
        for g in &self.groups {
            w.write_record([g.label.as_str(), "all", "", "n", &g.n.to_string()])?;
            if let Some(tv) = g.tv {
                w.write_record([g.label.as_str(), "all", "", "tv", &num(tv)])?;
            }
            if let Some(t) = g.mean_tau {
                w.write_record([g.label.as_str(), "all", "", "mean_tau", &num(t)])?;
            }
            for c in &g.categories {
                w.write_record([g.label.as_str(), c.category.as_str(), "", "n", &c.n.to_string()])?;
                for v in &c.variables {
                    match v {
                        VariableSummary::Categorical {
                            variable,
                            majority,
                            minority,
                        } => {
                            w.write_record([g.label.as_str(), &c.category, variable, "majority_level", &majority.level])?;
                            w.write_record([g.label.as_str(), &c.category, variable, "majority_percent", &num(majority.percent)])?;
                            w.write_record([g.label.as_str(), &c.category, variable, "minority_level", &minority.level])?;
                            w.write_record([g.label.as_str(), &c.category, variable, "minority_percent", &num(minority.percent)])?;
                        }
                        VariableSummary::Continuous { variable, mean, sd } => {
                            w.write_record([g.label.as_str(), &c.category, variable, "mean", &num(*mean)])?;
                            w.write_record([g.label.as_str(), &c.category, variable, "sd", &num(*sd)])?;
                        }
                    }
                }
            }
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HistogramBin {
    pub bin_left: f64,
    pub bin_right: f64,
    pub count: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Histogram {
    pub bin_width: f64,
    pub bins: Vec<HistogramBin>,
}

/// Counts over bins of width `bin_width` aligned to multiples of the width
/// and covering [min, max] of the effects.
pub fn export_histogram(effects: &IndividualEffects, bin_width: f64) -> Result<Histogram> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::InvalidArgument(format!("bin width must be positive, got {bin_width}")));
    }
    let finite: Vec<f64> = effects.tau.iter().copied().filter(|t| t.is_finite()).collect();
    if finite.is_empty() {
        return Ok(Histogram {
            bin_width,
            bins: Vec::new(),
        });
    }
    let lo = finite.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = finite.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let start = (lo / bin_width).floor();
    let index = |t: f64| ((t / bin_width).floor() - start) as usize;
    let n_bins = index(hi) + 1;
    let mut counts = vec![0usize; n_bins];
    for &t in &finite {
        counts[index(t).min(n_bins - 1)] += 1;
    }
    let bins = counts
        .into_iter()
        .enumerate()
        .map(|(k, count)| HistogramBin {
            bin_left: round6((start + k as f64) * bin_width),
            bin_right: round6((start + k as f64 + 1.0) * bin_width),
            count,
        })
        .collect();
    Ok(Histogram { bin_width, bins })
}

impl Histogram {
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["bin_left", "bin_right", "count"])?;
        for b in &self.bins {
            w.write_record([format!("{:.6}", b.bin_left), format!("{:.6}", b.bin_right), b.count.to_string()])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

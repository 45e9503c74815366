//! Baseline classifier and per-sub-group performance audit.
//!
//! Metrics come from confusion counts of each (sub-group, sensitive
//! category) cell. Undefined metrics stay `None` and never count as zero.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{percentile_interval, resample, std_dev};
use crate::error::{Error, Result};
use crate::learners::{fit, predict, FittedModel, LearnerSpec};
use crate::rng::derive_seed;
use crate::round6;
use crate::subgroup::SubgroupAssignment;
use crate::tabular::{encode, RoledDataset};

pub const CLASSIFICATION_THRESHOLD: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub row_id: usize,
    pub predicted: u8,
    pub actual: u8,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct PredictionSet {
    rows: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(rows: Vec<Prediction>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(rows.len());
        for p in &rows {
            if p.predicted > 1 || p.actual > 1 {
                return Err(Error::InvalidArgument(format!("row {}: labels must be 0 or 1", p.row_id)));
            }
            if !seen.insert(p.row_id) {
                return Err(Error::InvalidArgument(format!("duplicate prediction for row {}", p.row_id)));
            }
        }
        Ok(PredictionSet { rows })
    }

    pub fn rows(&self) -> &[Prediction] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut r = csv::Reader::from_path(path.as_ref())?;
        let rows = r.deserialize().collect::<std::result::Result<Vec<Prediction>, _>>()?;
        Self::new(rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        for p in &self.rows {
            w.serialize(p)?;
        }
        if self.rows.is_empty() {
            w.write_record(["row_id", "predicted", "actual"])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub tn: usize,
}

impl ConfusionCounts {
    pub fn record(&mut self, predicted: u8, actual: u8) {
        match (predicted, actual) {
            (1, 1) => self.tp += 1,
            (1, _) => self.fp += 1,
            (_, 1) => self.fn_ += 1,
            _ => self.tn += 1,
        }
    }

    pub fn from_predictions<'a>(preds: impl IntoIterator<Item = &'a Prediction>) -> Self {
        let mut c = ConfusionCounts::default();
        for p in preds {
            c.record(p.predicted, p.actual);
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn merge(&self, other: &ConfusionCounts) -> ConfusionCounts {
        ConfusionCounts {
            tp: self.tp + other.tp,
            fp: self.fp + other.fp,
            fn_: self.fn_ + other.fn_,
            tn: self.tn + other.tn,
        }
    }

    pub fn metrics(&self) -> MetricTriple {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        MetricTriple {
            precision: ratio(self.tp, self.tp + self.fp),
            recall: ratio(self.tp, self.tp + self.fn_),
            accuracy: ratio(self.tp + self.tn, self.total()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Precision,
    Recall,
    Accuracy,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Precision, Metric::Recall, Metric::Accuracy];

    pub fn name(self) -> &'static str {
        match self {
            Metric::Precision => "precision",
            Metric::Recall => "recall",
            Metric::Accuracy => "accuracy",
        }
    }
}

/// Precision, recall and accuracy; `None` where undefined (no predicted
/// positives, no actual positives, empty cell).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTriple {
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    pub accuracy: Option<f64>,
}

impl MetricTriple {
    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Precision => self.precision,
            Metric::Recall => self.recall,
            Metric::Accuracy => self.accuracy,
        }
    }

    fn from_fn(mut f: impl FnMut(Metric) -> Option<f64>) -> Self {
        MetricTriple {
            precision: f(Metric::Precision),
            recall: f(Metric::Recall),
            accuracy: f(Metric::Accuracy),
        }
    }

    /// `self - other` wherever both are defined.
    pub fn minus(&self, other: &MetricTriple) -> MetricTriple {
        Self::from_fn(|m| Some(self.get(m)? - other.get(m)?))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricEstimate {
    pub value: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub std_error: Option<f64>,
}

impl MetricEstimate {
    fn from_replicates(value: Option<f64>, reps: &[f64]) -> Self {
        let Some(v) = value else {
            return MetricEstimate::default();
        };
        match percentile_interval(reps, 0.95) {
            Some((lo, hi)) => MetricEstimate {
                value,
                ci_low: Some(lo.min(v)),
                ci_high: Some(hi.max(v)),
                std_error: Some(std_dev(reps)),
            },
            None => MetricEstimate {
                value,
                ..Default::default()
            },
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        matches!((self.ci_low, self.ci_high), (Some(lo), Some(hi)) if lo <= x && x <= hi)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub counts: ConfusionCounts,
    pub precision: MetricEstimate,
    pub recall: MetricEstimate,
    pub accuracy: MetricEstimate,
}

impl CellReport {
    pub fn get(&self, m: Metric) -> &MetricEstimate {
        match m {
            Metric::Precision => &self.precision,
            Metric::Recall => &self.recall,
            Metric::Accuracy => &self.accuracy,
        }
    }

    pub fn metrics(&self) -> MetricTriple {
        MetricTriple::from_fn(|m| self.get(m).value)
    }

    fn from_estimates(counts: ConfusionCounts, mut f: impl FnMut(Metric) -> MetricEstimate) -> Self {
        CellReport {
            counts,
            precision: f(Metric::Precision),
            recall: f(Metric::Recall),
            accuracy: f(Metric::Accuracy),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub label: String,
    pub all: CellReport,
    pub s1: CellReport,
    pub s2: CellReport,
    /// s2 - s1, with an interval from paired replicate differences.
    pub gap: CellGap,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CellGap {
    pub precision: MetricEstimate,
    pub recall: MetricEstimate,
    pub accuracy: MetricEstimate,
}

impl CellGap {
    pub fn get(&self, m: Metric) -> &MetricEstimate {
        match m {
            Metric::Precision => &self.precision,
            Metric::Recall => &self.recall,
            Metric::Accuracy => &self.accuracy,
        }
    }

    pub fn values(&self) -> MetricTriple {
        MetricTriple::from_fn(|m| self.get(m).value)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CiMode {
    /// Row resampling within each cell.
    #[default]
    Bootstrap,
    /// Spread over repeated split-and-retrain runs.
    Reruns,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub ci_mode: CiMode,
    /// Bootstrap replicates per cell, or number of reruns.
    pub replicates: usize,
    pub overall: GroupReport,
    pub groups: Vec<GroupReport>,
    /// Share of defined (group x metric) gaps that are positive.
    pub positive_gap_fraction: Option<f64>,
}

/// Fit the baseline classifier on sensitive, confounder and mediator
/// columns of `train`.
pub fn train_baseline(train: &RoledDataset, spec: &LearnerSpec, seed: u64) -> Result<FittedModel> {
    if !train.binary_outcome() {
        return Err(Error::InvalidArgument("baseline classifier needs a binary outcome".into()));
    }
    let view = encode(train);
    let block = view.block(spec.wants_linear_view());
    let (x, names) = block.select(&block.columns_for(true, true, true));
    fit(x.view(), &names, &view.y, spec, derive_seed(seed, "baseline", 0))
}

/// Thresholded predictions of `model` on every row of `data`.
pub fn predict_labels(model: &FittedModel, data: &RoledDataset) -> Result<PredictionSet> {
    let view = encode(data);
    let block = view.block(model.spec().wants_linear_view());
    let (x, names) = block.select(&block.columns_for(true, true, true));
    let scores = predict(model, x.view(), &names)?;
    let rows = view
        .row_ids
        .iter()
        .zip(&scores)
        .zip(&view.y)
        .map(|((&row_id, &p), &y)| Prediction {
            row_id,
            predicted: u8::from(p >= CLASSIFICATION_THRESHOLD),
            actual: u8::from(y == 1.0),
        })
        .collect();
    PredictionSet::new(rows)
}

/// Labelled cells: for each prediction, its sub-group and s2 flag.
fn cells(preds: &PredictionSet, assignment: &SubgroupAssignment, data: &RoledDataset) -> Result<Vec<(usize, bool)>> {
    let s2: HashMap<usize, bool> = data.row_ids().iter().copied().zip(data.is_s2().iter().copied()).collect();
    let ids: Vec<usize> = preds.rows.iter().map(|p| p.row_id).collect();
    let groups = assignment.groups_for(&ids)?;
    ids.iter()
        .zip(groups)
        .map(|(id, g)| {
            s2.get(id)
                .map(|&b| (g, b))
                .ok_or_else(|| Error::InvalidArgument(format!("prediction for row {id} not in the evaluation data")))
        })
        .collect()
}

/// Per-metric replicate values of one cell; undefined replicates dropped.
fn bootstrap_cell(preds: &[Prediction], b: usize, seed: u64) -> Vec<Vec<Option<f64>>> {
    (0..b)
        .map(|r| {
            let idx = resample(preds.len(), seed, r);
            let m = ConfusionCounts::from_predictions(idx.iter().map(|&i| &preds[i])).metrics();
            Metric::ALL.iter().map(|&k| m.get(k)).collect()
        })
        .collect()
}

fn defined(reps: &[Vec<Option<f64>>], k: usize) -> Vec<f64> {
    reps.iter().filter_map(|r| r[k]).collect()
}

fn cell_from_bootstrap(counts: ConfusionCounts, reps: &[Vec<Option<f64>>]) -> CellReport {
    let point = counts.metrics();
    CellReport::from_estimates(counts, |m| {
        let k = Metric::ALL.iter().position(|&x| x == m).unwrap();
        MetricEstimate::from_replicates(point.get(m), &defined(reps, k))
    })
}

fn gap_from_bootstrap(s1: &CellReport, s2: &CellReport, r1: &[Vec<Option<f64>>], r2: &[Vec<Option<f64>>]) -> CellGap {
    let point = s2.metrics().minus(&s1.metrics());
    let est = |m: Metric| {
        let k = Metric::ALL.iter().position(|&x| x == m).unwrap();
        let diffs: Vec<f64> = r1.iter().zip(r2).filter_map(|(a, b)| Some(b[k]? - a[k]?)).collect();
        MetricEstimate::from_replicates(point.get(m), &diffs)
    };
    CellGap {
        precision: est(Metric::Precision),
        recall: est(Metric::Recall),
        accuracy: est(Metric::Accuracy),
    }
}

fn positive_fraction(groups: &[GroupReport]) -> Option<f64> {
    let gaps: Vec<f64> = groups
        .iter()
        .flat_map(|g| Metric::ALL.map(|m| g.gap.get(m).value))
        .flatten()
        .collect();
    (!gaps.is_empty()).then(|| gaps.iter().filter(|&&g| g > 0.0).count() as f64 / gaps.len() as f64)
}

/// Cell layout: index 0 is the whole test set, then one per sub-group;
/// within each, positions 0 / 1 / 2 are all / s1 / s2.
fn partition(preds: &PredictionSet, labels: &[(usize, bool)], n_groups: usize) -> Vec<[Vec<Prediction>; 3]> {
    let mut out: Vec<[Vec<Prediction>; 3]> = (0..=n_groups).map(|_| Default::default()).collect();
    for (p, &(g, s2)) in preds.rows.iter().zip(labels) {
        let side = 1 + usize::from(s2);
        for slot in [0, g + 1] {
            out[slot][0].push(*p);
            out[slot][side].push(*p);
        }
    }
    out
}

/// Audit `preds` by sub-group and sensitive category with `b` bootstrap
/// replicates per cell. Each cell draws from its own seeded substream.
pub fn evaluate(
    preds: &PredictionSet,
    assignment: &SubgroupAssignment,
    data: &RoledDataset,
    b: usize,
    seed: u64,
) -> Result<AuditReport> {
    let labels = cells(preds, assignment, data)?;
    let n_groups = assignment.spec.n_groups();
    let parts = partition(preds, &labels, n_groups);
    let reports: Vec<GroupReport> = parts
        .par_iter()
        .enumerate()
        .map(|(slot, cell)| {
            let reps: Vec<_> = (0..3)
                .map(|side| bootstrap_cell(&cell[side], b, derive_seed(seed, "audit_cell", (slot * 3 + side) as u64)))
                .collect();
            let [all, s1, s2] = [0, 1, 2].map(|side| cell_from_bootstrap(ConfusionCounts::from_predictions(&cell[side]), &reps[side]));
            let gap = gap_from_bootstrap(&s1, &s2, &reps[1], &reps[2]);
            GroupReport {
                label: if slot == 0 { "Overall".into() } else { assignment.spec.labels[slot - 1].clone() },
                all,
                s1,
                s2,
                gap,
            }
        })
        .collect();
    let mut it = reports.into_iter();
    let overall = it.next().expect("overall cell");
    let groups: Vec<GroupReport> = it.collect();
    Ok(AuditReport {
        ci_mode: CiMode::Bootstrap,
        replicates: b,
        positive_gap_fraction: positive_fraction(&groups),
        overall,
        groups,
    })
}

/// Audit over repeated runs (each a fresh split and retrain): the point
/// value is the mean over runs where the metric is defined, the interval is
/// the percentile range over runs and the std error their spread. Counts
/// are pooled over runs.
pub fn evaluate_reruns(runs: &[PredictionSet], assignment: &SubgroupAssignment, data: &RoledDataset) -> Result<AuditReport> {
    if runs.is_empty() {
        return Err(Error::InvalidArgument("no runs to evaluate".into()));
    }
    let n_groups = assignment.spec.n_groups();
    let per_run: Vec<Vec<[ConfusionCounts; 3]>> = runs
        .iter()
        .map(|preds| {
            let labels = cells(preds, assignment, data)?;
            Ok(partition(preds, &labels, n_groups)
                .iter()
                .map(|cell| [0, 1, 2].map(|side| ConfusionCounts::from_predictions(&cell[side])))
                .collect())
        })
        .collect::<Result<_>>()?;
    let estimate = |values: Vec<f64>| -> MetricEstimate {
        if values.is_empty() {
            return MetricEstimate::default();
        }
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        MetricEstimate::from_replicates(Some(mean), &values)
    };
    let mut reports = Vec::with_capacity(n_groups + 1);
    for slot in 0..=n_groups {
        let [all, s1, s2] = [0, 1, 2].map(|side| {
            let pooled = per_run.iter().fold(ConfusionCounts::default(), |acc, r| acc.merge(&r[slot][side]));
            CellReport::from_estimates(pooled, |m| estimate(per_run.iter().filter_map(|r| r[slot][side].metrics().get(m)).collect()))
        });
        let gap_of = |m: Metric| {
            estimate(
                per_run
                    .iter()
                    .filter_map(|r| Some(r[slot][2].metrics().get(m)? - r[slot][1].metrics().get(m)?))
                    .collect(),
            )
        };
        reports.push(GroupReport {
            label: if slot == 0 { "Overall".into() } else { assignment.spec.labels[slot - 1].clone() },
            all,
            s1,
            s2,
            gap: CellGap {
                precision: gap_of(Metric::Precision),
                recall: gap_of(Metric::Recall),
                accuracy: gap_of(Metric::Accuracy),
            },
        });
    }
    let mut it = reports.into_iter();
    let overall = it.next().expect("overall cell");
    let groups: Vec<GroupReport> = it.collect();
    Ok(AuditReport {
        ci_mode: CiMode::Reruns,
        replicates: runs.len(),
        positive_gap_fraction: positive_fraction(&groups),
        overall,
        groups,
    })
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{:.6}", round6(x))).unwrap_or_default()
}

impl AuditReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }

    /// One line per (group, category, metric); blank cells are undefined.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record([
            "group", "category", "metric", "value", "ci_low", "ci_high", "std_error", "tp", "fp", "fn", "tn",
        ])?;
        for g in std::iter::once(&self.overall).chain(&self.groups) {
            for (cat, cell) in [("all", &g.all), ("s1", &g.s1), ("s2", &g.s2)] {
                for m in Metric::ALL {
                    let e = cell.get(m);
                    let c = &cell.counts;
                    w.write_record([
                        g.label.clone(),
                        cat.into(),
                        m.name().into(),
                        fmt(e.value),
                        fmt(e.ci_low),
                        fmt(e.ci_high),
                        fmt(e.std_error),
                        c.tp.to_string(),
                        c.fp.to_string(),
                        c.fn_.to_string(),
                        c.tn.to_string(),
                    ])?;
                }
            }
            for m in Metric::ALL {
                let e = g.gap.get(m);
                w.write_record([
                    g.label.clone(),
                    "gap".into(),
                    m.name().into(),
                    fmt(e.value),
                    fmt(e.ci_low),
                    fmt(e.ci_high),
                    fmt(e.std_error),
                    String::new(),
                    String::new(),
                    String::new(),
                    String::new(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapEntry {
    pub group: String,
    pub metric: Metric,
    pub gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSummary {
    /// Defined gaps, largest magnitude first.
    pub gaps: Vec<GapEntry>,
    pub positive_fraction: Option<f64>,
    /// Group with the largest absolute gap, per metric.
    pub largest: Vec<GapEntry>,
}

pub fn gap_analysis(report: &AuditReport) -> GapSummary {
    let mut gaps: Vec<GapEntry> = report
        .groups
        .iter()
        .flat_map(|g| {
            Metric::ALL.into_iter().filter_map(|m| {
                g.gap.get(m).value.map(|gap| GapEntry {
                    group: g.label.clone(),
                    metric: m,
                    gap,
                })
            })
        })
        .collect();
    // stable: ties keep group order
    gaps.sort_by(|a, b| b.gap.abs().total_cmp(&a.gap.abs()));
    let largest = Metric::ALL
        .into_iter()
        .filter_map(|m| gaps.iter().find(|e| e.metric == m).cloned())
        .collect();
    let positive_fraction = (!gaps.is_empty()).then(|| gaps.iter().filter(|e| e.gap > 0.0).count() as f64 / gaps.len() as f64);
    GapSummary {
        gaps,
        positive_fraction,
        largest,
    }
}

impl GapSummary {
    /// Plot data: group, metric, gap.
    pub fn write_plot_csv(&self, report: &AuditReport, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["group", "metric", "gap"])?;
        for g in &report.groups {
            for m in Metric::ALL {
                w.write_record([g.label.as_str(), m.name(), &fmt(g.gap.get(m).value)])?;
            }
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n").map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn confusion_arithmetic() {
        let c = ConfusionCounts { tp: 3, fp: 1, fn_: 1, tn: 5 };
        let m = c.metrics();
        assert_eq!(m.precision, Some(0.75));
        assert_eq!(m.recall, Some(0.75));
        assert_eq!(m.accuracy, Some(0.8));
    }

    #[test]
    fn undefined_metrics_are_flagged() {
        let c = ConfusionCounts { tp: 0, fp: 0, fn_: 0, tn: 4 };
        let m = c.metrics();
        assert_eq!(m.precision, None);
        assert_eq!(m.recall, None);
        assert_eq!(m.accuracy, Some(1.0));
        assert_eq!(ConfusionCounts::default().metrics(), MetricTriple::default());
        let gap = m.minus(&MetricTriple { precision: Some(0.5), recall: Some(0.5), accuracy: Some(0.5) });
        assert_eq!(gap.precision, None);
        assert_eq!(gap.accuracy, Some(0.5));
    }

    #[test]
    fn record_covers_all_quadrants() {
        let mut c = ConfusionCounts::default();
        for (p, a) in [(1, 1), (1, 0), (0, 1), (0, 0), (0, 0)] {
            c.record(p, a);
        }
        assert_eq!(c, ConfusionCounts { tp: 1, fp: 1, fn_: 1, tn: 2 });
    }

    #[test]
    fn prediction_set_rejects_duplicates_and_bad_labels() {
        let p = |row_id, predicted, actual| Prediction { row_id, predicted, actual };
        assert!(PredictionSet::new(vec![p(1, 0, 1), p(1, 1, 1)]).is_err());
        assert!(PredictionSet::new(vec![p(1, 2, 1)]).is_err());
        assert!(PredictionSet::new(vec![p(1, 0, 1), p(2, 1, 1)]).is_ok());
    }
}

//! Individual direct effects from an honest causal forest.
//!
//! Treatment is the s2 indicator and the features are confounders and
//! mediators, so a leaf contrast estimates `mu(s2, x, m) - mu(s1, x, m)`.
//! With local centering the outcome and treatment are first replaced by
//! their residuals against cross-fitted `E[Y | X, M]` and `P(s2 | X, M)`.

use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::binning::{BinMapper, MAX_BINS};
use crate::learners::honest::{grow, CausalData, GrowParams};
use crate::learners::{cross_fit_predict, CausalTree, CrossFitPlan, LearnerSpec, Objective};
use crate::rng::{derive_seed, substream};
use crate::round6;
use crate::tabular::{encode, RoledDataset};

/// How per-tree leaf effects are combined into one prediction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Aggregation {
    /// Plain average of the leaf effects.
    TreeAverage,
    /// Slope from leaf-size-weighted pooled leaf moments (forest kernel).
    Kernel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub num_trees: usize,
    pub min_leaf: usize,
    /// `None` means min(ceil(sqrt(p) + 20), p).
    pub mtry: Option<usize>,
    pub honest_fraction: f64,
    pub subsample_fraction: f64,
    pub local_centering: bool,
    /// Learner for E[Y | X, M] when centering.
    pub outcome_learner: LearnerSpec,
    /// Learner for P(s2 | X, M) when centering.
    pub propensity_learner: LearnerSpec,
    pub centering_folds: usize,
    pub max_depth: Option<usize>,
    pub aggregation: Aggregation,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 500,
            min_leaf: 10,
            mtry: None,
            honest_fraction: 0.5,
            subsample_fraction: 0.5,
            local_centering: true,
            outcome_learner: LearnerSpec::default_regression(),
            propensity_learner: LearnerSpec::default_regression().with_objective(Objective::Logistic),
            centering_folds: 5,
            max_depth: None,
            aggregation: Aggregation::TreeAverage,
        }
    }
}

impl ForestParams {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |v: f64| v > 0.0 && v < 1.0;
        if self.num_trees == 0 || self.min_leaf == 0 || self.mtry == Some(0) || self.max_depth == Some(0) {
            return Err(Error::InvalidSpec("forest counts must be >= 1".into()));
        }
        if !open_unit(self.honest_fraction) || !(self.subsample_fraction > 0.0 && self.subsample_fraction <= 1.0) {
            return Err(Error::InvalidSpec(
                "honest_fraction must be in (0, 1) and subsample_fraction in (0, 1]".into(),
            ));
        }
        if self.local_centering {
            self.outcome_learner.validate()?;
            self.propensity_learner.validate()?;
            if self.centering_folds < 2 {
                return Err(Error::InvalidSpec("centering_folds must be >= 2".into()));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CausalForestModel {
    params: ForestParams,
    feature_names: Vec<String>,
    /// Source column of every feature.
    feature_columns: Vec<String>,
    trees: Vec<CausalTree>,
    /// Per tree, bitset over training positions drawn into its subsample.
    in_sample: Vec<Vec<u64>>,
    train_row_ids: Vec<usize>,
    train_fingerprint: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IndividualEffects {
    pub row_ids: Vec<usize>,
    pub tau: Vec<f64>,
    /// Training rows were scored only by trees that never saw them.
    pub out_of_bag: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VariableImportance {
    pub features: Vec<String>,
    pub scores: Vec<f64>,
}

fn fingerprint(x: ArrayView2<f64>) -> u64 {
    // FNV-1a over the raw bits
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for v in x.iter() {
        for b in v.to_bits().to_le_bytes() {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    h
}

/// Forest features (confounders then mediators, one-hot) of a dataset.
fn forest_features(data: &RoledDataset) -> (Array2<f64>, Vec<String>, Vec<String>, Vec<bool>, Vec<f64>, Vec<usize>) {
    let view = encode(data);
    let cols = view.tree.columns_for(false, true, true);
    let (x, names) = view.tree.select(&cols);
    let sources = cols.iter().map(|&c| view.tree.features[c].source.column().to_string()).collect();
    (x, names, sources, view.is_s2, view.y, view.row_ids)
}

fn has_bit(bits: &[u64], i: usize) -> bool {
    bits[i / 64] >> (i % 64) & 1 == 1
}

/// Fit the forest on `data`.
pub fn fit_direct_effect_forest(data: &RoledDataset, params: &ForestParams, seed: u64) -> Result<CausalForestModel> {
    params.validate()?;
    let (x, names, sources, arm, y, row_ids) = forest_features(data);
    let (n, p) = x.dim();
    let n_treated = arm.iter().filter(|&&a| a).count();
    if n_treated == 0 || n_treated == n {
        return Err(Error::EmptyGroup("causal forest needs rows from both groups".into()));
    }
    if p == 0 {
        return Err(Error::InvalidArgument("causal forest needs at least one confounder or mediator".into()));
    }
    let w_raw: Vec<f64> = arm.iter().map(|&a| f64::from(u8::from(a))).collect();
    let (w, y_c) = if params.local_centering {
        let plan = CrossFitPlan::new(n, params.centering_folds, derive_seed(seed, "forest_centering", 0))?;
        let y_hat = cross_fit_predict(x.view(), &names, &y, &params.outcome_learner, &plan, derive_seed(seed, "forest_centering", 1))
            .map_err(|e| e.context("outcome centering"))?;
        let e_hat = cross_fit_predict(
            x.view(),
            &names,
            &w_raw,
            &params.propensity_learner,
            &plan,
            derive_seed(seed, "forest_centering", 2),
        )
        .map_err(|e| e.context("propensity centering"))?;
        (
            w_raw.iter().zip(&e_hat).map(|(a, b)| a - b).collect(),
            y.iter().zip(&y_hat).map(|(a, b)| a - b).collect(),
        )
    } else {
        (w_raw.clone(), y.clone())
    };

    let mapper = BinMapper::fit(x.view(), MAX_BINS);
    let binned = mapper.transform(x.view());
    let cd = CausalData {
        binned: &binned,
        mapper: &mapper,
        arm: &arm,
        w: &w,
        y: &y_c,
    };
    let gp = GrowParams {
        min_leaf: params.min_leaf,
        mtry: params.mtry.unwrap_or_else(|| ((p as f64).sqrt() + 20.0).ceil() as usize).clamp(1, p),
        max_depth: params.max_depth,
    };
    let m = ((params.subsample_fraction * n as f64).round() as usize).clamp(2, n);
    let n_est = ((params.honest_fraction * m as f64).round() as usize).clamp(1, m - 1);
    let grown: Vec<(CausalTree, Vec<u64>)> = (0..params.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, "causal_forest", t as u64);
            let drawn: Vec<u32> = sample(&mut rng, n, m).into_iter().map(|i| i as u32).collect();
            let mut bits = vec![0u64; n.div_ceil(64)];
            for &i in &drawn {
                bits[i as usize / 64] |= 1 << (i % 64);
            }
            let (est, structure) = drawn.split_at(n_est);
            let tree = grow(&cd, structure.to_vec(), est, &gp, &mut rng).map_err(|e| e.context(format!("tree {t}")))?;
            Ok((tree, bits))
        })
        .collect::<Result<_>>()?;
    let (trees, in_sample) = grown.into_iter().unzip();
    Ok(CausalForestModel {
        params: params.clone(),
        feature_names: names,
        feature_columns: sources,
        trees,
        in_sample,
        train_row_ids: row_ids,
        train_fingerprint: fingerprint(x.view()),
    })
}

impl CausalForestModel {
    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn trees(&self) -> &[CausalTree] {
        &self.trees
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Build a model from explicit trees (no training rows).
    pub fn from_trees(feature_names: Vec<String>, trees: Vec<CausalTree>, params: ForestParams) -> Self {
        CausalForestModel {
            params,
            feature_columns: feature_names.clone(),
            feature_names,
            in_sample: vec![Vec::new(); trees.len()],
            trees,
            train_row_ids: Vec::new(),
            train_fingerprint: 0,
        }
    }

    fn aggregate<'a>(&self, row: ndarray::ArrayView1<f64>, trees: impl Iterator<Item = &'a CausalTree>) -> Option<f64> {
        match self.params.aggregation {
            Aggregation::TreeAverage => {
                let (s, k) = trees.fold((0.0, 0usize), |(s, k), t| (s + t.predict_row(row), k + 1));
                (k > 0).then(|| s / k as f64)
            }
            Aggregation::Kernel => {
                let (mut sw, mut s1, mut swy, mut sww, mut sy, mut fallback, mut k) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0usize);
                for t in trees {
                    let leaf = &t.nodes[t.leaf_of(row)];
                    k += 1;
                    fallback += leaf.tau;
                    let m = &leaf.estimation;
                    if m.n == 0 {
                        continue;
                    }
                    let a = 1.0 / m.n as f64;
                    s1 += 1.0;
                    sw += a * m.sw;
                    sy += a * m.sy;
                    swy += a * m.swy;
                    sww += a * m.sww;
                }
                if k == 0 {
                    return None;
                }
                let var = sww - sw * sw / s1;
                if s1 > 0.0 && var > 1e-12 * s1 {
                    Some((swy - sw * sy / s1) / var)
                } else {
                    Some(fallback / k as f64)
                }
            }
        }
    }
}

/// Individual effects for every row of `data`. Rows of the training data
/// are scored out-of-bag; any other dataset is scored by all trees.
pub fn predict_effects(model: &CausalForestModel, data: &RoledDataset) -> Result<IndividualEffects> {
    let (x, names, ..) = forest_features(data);
    if names != model.feature_names {
        return Err(Error::ColumnMismatch(format!(
            "forest trained on [{}], got [{}]",
            model.feature_names.join(", "),
            names.join(", ")
        )));
    }
    let training = !model.train_row_ids.is_empty()
        && data.row_ids() == model.train_row_ids.as_slice()
        && fingerprint(x.view()) == model.train_fingerprint;
    let mut no_oob = 0usize;
    let tau: Vec<f64> = (0..x.nrows())
        .into_par_iter()
        .map(|i| {
            let row = x.row(i);
            if training {
                let oob = model
                    .trees
                    .iter()
                    .zip(&model.in_sample)
                    .filter(|(_, bits)| !has_bit(bits, i))
                    .map(|(t, _)| t);
                if let Some(v) = model.aggregate(row, oob) {
                    return (v, false);
                }
            }
            (model.aggregate(row, model.trees.iter()).unwrap_or(0.0), training)
        })
        .collect::<Vec<_>>()
        .into_iter()
        .map(|(v, missing)| {
            no_oob += usize::from(missing);
            v
        })
        .collect();
    if no_oob > 0 {
        log::warn!("{no_oob} training rows appear in every subsample; scored by all trees");
    }
    Ok(IndividualEffects {
        row_ids: data.row_ids().to_vec(),
        tau,
        out_of_bag: training,
    })
}

/// Depth-weighted split counts over the top four levels, normalised to sum
/// to one. All scores are zero if no tree split at all.
pub fn variable_importance(model: &CausalForestModel) -> VariableImportance {
    let mut scores = vec![0.0; model.feature_names.len()];
    for tree in &model.trees {
        for (f, depth) in tree.splits() {
            if depth <= 4 {
                scores[f] += 0.5f64.powi(depth as i32 - 1);
            }
        }
    }
    let total: f64 = scores.iter().sum();
    if total > 0.0 {
        scores.iter_mut().for_each(|s| *s /= total);
    }
    VariableImportance {
        features: model.feature_names.clone(),
        scores,
    }
}

impl VariableImportance {
    /// Scores summed over the one-hot features of each source column, in
    /// first-appearance order.
    pub fn by_column(&self, model: &CausalForestModel) -> VariableImportance {
        let mut features: Vec<String> = Vec::new();
        let mut scores: Vec<f64> = Vec::new();
        for (col, s) in model.feature_columns.iter().zip(&self.scores) {
            match features.iter().position(|c| c == col) {
                Some(j) => scores[j] += s,
                None => {
                    features.push(col.clone());
                    scores.push(*s);
                }
            }
        }
        VariableImportance { features, scores }
    }

    /// (feature, score) pairs, highest first; ties keep feature order.
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut pairs: Vec<(String, f64)> = self.features.iter().cloned().zip(self.scores.iter().copied()).collect();
        pairs.sort_by(|a, b| b.1.total_cmp(&a.1));
        pairs
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["feature", "importance"])?;
        for (f, s) in self.ranked() {
            w.write_record([f, format!("{:.6}", round6(s))])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

impl IndividualEffects {
    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// CSV with columns row_id, tau_hat.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["row_id", "tau_hat"])?;
        for (id, t) in self.row_ids.iter().zip(&self.tau) {
            w.write_record([id.to_string(), format!("{:.6}", round6(*t))])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut r = csv::Reader::from_path(path)?;
        let (mut row_ids, mut tau) = (Vec::new(), Vec::new());
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let bad = |m: &str| Error::Row {
                row: i + 1,
                message: m.to_string(),
            };
            row_ids.push(rec.get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(|| bad("bad row_id"))?);
            tau.push(rec.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(|| bad("bad tau_hat"))?);
        }
        Ok(IndividualEffects {
            row_ids,
            tau,
            out_of_bag: false,
        })
    }

    /// Mean effect over rows with `mask` set.
    pub fn mean_where(&self, mask: &[bool]) -> Option<f64> {
        let (s, k) = self
            .tau
            .iter()
            .zip(mask)
            .filter(|(_, &m)| m)
            .fold((0.0, 0usize), |(s, k), (t, _)| (s + t, k + 1));
        (k > 0).then(|| s / k as f64)
    }
}

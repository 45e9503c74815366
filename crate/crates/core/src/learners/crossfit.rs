use std::collections::BTreeMap;

use ndarray::{ArrayView2, Axis};
use rand::seq::SliceRandom;

use super::{fit, predict, FittedModel, LearnerSpec};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, substream};

/// Assignment of rows to K folds for out-of-fold prediction.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CrossFitPlan {
    k: usize,
    fold_of: Vec<usize>,
}

impl CrossFitPlan {
    /// Random balanced folds over `n` rows.
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        let ids: Vec<usize> = (0..n).collect();
        Self::grouped(&ids, k, seed)
    }

    /// Folds in which rows sharing a group id (e.g. bootstrap duplicates of
    /// one source row) always land together.
    pub fn grouped(group_ids: &[usize], k: usize, seed: u64) -> Result<Self> {
        let mut groups: Vec<usize> = group_ids.to_vec();
        groups.sort_unstable();
        groups.dedup();
        if k < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {k}")));
        }
        if groups.len() < k {
            return Err(Error::InvalidArgument(format!("{} groups cannot fill {k} folds", groups.len())));
        }
        groups.shuffle(&mut substream(seed, "crossfit", 0));
        let fold_of_group: BTreeMap<usize, usize> = groups.iter().enumerate().map(|(i, &g)| (g, i % k)).collect();
        let plan = CrossFitPlan {
            k,
            fold_of: group_ids.iter().map(|g| fold_of_group[g]).collect(),
        };
        plan.check()?;
        Ok(plan)
    }

    pub fn from_folds(fold_of: Vec<usize>, k: usize) -> Result<Self> {
        if k < 2 || fold_of.iter().any(|&f| f >= k) {
            return Err(Error::InvalidArgument("fold labels must lie in 0..k with k >= 2".into()));
        }
        let plan = CrossFitPlan { k, fold_of };
        plan.check()?;
        Ok(plan)
    }

    fn check(&self) -> Result<()> {
        let mut sizes = vec![0usize; self.k];
        for &f in &self.fold_of {
            sizes[f] += 1;
        }
        if let Some(f) = sizes.iter().position(|&s| s < 2) {
            return Err(Error::InvalidArgument(format!("fold {f} has {} row(s)", sizes[f])));
        }
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.fold_of.len()
    }

    pub fn fold_of(&self) -> &[usize] {
        &self.fold_of
    }
}

/// One model per fold, each trained without that fold.
#[derive(Clone, Debug)]
pub struct CrossFitModels {
    fold_of: Vec<usize>,
    models: Vec<FittedModel>,
}

impl CrossFitModels {
    pub fn models(&self) -> &[FittedModel] {
        &self.models
    }

    /// Out-of-fold predictions on a matrix aligned row-for-row with the
    /// training rows (e.g. the training design with one column overwritten).
    pub fn predict(&self, features: ArrayView2<f64>, names: &[String]) -> Result<Vec<f64>> {
        if features.nrows() != self.fold_of.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rows but the plan covers {}",
                features.nrows(),
                self.fold_of.len()
            )));
        }
        let mut out = vec![0.0; features.nrows()];
        for (f, model) in self.models.iter().enumerate() {
            let rows: Vec<usize> = (0..out.len()).filter(|&i| self.fold_of[i] == f).collect();
            if rows.is_empty() {
                continue;
            }
            let sub = features.select(Axis(0), &rows);
            for (&i, v) in rows.iter().zip(predict(model, sub.view(), names)?) {
                out[i] = v;
            }
        }
        Ok(out)
    }
}

/// Train one model per fold on the other folds' rows. With `train_mask`, only
/// masked rows are used for training (all rows still receive predictions).
pub fn cross_fit(
    features: ArrayView2<f64>,
    names: &[String],
    targets: &[f64],
    spec: &LearnerSpec,
    plan: &CrossFitPlan,
    train_mask: Option<&[bool]>,
    seed: u64,
) -> Result<CrossFitModels> {
    let n = plan.n();
    if features.nrows() != n || targets.len() != n || train_mask.is_some_and(|m| m.len() != n) {
        return Err(Error::InvalidArgument("cross-fit inputs disagree on row count".into()));
    }
    let models = (0..plan.k)
        .map(|f| {
            let rows: Vec<usize> = (0..n)
                .filter(|&i| plan.fold_of[i] != f && train_mask.map_or(true, |m| m[i]))
                .collect();
            let x = features.select(Axis(0), &rows);
            let y: Vec<f64> = rows.iter().map(|&i| targets[i]).collect();
            fit(x.view(), names, &y, spec, derive_seed(seed, "crossfit_fold", f as u64))
                .map_err(|e| e.context(format!("fold {f}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrossFitModels {
        fold_of: plan.fold_of.clone(),
        models,
    })
}

/// Out-of-fold predictions of `targets` on the training matrix.
pub fn cross_fit_predict(
    features: ArrayView2<f64>,
    names: &[String],
    targets: &[f64],
    spec: &LearnerSpec,
    plan: &CrossFitPlan,
    seed: u64,
) -> Result<Vec<f64>> {
    cross_fit(features, names, targets, spec, plan, None, seed)?.predict(features, names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::Objective;
    use ndarray::Array2;
    use proptest::prelude::*;

    #[test]
    fn folds_are_balanced_and_seeded() {
        let a = CrossFitPlan::new(23, 5, 1).unwrap();
        let b = CrossFitPlan::new(23, 5, 1).unwrap();
        assert_eq!(a, b);
        let mut sizes = [0; 5];
        for &f in a.fold_of() {
            sizes[f] += 1;
        }
        assert!(sizes.iter().all(|&s| s == 4 || s == 5));
    }

    #[test]
    fn too_few_rows_for_k() {
        assert!(CrossFitPlan::new(3, 5, 0).is_err());
        // 9 rows, 5 folds: some fold gets a single row
        assert!(CrossFitPlan::new(9, 5, 0).is_err());
        assert!(CrossFitPlan::new(10, 1, 0).is_err());
    }

    #[test]
    fn out_of_fold_predictions_ignore_own_target() {
        // a model that memorised its own row would predict it exactly;
        // out-of-fold linear predictions change when only that target changes
        let n = 20;
        let x = Array2::from_shape_fn((n, 1), |(i, _)| i as f64);
        let names = vec!["x".to_string()];
        let mut y: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let plan = CrossFitPlan::new(n, 4, 3).unwrap();
        let spec = LearnerSpec::linear(0.0, Objective::SquaredError);
        let before = cross_fit_predict(x.view(), &names, &y, &spec, &plan, 0).unwrap();
        y[7] += 100.0;
        let after = cross_fit_predict(x.view(), &names, &y, &spec, &plan, 0).unwrap();
        assert!((before[7] - after[7]).abs() < 1e-9);
        let others_moved = (0..n).filter(|&i| plan.fold_of()[i] != plan.fold_of()[7]).all(|i| (before[i] - after[i]).abs() > 1e-6);
        assert!(others_moved);
    }

    proptest! {
        #[test]
        fn grouped_rows_share_a_fold(ids in proptest::collection::vec(0usize..30, 30..90), seed in 0u64..100) {
            let distinct = ids.iter().collect::<std::collections::BTreeSet<_>>().len();
            prop_assume!(distinct >= 10);
            if let Ok(plan) = CrossFitPlan::grouped(&ids, 3, seed) {
                for i in 0..ids.len() {
                    for j in 0..ids.len() {
                        if ids[i] == ids[j] {
                            prop_assert_eq!(plan.fold_of()[i], plan.fold_of()[j]);
                        }
                    }
                }
            }
        }
    }
}

//! Supervised nuisance learners and honest tree machinery.
//!
//! Three learner families sit behind one [`LearnerSpec`]:
//! histogram gradient boosting ([`LearnerKind::BoostedStumps`]), an honest
//! regression forest and ridge / L2-penalised logistic regression. All of them
//! are deterministic given the seed.

pub mod binning;
mod boost;
mod crossfit;
mod forest;
pub mod honest;
mod linear;
pub mod tree;

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use crossfit::{cross_fit, cross_fit_predict, CrossFitModels, CrossFitPlan};
pub use honest::{fit_honest_tree, CausalTree, HonestTreeParams};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    SquaredError,
    /// Binary targets in {0, 1}; predictions are probabilities.
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LearnerKind {
    RegressionForest {
        num_trees: usize,
        min_leaf: usize,
        /// Candidate features per split; `None` means ceil(sqrt(p)).
        #[serde(default)]
        mtry: Option<usize>,
        /// Share of each tree's subsample reserved for leaf estimates;
        /// `None` disables honesty.
        #[serde(default)]
        honest_fraction: Option<f64>,
    },
    BoostedStumps {
        rounds: usize,
        learning_rate: f64,
        max_depth: usize,
    },
    RegularizedLinear {
        l2_penalty: f64,
        max_iterations: usize,
        tolerance: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnerSpec {
    pub kind: LearnerKind,
    pub objective: Objective,
}

impl LearnerSpec {
    pub fn boosted(rounds: usize, learning_rate: f64, max_depth: usize, objective: Objective) -> Self {
        LearnerSpec {
            kind: LearnerKind::BoostedStumps {
                rounds,
                learning_rate,
                max_depth,
            },
            objective,
        }
    }

    pub fn linear(l2_penalty: f64, objective: Objective) -> Self {
        LearnerSpec {
            kind: LearnerKind::RegularizedLinear {
                l2_penalty,
                max_iterations: 100,
                tolerance: 1e-8,
            },
            objective,
        }
    }

    pub fn forest(num_trees: usize, min_leaf: usize, honest_fraction: Option<f64>, objective: Objective) -> Self {
        LearnerSpec {
            kind: LearnerKind::RegressionForest {
                num_trees,
                min_leaf,
                mtry: None,
                honest_fraction,
            },
            objective,
        }
    }

    /// Default outcome / nested regression learner.
    pub fn default_regression() -> Self {
        Self::boosted(200, 0.1, 3, Objective::SquaredError)
    }

    /// Default baseline classifier for the audit.
    pub fn default_classifier() -> Self {
        Self::boosted(100, 0.3, 6, Objective::Logistic)
    }

    /// The same learner with another objective.
    pub fn with_objective(&self, objective: Objective) -> Self {
        LearnerSpec {
            kind: self.kind.clone(),
            objective,
        }
    }

    /// Linear learners consume the drop-first design view.
    pub fn wants_linear_view(&self) -> bool {
        matches!(self.kind, LearnerKind::RegularizedLinear { .. })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        match &self.kind {
            LearnerKind::RegressionForest {
                num_trees,
                min_leaf,
                mtry,
                honest_fraction,
            } => {
                if *num_trees == 0 || *min_leaf == 0 || *mtry == Some(0) {
                    return bad("forest counts must be >= 1".into());
                }
                if let Some(h) = honest_fraction {
                    if !(*h > 0.0 && *h < 1.0) {
                        return bad(format!("honest_fraction must be in (0, 1), got {h}"));
                    }
                }
            }
            LearnerKind::BoostedStumps {
                rounds,
                learning_rate,
                max_depth,
            } => {
                if *rounds == 0 || *max_depth == 0 {
                    return bad("boosting rounds and depth must be >= 1".into());
                }
                if !(*learning_rate > 0.0 && *learning_rate <= 1.0) {
                    return bad(format!("learning_rate must be in (0, 1], got {learning_rate}"));
                }
            }
            LearnerKind::RegularizedLinear {
                l2_penalty,
                max_iterations,
                tolerance,
            } => {
                if !(*l2_penalty >= 0.0) || *max_iterations == 0 || !(*tolerance > 0.0) {
                    return bad("linear learner needs l2_penalty >= 0, max_iterations >= 1, tolerance > 0".into());
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
enum Params {
    Constant(f64),
    Boosted(boost::BoostedModel),
    Forest(forest::RegressionForest),
    Linear(linear::LinearModel),
}

/// A trained learner. Prediction is a pure function of the model and the
/// feature matrix, whose columns must match the training feature names.
#[derive(Clone, Debug)]
pub struct FittedModel {
    spec: LearnerSpec,
    feature_names: Vec<String>,
    params: Params,
}

impl FittedModel {
    pub fn spec(&self) -> &LearnerSpec {
        &self.spec
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn is_constant(&self) -> bool {
        matches!(self.params, Params::Constant(_))
    }

    /// Fitted coefficients (intercept first) of a linear learner.
    pub fn linear_coefficients(&self) -> Option<&[f64]> {
        match &self.params {
            Params::Linear(m) => Some(m.coefficients()),
            _ => None,
        }
    }

    /// A model that always predicts `value`.
    pub fn constant(spec: LearnerSpec, feature_names: Vec<String>, value: f64) -> Self {
        FittedModel {
            spec,
            feature_names,
            params: Params::Constant(value),
        }
    }
}

/// Train `spec` on `features` (columns named by `names`) against `targets`.
///
/// Degenerate targets (all identical) yield a constant model and a warning.
pub fn fit(
    features: ArrayView2<f64>,
    names: &[String],
    targets: &[f64],
    spec: &LearnerSpec,
    seed: u64,
) -> Result<FittedModel> {
    spec.validate()?;
    let (n, p) = features.dim();
    if n != targets.len() {
        return Err(Error::InvalidArgument(format!("{n} feature rows but {} targets", targets.len())));
    }
    if names.len() != p {
        return Err(Error::ColumnMismatch(format!("{p} columns but {} names", names.len())));
    }
    if n < 2 {
        return Err(Error::Learner(format!("need at least 2 training rows, got {n}")));
    }
    if targets.iter().any(|t| !t.is_finite()) {
        return Err(Error::Learner("non-finite target".into()));
    }
    if spec.objective == Objective::Logistic && targets.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::Learner("logistic objective requires targets in {0, 1}".into()));
    }
    if targets.iter().all(|&t| t == targets[0]) {
        log::warn!("degenerate targets (all {}); fitting a constant model", targets[0]);
        return Ok(FittedModel::constant(spec.clone(), names.to_vec(), targets[0]));
    }
    if p == 0 {
        let mean = targets.iter().sum::<f64>() / n as f64;
        return Ok(FittedModel::constant(spec.clone(), Vec::new(), mean));
    }
    let logistic = spec.objective == Objective::Logistic;
    let params = match &spec.kind {
        LearnerKind::BoostedStumps {
            rounds,
            learning_rate,
            max_depth,
        } => Params::Boosted(boost::fit(features, targets, *rounds, *learning_rate, *max_depth, logistic)),
        LearnerKind::RegressionForest {
            num_trees,
            min_leaf,
            mtry,
            honest_fraction,
        } => Params::Forest(forest::fit(
            features,
            targets,
            &forest::ForestConfig {
                num_trees: *num_trees,
                min_leaf: *min_leaf,
                mtry: mtry.unwrap_or_else(|| (p as f64).sqrt().ceil() as usize).clamp(1, p.max(1)),
                honest_fraction: *honest_fraction,
            },
            seed,
        )),
        LearnerKind::RegularizedLinear {
            l2_penalty,
            max_iterations,
            tolerance,
        } => Params::Linear(linear::fit(features, targets, *l2_penalty, *max_iterations, *tolerance, logistic)?),
    };
    Ok(FittedModel {
        spec: spec.clone(),
        feature_names: names.to_vec(),
        params,
    })
}

/// Predict every row of `features`.
pub fn predict(model: &FittedModel, features: ArrayView2<f64>, names: &[String]) -> Result<Vec<f64>> {
    if names != model.feature_names.as_slice() || features.ncols() != names.len() {
        return Err(Error::ColumnMismatch(format!(
            "model trained on [{}], got [{}]",
            model.feature_names.join(", "),
            names.join(", ")
        )));
    }
    Ok(match &model.params {
        Params::Constant(v) => vec![*v; features.nrows()],
        Params::Boosted(m) => m.predict(features),
        Params::Forest(m) => m.predict(features),
        Params::Linear(m) => m.predict(features),
    })
}

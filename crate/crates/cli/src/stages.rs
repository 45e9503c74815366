//! Pipeline stages. Each returns its result in memory; writing is left to
//! the caller so that all output happens on one thread, in a fixed order.

use disparity_core::audit::{evaluate, evaluate_reruns, predict_labels, train_baseline, AuditReport, CiMode, PredictionSet};
use disparity_core::decompose::{estimate_decomposition, DecompositionResult};
use disparity_core::hetero_forest::{
    fit_direct_effect_forest, predict_effects, variable_importance, CausalForestModel, IndividualEffects,
    VariableImportance,
};
use disparity_core::rng::derive_seed;
use disparity_core::subgroup::{assign, summarize, SubgroupAssignment, SubgroupSummary};
use disparity_core::tabular::split_stratified;
use disparity_core::RoledDataset;

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};

pub fn decompose(cfg: &RunConfig, data: &RoledDataset, seed: u64) -> CliResult<DecompositionResult> {
    let mut dc = cfg.decomposition.clone();
    dc.seed = derive_seed(seed, "decompose", 0);
    estimate_decomposition(data, &dc).map_err(CliError::stage("decompose"))
}

pub struct ForestOutput {
    pub model: CausalForestModel,
    pub effects: IndividualEffects,
    /// Importance summed per source column.
    pub importance: VariableImportance,
}

pub fn forest(cfg: &RunConfig, data: &RoledDataset, seed: u64) -> CliResult<ForestOutput> {
    let model =
        fit_direct_effect_forest(data, &cfg.forest, derive_seed(seed, "forest", 0)).map_err(CliError::stage("forest"))?;
    let effects = predict_effects(&model, data).map_err(CliError::stage("forest"))?;
    let importance = variable_importance(&model).by_column(&model);
    Ok(ForestOutput {
        model,
        effects,
        importance,
    })
}

pub fn subgroup(
    cfg: &RunConfig,
    data: &RoledDataset,
    effects: &IndividualEffects,
) -> CliResult<(SubgroupAssignment, SubgroupSummary)> {
    let assignment = assign(effects, &cfg.binning()?).map_err(CliError::stage("subgroup"))?;
    let summary = summarize(data, &assignment).map_err(CliError::stage("subgroup"))?;
    Ok((assignment, summary))
}

/// Split stratified by sub-group, train the baseline classifier and label
/// the held-out rows. `run` picks the split and training substreams.
pub fn train_and_predict(
    cfg: &RunConfig,
    data: &RoledDataset,
    assignment: &SubgroupAssignment,
    seed: u64,
    run: u64,
) -> CliResult<PredictionSet> {
    let strata = assignment.groups_for(data.row_ids()).map_err(CliError::stage("split"))?;
    let split = split_stratified(data, cfg.test_fraction, &strata, derive_seed(seed, "split", run))
        .map_err(CliError::stage("split"))?;
    for w in &split.warnings {
        log::warn!("split: {w}");
    }
    let model = train_baseline(&split.train, &cfg.classifier, derive_seed(seed, "classifier", run))
        .map_err(CliError::stage("classifier"))?;
    predict_labels(&model, &split.test).map_err(CliError::stage("classifier"))
}

pub struct AuditOutput {
    /// Predictions of the first run; the ones the bootstrap audit uses.
    pub predictions: PredictionSet,
    pub report: AuditReport,
}

pub fn audit(cfg: &RunConfig, data: &RoledDataset, assignment: &SubgroupAssignment, seed: u64) -> CliResult<AuditOutput> {
    match cfg.ci {
        CiMode::Bootstrap => {
            let predictions = train_and_predict(cfg, data, assignment, seed, 0)?;
            let report = audit_predictions(cfg, data, assignment, &predictions, seed)?;
            Ok(AuditOutput { predictions, report })
        }
        CiMode::Reruns => {
            let runs = (0..cfg.reruns as u64)
                .map(|r| train_and_predict(cfg, data, assignment, seed, r))
                .collect::<CliResult<Vec<_>>>()?;
            let report = evaluate_reruns(&runs, assignment, data).map_err(CliError::stage("audit"))?;
            Ok(AuditOutput {
                predictions: runs.into_iter().next().expect("at least two runs"),
                report,
            })
        }
    }
}

/// Bootstrap audit of externally supplied predictions.
pub fn audit_predictions(
    cfg: &RunConfig,
    data: &RoledDataset,
    assignment: &SubgroupAssignment,
    predictions: &PredictionSet,
    seed: u64,
) -> CliResult<AuditReport> {
    evaluate(predictions, assignment, data, cfg.audit_bootstrap, derive_seed(seed, "audit", 0))
        .map_err(CliError::stage("audit"))
}

//! Counterfactual decomposition of the outcome gap between sensitive groups.
//!
//! With `A = mean(y | s2)`, `B = mean(y | s1)` and out-of-fold nuisance
//! predictions
//!
//! * `mu_s(i)  = E[Y | S = s, X_i, M_i]` (regression on S, X, M),
//! * `nu(i)    = E[mu_s2 | S = s2, X_i]` (regression on X among s2 rows),
//!
//! the s1-conditioned effects are
//!
//! * `ctf_de = mean_s1(mu_s2) - B`
//! * `ctf_ie = mean_s1(mu_s2 - nu)`
//! * `ctf_se = mean_s1(nu) - A`
//!
//! and `tv = A - B = ctf_de - ctf_ie - ctf_se` holds by construction. With
//! this orientation `-ctf_ie` and `-ctf_se` are the shares of `tv` carried by
//! the mediated and confounded paths ([`DecompositionResult::contributions`]).
//!
//! Natural effects average over every row: `nde = mean(r_de)` with `r_de` the
//! regression of `mu_s2 - mu_s1` on X among s1 rows, and
//! `nie = mean(r_12 - r_11)` with `r_1s` the regression of `mu_s1` on X among
//! rows of group `s`.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bootstrap::{percentile_interval, resample, std_dev};
use crate::error::{Error, Result};
use crate::learners::{cross_fit, CrossFitPlan, LearnerSpec};
use crate::rng::derive_seed;
use crate::round6;
use crate::tabular::{encode, DesignBlock, EncodedView, RoledDataset};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub point: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub std_error: Option<f64>,
    pub n_bootstrap: usize,
}

impl EffectEstimate {
    pub fn point_only(point: f64) -> Self {
        EffectEstimate {
            point,
            ci_low: None,
            ci_high: None,
            std_error: None,
            n_bootstrap: 0,
        }
    }

    /// Percentile interval from bootstrap replicates, widened if needed so
    /// that it always contains the point estimate.
    pub fn from_replicates(point: f64, replicates: &[f64], level: f64) -> Self {
        match percentile_interval(replicates, level) {
            Some((lo, hi)) => EffectEstimate {
                point,
                ci_low: Some(lo.min(point)),
                ci_high: Some(hi.max(point)),
                std_error: Some(std_dev(replicates)),
                n_bootstrap: replicates.len(),
            },
            None => EffectEstimate {
                n_bootstrap: replicates.len(),
                ..Self::point_only(point)
            },
        }
    }

    fn negated(&self) -> Self {
        EffectEstimate {
            point: -self.point,
            ci_low: self.ci_high.map(|v| -v),
            ci_high: self.ci_low.map(|v| -v),
            std_error: self.std_error,
            n_bootstrap: self.n_bootstrap,
        }
    }

    pub fn contains(&self, value: f64) -> bool {
        match (self.ci_low, self.ci_high) {
            (Some(lo), Some(hi)) => lo <= value && value <= hi,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecompositionConfig {
    /// Outcome regression on (S, X, M).
    pub mu: LearnerSpec,
    /// Nested regressions on X.
    pub nu: LearnerSpec,
    pub folds: usize,
    pub bootstrap: usize,
    pub seed: u64,
}

impl Default for DecompositionConfig {
    fn default() -> Self {
        DecompositionConfig {
            mu: LearnerSpec::default_regression(),
            nu: LearnerSpec::default_regression(),
            folds: 5,
            bootstrap: 100,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub sensitive: String,
    pub s1_levels: Vec<String>,
    pub s2_levels: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub n: usize,
    pub n_s1: usize,
    pub n_s2: usize,
    /// Out-of-fold RMSE of the outcome regression at the observed S.
    pub mu_rmse: f64,
    /// Out-of-fold RMSE of the s2 nested regression on s2 rows.
    pub nu_rmse: f64,
    pub failed_replicates: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Contributions {
    /// `-ctf_ie`: share of `tv` through the mediators.
    pub indirect: EffectEstimate,
    /// `-ctf_se`: share of `tv` through the confounders.
    pub spurious: EffectEstimate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionResult {
    pub tv: EffectEstimate,
    pub ctf_de: EffectEstimate,
    pub ctf_ie: EffectEstimate,
    pub ctf_se: EffectEstimate,
    pub nde: EffectEstimate,
    pub nie: EffectEstimate,
    pub baseline: Baseline,
    pub config: DecompositionConfig,
    pub diagnostics: Diagnostics,
}

impl DecompositionResult {
    pub fn contributions(&self) -> Contributions {
        Contributions {
            indirect: self.ctf_ie.negated(),
            spurious: self.ctf_se.negated(),
        }
    }

    pub fn effects(&self) -> [(&'static str, &EffectEstimate); 6] {
        [
            ("tv", &self.tv),
            ("ctf_de", &self.ctf_de),
            ("ctf_ie", &self.ctf_ie),
            ("ctf_se", &self.ctf_se),
            ("nde", &self.nde),
            ("nie", &self.nie),
        ]
    }
}

fn group_sizes(is_s2: &[bool]) -> (usize, usize) {
    let n2 = is_s2.iter().filter(|&&b| b).count();
    (is_s2.len() - n2, n2)
}

/// Observed gap `mean(y | s2) - mean(y | s1)`.
pub fn total_variation(data: &RoledDataset) -> Result<EffectEstimate> {
    let (n1, n2) = group_sizes(data.is_s2());
    if n1 == 0 || n2 == 0 {
        return Err(Error::EmptyGroup(format!("s1 has {n1} rows, s2 has {n2}")));
    }
    let (a, b) = group_means(data.y(), data.is_s2());
    Ok(EffectEstimate::point_only(a - b))
}

/// (mean over s2, mean over s1).
fn group_means(v: &[f64], is_s2: &[bool]) -> (f64, f64) {
    let (mut s1, mut s2, mut n1, mut n2) = (0.0, 0.0, 0usize, 0usize);
    for (&x, &g) in v.iter().zip(is_s2) {
        if g {
            s2 += x;
            n2 += 1;
        } else {
            s1 += x;
            n1 += 1;
        }
    }
    (s2 / n2 as f64, s1 / n1 as f64)
}

fn mean(v: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = v.fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

#[derive(Clone, Copy, Debug)]
struct Points {
    tv: f64,
    ctf_de: f64,
    ctf_ie: f64,
    ctf_se: f64,
    nde: f64,
    nie: f64,
    mu_rmse: f64,
    nu_rmse: f64,
}

impl Points {
    fn values(&self) -> [f64; 6] {
        [self.tv, self.ctf_de, self.ctf_ie, self.ctf_se, self.nde, self.nie]
    }
}

/// Folds stratified by group; rows sharing a row id share a fold.
fn stratified_plan(view: &EncodedView, k: usize, seed: u64) -> Result<CrossFitPlan> {
    let mut fold_of = vec![0usize; view.n()];
    for group in [false, true] {
        let rows: Vec<usize> = (0..view.n()).filter(|&i| view.is_s2[i] == group).collect();
        let ids: Vec<usize> = rows.iter().map(|&i| view.row_ids[i]).collect();
        let plan = CrossFitPlan::grouped(&ids, k, derive_seed(seed, "decompose_folds", u64::from(group)))
            .map_err(|e| e.context(format!("{} rows", if group { "s2" } else { "s1" })))?;
        for (&i, &f) in rows.iter().zip(plan.fold_of()) {
            fold_of[i] = f;
        }
    }
    CrossFitPlan::from_folds(fold_of, k)
}

/// Cross-fit regression of `target` on X trained on rows with `mask`,
/// predicted out-of-fold for every row.
fn x_regression(
    view: &EncodedView,
    spec: &LearnerSpec,
    plan: &CrossFitPlan,
    target: &[f64],
    mask: &[bool],
    seed: u64,
    label: &str,
) -> Result<Vec<f64>> {
    let block: &DesignBlock = view.block(spec.wants_linear_view());
    let (x, names) = block.select(&block.columns_for(false, true, false));
    cross_fit(x.view(), &names, target, spec, plan, Some(mask), seed)
        .and_then(|m| m.predict(x.view(), &names))
        .map_err(|e| e.context(label.to_string()))
}

fn point_estimates(view: &EncodedView, cfg: &DecompositionConfig, seed: u64) -> Result<Points> {
    let (n1, n2) = group_sizes(&view.is_s2);
    if n1 == 0 || n2 == 0 {
        return Err(Error::EmptyGroup(format!("s1 has {n1} rows, s2 has {n2}")));
    }
    if cfg.folds < 2 || cfg.folds > n1.min(n2) {
        return Err(Error::InvalidArgument(format!(
            "{} folds for groups of {n1} (s1) and {n2} (s2) rows",
            cfg.folds
        )));
    }
    let plan = stratified_plan(view, cfg.folds, seed)?;
    let s1_mask: Vec<bool> = view.is_s2.iter().map(|&b| !b).collect();

    // outcome regression on (S, X, M), scored at both values of S
    let block = view.block(cfg.mu.wants_linear_view());
    let (mut x, names) = block.select(&block.columns_for(true, true, true));
    let mu_models = cross_fit(x.view(), &names, &view.y, &cfg.mu, &plan, None, derive_seed(seed, "mu", 0))
        .map_err(|e| e.context("outcome regression"))?;
    x.column_mut(DesignBlock::SENSITIVE_COL).fill(1.0);
    let mu2 = mu_models.predict(x.view(), &names)?;
    x.column_mut(DesignBlock::SENSITIVE_COL).fill(0.0);
    let mu1 = mu_models.predict(x.view(), &names)?;

    let nu = x_regression(view, &cfg.nu, &plan, &mu2, &view.is_s2, derive_seed(seed, "nu", 0), "nested regression (s2)")?;

    let (a, b) = group_means(&view.y, &view.is_s2);
    let s1 = |v: &[f64]| mean((0..view.n()).filter(|&i| !view.is_s2[i]).map(|i| v[i]));
    let ctf_de = s1(&mu2) - b;
    let ctf_ie = mean((0..view.n()).filter(|&i| !view.is_s2[i]).map(|i| mu2[i] - nu[i]));
    let ctf_se = s1(&nu) - a;

    let diff: Vec<f64> = mu2.iter().zip(&mu1).map(|(p, q)| p - q).collect();
    let r_de = x_regression(view, &cfg.nu, &plan, &diff, &s1_mask, derive_seed(seed, "nu", 1), "direct-effect regression")?;
    let r11 = x_regression(view, &cfg.nu, &plan, &mu1, &s1_mask, derive_seed(seed, "nu", 2), "nested regression (s1)")?;
    let r12 = x_regression(view, &cfg.nu, &plan, &mu1, &view.is_s2, derive_seed(seed, "nu", 3), "cross-world regression")?;
    let nde = mean(r_de.iter().copied());
    let nie = mean(r12.iter().zip(&r11).map(|(p, q)| p - q));

    let rmse = |pairs: &mut dyn Iterator<Item = (f64, f64)>| {
        let (s, n) = pairs.fold((0.0, 0usize), |(s, n), (p, q)| (s + (p - q).powi(2), n + 1));
        (s / n as f64).sqrt()
    };
    let mu_rmse = rmse(&mut (0..view.n()).map(|i| (if view.is_s2[i] { mu2[i] } else { mu1[i] }, view.y[i])));
    let nu_rmse = rmse(&mut (0..view.n()).filter(|&i| view.is_s2[i]).map(|i| (nu[i], mu2[i])));
    Ok(Points {
        tv: a - b,
        ctf_de,
        ctf_ie,
        ctf_se,
        nde,
        nie,
        mu_rmse,
        nu_rmse,
    })
}

/// Estimate the six effects with cross-fitted nuisances and percentile
/// bootstrap intervals (`cfg.bootstrap` replicates, rows resampled with
/// replacement, full re-estimation per replicate).
///
/// Replicates that fail (e.g. a resample leaves a group too small for the
/// fold count) are skipped and counted in the diagnostics.
pub fn estimate_decomposition(data: &RoledDataset, cfg: &DecompositionConfig) -> Result<DecompositionResult> {
    cfg.mu.validate()?;
    cfg.nu.validate()?;
    let view = encode(data);
    let points = point_estimates(&view, cfg, cfg.seed)?;

    let replicates: Vec<Option<[f64; 6]>> = (0..cfg.bootstrap)
        .into_par_iter()
        .map(|b| {
            let rows = resample(view.n(), cfg.seed, b);
            let sub = view.take_rows(&rows);
            match point_estimates(&sub, cfg, derive_seed(cfg.seed, "bootstrap_fit", b as u64)) {
                Ok(p) => Some(p.values()),
                Err(e) => {
                    log::warn!("bootstrap replicate {b} skipped: {e}");
                    None
                }
            }
        })
        .collect();
    let ok: Vec<[f64; 6]> = replicates.iter().flatten().copied().collect();
    let failed = replicates.len() - ok.len();
    let est = |j: usize, point: f64| {
        let reps: Vec<f64> = ok.iter().map(|r| r[j]).collect();
        EffectEstimate::from_replicates(point, &reps, 0.95)
    };
    let v = points.values();
    let (n1, n2) = group_sizes(&view.is_s2);
    Ok(DecompositionResult {
        tv: est(0, v[0]),
        ctf_de: est(1, v[1]),
        ctf_ie: est(2, v[2]),
        ctf_se: est(3, v[3]),
        nde: est(4, v[4]),
        nie: est(5, v[5]),
        baseline: Baseline {
            sensitive: data.schema().sensitive.clone(),
            s1_levels: data.s1_levels().to_vec(),
            s2_levels: data.s2_levels().to_vec(),
        },
        config: cfg.clone(),
        diagnostics: Diagnostics {
            n: view.n(),
            n_s1: n1,
            n_s2: n2,
            mu_rmse: points.mu_rmse,
            nu_rmse: points.nu_rmse,
            failed_replicates: failed,
        },
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ReportRow {
    pub effect: String,
    pub point: f64,
    pub std_error: Option<f64>,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub n_bootstrap: usize,
    /// "point (std dev)".
    pub summary: String,
    /// "[low, high]" or "n/a".
    pub interval: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub rows: Vec<ReportRow>,
    pub contributions: Contributions,
    pub baseline: Baseline,
    pub config: DecompositionConfig,
    pub diagnostics: Diagnostics,
}

/// Standard deviation with three decimals, or enough to show its first
/// significant digit.
fn format_sd(sd: f64) -> String {
    let digits = if sd > 0.0 { (-sd.log10()).ceil().max(3.0) as usize } else { 3 };
    format!("{sd:.digits$}")
}

/// "point (sd)", e.g. "0.016 (0.0001)".
pub fn format_estimate(point: f64, sd: Option<f64>) -> String {
    match sd {
        Some(sd) => format!("{point:.3} ({})", format_sd(sd)),
        None => format!("{point:.3} (n/a)"),
    }
}

fn format_interval(e: &EffectEstimate) -> String {
    match (e.ci_low, e.ci_high) {
        (Some(lo), Some(hi)) => format!("[{lo:.3}, {hi:.3}]"),
        _ => "n/a".into(),
    }
}

fn round_opt(v: Option<f64>) -> Option<f64> {
    v.map(round6)
}

fn rounded(e: &EffectEstimate) -> EffectEstimate {
    EffectEstimate {
        point: round6(e.point),
        ci_low: round_opt(e.ci_low),
        ci_high: round_opt(e.ci_high),
        std_error: round_opt(e.std_error),
        n_bootstrap: e.n_bootstrap,
    }
}

pub fn decomposition_report(result: &DecompositionResult) -> DecompositionReport {
    let rows = result
        .effects()
        .into_iter()
        .map(|(name, e)| ReportRow {
            effect: name.to_string(),
            point: round6(e.point),
            std_error: round_opt(e.std_error),
            ci_low: round_opt(e.ci_low),
            ci_high: round_opt(e.ci_high),
            n_bootstrap: e.n_bootstrap,
            summary: format_estimate(e.point, e.std_error),
            interval: format_interval(e),
        })
        .collect();
    let c = result.contributions();
    let mut diagnostics = result.diagnostics.clone();
    diagnostics.mu_rmse = round6(diagnostics.mu_rmse);
    diagnostics.nu_rmse = round6(diagnostics.nu_rmse);
    DecompositionReport {
        rows,
        contributions: Contributions {
            indirect: rounded(&c.indirect),
            spurious: rounded(&c.spurious),
        },
        baseline: result.baseline.clone(),
        config: result.config.clone(),
        diagnostics,
    }
}

fn opt_cell(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

impl DecompositionReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    /// One row per effect: effect, point, std_error, ci_low, ci_high, n_bootstrap.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = csv::Writer::from_path(path.as_ref())?;
        w.write_record(["effect", "point", "std_error", "ci_low", "ci_high", "n_bootstrap"])?;
        for r in &self.rows {
            w.write_record([
                r.effect.clone(),
                format!("{:.6}", r.point),
                opt_cell(r.std_error),
                opt_cell(r.ci_low),
                opt_cell(r.ci_high),
                r.n_bootstrap.to_string(),
            ])?;
        }
        w.flush().map_err(|e| Error::io(path.as_ref(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn estimate_formatting() {
        assert_eq!(format_estimate(0.016, Some(0.0001)), "0.016 (0.0001)");
        assert_eq!(format_estimate(0.87, Some(0.003)), "0.870 (0.003)");
        assert_eq!(format_estimate(0.104, None), "0.104 (n/a)");
        assert_eq!(format_estimate(-0.02, Some(0.0)), "-0.020 (0.000)");
    }

    #[test]
    fn replicate_interval_contains_point() {
        let e = EffectEstimate::from_replicates(0.5, &[0.6, 0.7, 0.8, 0.9], 0.95);
        assert!(e.ci_low.unwrap() <= 0.5 && 0.5 <= e.ci_high.unwrap());
        let e = EffectEstimate::from_replicates(0.5, &[0.6], 0.95);
        assert_eq!(e.ci_low, None);
        assert_eq!(e.n_bootstrap, 1);
    }

    #[test]
    fn negation_flips_interval() {
        let e = EffectEstimate::from_replicates(0.1, &[0.0, 0.1, 0.2], 0.95);
        let n = e.negated();
        assert_eq!(n.point, -0.1);
        assert_eq!(n.ci_low, e.ci_high.map(|v| -v));
    }
}

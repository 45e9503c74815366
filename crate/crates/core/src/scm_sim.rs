//! Synthetic data from structural causal models over (X, S, M, Y) with exact
//! ground-truth effects.
//!
//! The graph is fixed: X -> S, X -> M, X -> Y, S -> M, S -> Y, M -> Y.
//! Two families are supported. [`DiscreteScm`] tabulates every conditional
//! distribution over finite state spaces and its truth is exact enumeration.
//! [`LinearScm`] is Gaussian-linear with an optional logistic confounding
//! link; its truth is closed form (continuous outcome) or a 129-point
//! Gauss-Hermite integral (thresholded outcome).
//!
//! Effects are written with `Q(s, s', s'') = E[Y_{s, M_{s'}} | S = s'']`:
//! `tv = Q(2,2,2) - Q(1,1,1)`, `ctf_de = Q(2,1,1) - Q(1,1,1)`,
//! `ctf_ie = Q(2,1,1) - Q(2,2,1)`, `ctf_se = Q(2,2,1) - Q(2,2,2)`, so that
//! `tv = ctf_de - ctf_ie - ctf_se` identically. The natural effects average
//! over P(x): `nde = E[Y_{2,M_1}] - E[Y_{1,M_1}]`, `nie = E[Y_{1,M_2}] - E[Y_{1,M_1}]`.

use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::rng::substream;
use crate::tabular::{Column, ColumnData, ColumnSpec, Dataset, LevelSet, RoleSchema};

pub const MAX_CONFOUNDER_STATES: usize = 64;
const BLOCK: usize = 4096;
const TOL: f64 = 1e-12;

/// Finite-state SCM given by conditional probability tables.
///
/// Tables are indexed `[s][x][m]` with `s = 0` for s1 and `s = 1` for s2.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteScm {
    pub p_x: Vec<f64>,
    /// P(S = s2 | x).
    #[serde(alias = "p_s_given_x")]
    pub p_s2_given_x: Vec<f64>,
    pub p_m_given_sx: [Vec<Vec<f64>>; 2],
    /// P(Y = 1 | s, x, m).
    pub p_y_given_smx: [Vec<Vec<f64>>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum OutcomeMode {
    Continuous,
    /// Y = 1{y* > threshold}.
    Binary { threshold: f64 },
}

/// Direct effect `b + delta * 1{x[index] > threshold}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectModifier {
    pub index: usize,
    pub threshold: f64,
    pub delta: f64,
}

/// `m = a*s + g.x + sigma_m*e1`, `y* = b*s + d*m + t.x + sigma_y*e2` with
/// `x ~ N(0, I)` and `logit P(S = s2 | x) = logit(p_s2) + confounding.x`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearScm {
    pub p_s2: f64,
    pub x_dim: usize,
    pub a: f64,
    pub b: f64,
    pub d: f64,
    pub g: Vec<f64>,
    pub t: Vec<f64>,
    pub sigma_m: f64,
    pub sigma_y: f64,
    #[serde(default)]
    pub confounding: Option<Vec<f64>>,
    pub outcome: OutcomeMode,
    #[serde(default)]
    pub effect_modifier: Option<EffectModifier>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScmSpec {
    Discrete(DiscreteScm),
    Linear(LinearScm),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub tv: f64,
    pub ctf_de: f64,
    pub ctf_ie: f64,
    pub ctf_se: f64,
    pub nde: f64,
    pub nie: f64,
}

impl GroundTruth {
    fn from_q(q: impl Fn(usize, usize, usize) -> f64, q_all: impl Fn(usize, usize) -> f64) -> Self {
        let base = q(0, 0, 0);
        let de_cross = q(1, 0, 0);
        let med_cross = q(1, 1, 0);
        let top = q(1, 1, 1);
        GroundTruth {
            tv: top - base,
            ctf_de: de_cross - base,
            ctf_ie: de_cross - med_cross,
            ctf_se: med_cross - top,
            nde: q_all(1, 0) - q_all(0, 0),
            nie: q_all(0, 1) - q_all(0, 0),
        }
    }

    /// The six effects as (name, value) pairs in report order.
    pub fn entries(&self) -> [(&'static str, f64); 6] {
        [
            ("tv", self.tv),
            ("ctf_de", self.ctf_de),
            ("ctf_ie", self.ctf_ie),
            ("ctf_se", self.ctf_se),
            ("nde", self.nde),
            ("nie", self.nie),
        ]
    }
}

fn check_distribution(p: &[f64], what: &str) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidSpec(format!("{what}: empty state space")));
    }
    check_probabilities(p, what)?;
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > TOL {
        return Err(Error::InvalidSpec(format!("{what}: sums to {s}, not 1")));
    }
    Ok(())
}

fn check_probabilities(p: &[f64], what: &str) -> Result<()> {
    match p.iter().find(|v| !(0.0..=1.0).contains(*v)) {
        Some(v) => Err(Error::InvalidSpec(format!("{what}: probability {v} outside [0, 1]"))),
        None => Ok(()),
    }
}

fn draw_categorical<R: Rng>(rng: &mut R, p: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (k, &pk) in p.iter().enumerate() {
        acc += pk;
        if u < acc {
            return k;
        }
    }
    // rounding slack: last state with positive mass
    p.iter().rposition(|&v| v > 0.0).unwrap_or(p.len() - 1)
}

impl DiscreteScm {
    pub fn nx(&self) -> usize {
        self.p_x.len()
    }

    pub fn nm(&self) -> usize {
        self.p_m_given_sx[0].first().map_or(0, |r| r.len())
    }

    pub fn validate(&self) -> Result<()> {
        let nx = self.nx();
        if nx > MAX_CONFOUNDER_STATES {
            return Err(Error::InvalidSpec(format!("{nx} confounder states exceed {MAX_CONFOUNDER_STATES}")));
        }
        check_distribution(&self.p_x, "p_x")?;
        if self.p_s2_given_x.len() != nx {
            return Err(Error::InvalidSpec("p_s2_given_x length differs from p_x".into()));
        }
        check_probabilities(&self.p_s2_given_x, "p_s2_given_x")?;
        let nm = self.nm();
        if nm == 0 {
            return Err(Error::InvalidSpec("mediator state space is empty".into()));
        }
        for s in 0..2 {
            if self.p_m_given_sx[s].len() != nx || self.p_y_given_smx[s].len() != nx {
                return Err(Error::InvalidSpec(format!("tables for s={s} do not cover every x state")));
            }
            for x in 0..nx {
                let pm = &self.p_m_given_sx[s][x];
                let py = &self.p_y_given_smx[s][x];
                if pm.len() != nm || py.len() != nm {
                    return Err(Error::InvalidSpec(format!("inconsistent mediator state count at s={s}, x={x}")));
                }
                check_distribution(pm, &format!("p_m_given_sx[{s}][{x}]"))?;
                check_probabilities(py, &format!("p_y_given_smx[{s}][{x}]"))?;
            }
        }
        let p_s2: f64 = (0..nx).map(|x| self.p_x[x] * self.p_s2_given_x[x]).sum();
        if !(p_s2 > 0.0 && p_s2 < 1.0) {
            return Err(Error::InvalidSpec(format!("P(S = s2) = {p_s2}; both groups need positive mass")));
        }
        Ok(())
    }

    /// Random valid spec with `nx` confounder and `nm` mediator states.
    pub fn random<R: Rng>(rng: &mut R, nx: usize, nm: usize) -> Self {
        let mut simplex = |k: usize| {
            let v: Vec<f64> = (0..k).map(|_| rng.gen_range(0.1..1.0)).collect();
            let s: f64 = v.iter().sum();
            v.into_iter().map(|x| x / s).collect::<Vec<f64>>()
        };
        let p_x = simplex(nx);
        let p_m_given_sx = [(0..nx).map(|_| simplex(nm)).collect(), (0..nx).map(|_| simplex(nm)).collect()];
        let p_s2_given_x = (0..nx).map(|_| rng.gen_range(0.15..0.85)).collect();
        let mut table = || (0..nx).map(|_| (0..nm).map(|_| rng.gen_range(0.05..0.95)).collect()).collect();
        let p_y_given_smx = [table(), table()];
        DiscreteScm {
            p_x,
            p_s2_given_x,
            p_m_given_sx,
            p_y_given_smx,
        }
    }

    fn p_s(&self, x: usize, s: usize) -> f64 {
        if s == 1 {
            self.p_s2_given_x[x]
        } else {
            1.0 - self.p_s2_given_x[x]
        }
    }

    /// P(x | s) by Bayes.
    fn p_x_given_s(&self, s: usize) -> Vec<f64> {
        let joint: Vec<f64> = (0..self.nx()).map(|x| self.p_x[x] * self.p_s(x, s)).collect();
        let z: f64 = joint.iter().sum();
        joint.into_iter().map(|j| j / z).collect()
    }

    /// Σ_m P(m | s_med, x) μ(s, x, m).
    fn inner(&self, s: usize, s_med: usize, x: usize) -> f64 {
        self.p_m_given_sx[s_med][x]
            .iter()
            .zip(&self.p_y_given_smx[s][x])
            .map(|(pm, mu)| pm * mu)
            .sum()
    }

    pub fn true_effects(&self) -> Result<GroundTruth> {
        self.validate()?;
        let px_s = [self.p_x_given_s(0), self.p_x_given_s(1)];
        let q = |s: usize, s_med: usize, s_cond: usize| -> f64 {
            (0..self.nx()).map(|x| px_s[s_cond][x] * self.inner(s, s_med, x)).sum()
        };
        let q_all = |s: usize, s_med: usize| -> f64 { (0..self.nx()).map(|x| self.p_x[x] * self.inner(s, s_med, x)).sum() };
        Ok(GroundTruth::from_q(q, q_all))
    }

    fn sample_row<R: Rng>(&self, rng: &mut R) -> (usize, usize, usize, bool) {
        let x = draw_categorical(rng, &self.p_x);
        let s = usize::from(rng.gen::<f64>() < self.p_s2_given_x[x]);
        let m = draw_categorical(rng, &self.p_m_given_sx[s][x]);
        let y = rng.gen::<f64>() < self.p_y_given_smx[s][x][m];
        (x, s, m, y)
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Nodes and weights for E[f(T)], T ~ N(0, 1), from 129-point Gauss-Hermite.
fn normal_quadrature() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| {
        let (x, w) = gauss_hermite(129);
        let norm = std::f64::consts::PI.sqrt();
        (
            x.iter().map(|v| v * std::f64::consts::SQRT_2).collect(),
            w.iter().map(|v| v / norm).collect(),
        )
    })
}

/// Gauss-Hermite rule for weight exp(-x^2) by Newton iteration on the
/// orthonormal Hermite recurrence.
fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let nf = n as f64;
    let mut z: f64 = 0.0;
    for i in 0..n.div_ceil(2) {
        z = match i {
            0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
            1 => z - 1.14 * nf.powf(0.426) / z,
            2 => 1.86 * z - 0.86 * x[0],
            3 => 1.91 * z - 0.91 * x[1],
            _ => 2.0 * z - x[i - 2],
        };
        let mut pp = 0.0;
        for _ in 0..100 {
            let (mut p1, mut p2) = (PIM4, 0.0);
            for j in 0..n {
                let p3 = p2;
                p2 = p1;
                let jf = j as f64;
                p1 = z * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z1.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

impl LinearScm {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if !(self.p_s2 > 0.0 && self.p_s2 < 1.0) {
            return bad(format!("p_s2 must be in (0, 1), got {}", self.p_s2));
        }
        if self.g.len() != self.x_dim || self.t.len() != self.x_dim {
            return bad(format!("g and t must have x_dim = {} entries", self.x_dim));
        }
        if self.confounding.as_ref().is_some_and(|c| c.len() != self.x_dim) {
            return bad("confounding must have x_dim entries".into());
        }
        if !(self.sigma_m >= 0.0 && self.sigma_y >= 0.0) {
            return bad("noise scales must be >= 0".into());
        }
        let all = [self.a, self.b, self.d, self.sigma_m, self.sigma_y]
            .into_iter()
            .chain(self.g.iter().copied())
            .chain(self.t.iter().copied())
            .chain(self.confounding.iter().flatten().copied());
        if all.into_iter().any(|v| !v.is_finite()) {
            return bad("non-finite coefficient".into());
        }
        if let OutcomeMode::Binary { threshold } = self.outcome {
            if !threshold.is_finite() || self.d * self.d * self.sigma_m * self.sigma_m + self.sigma_y * self.sigma_y == 0.0 {
                return bad("binary outcome needs a finite threshold and positive outcome noise".into());
            }
        }
        if let Some(em) = &self.effect_modifier {
            if em.index >= self.x_dim || !em.threshold.is_finite() || !em.delta.is_finite() {
                return bad("effect modifier index out of range or non-finite".into());
            }
            if matches!(self.outcome, OutcomeMode::Binary { .. }) {
                return bad("effect modifiers are supported for continuous outcomes only".into());
            }
            if self.confounding.as_ref().is_some_and(|c| c[em.index] != 0.0) {
                return bad("the effect-modifier coordinate must not enter the confounding link".into());
            }
        }
        Ok(())
    }

    fn logit_base(&self) -> f64 {
        (self.p_s2 / (1.0 - self.p_s2)).ln()
    }

    /// Norm of the confounding direction and the component of `h` along it.
    fn projection(&self, h: &[f64]) -> (f64, f64) {
        match &self.confounding {
            Some(c) => {
                let norm = c.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    (0.0, 0.0)
                } else {
                    (norm, h.iter().zip(c).map(|(a, b)| a * b).sum::<f64>() / norm)
                }
            }
            None => (0.0, 0.0),
        }
    }

    /// E[f(T) | S = s] where T ~ N(0,1) is the coordinate of x along the
    /// confounding direction.
    fn conditional_expectation(&self, s: usize, f: impl Fn(f64) -> f64) -> f64 {
        let (alpha, _) = self.projection(&self.g);
        let (nodes, weights) = normal_quadrature();
        let (mut num, mut den) = (0.0, 0.0);
        for (&t, &w) in nodes.iter().zip(weights) {
            let p2 = sigmoid(self.logit_base() + alpha * t);
            let ws = w * if s == 1 { p2 } else { 1.0 - p2 };
            num += ws * f(t);
            den += ws;
        }
        num / den
    }

    /// Total loading of y* on x: d*g + t.
    fn h(&self) -> Vec<f64> {
        self.g.iter().zip(&self.t).map(|(g, t)| self.d * g + t).collect()
    }

    /// `Q(s, s_med, cond)`; `cond = None` averages over P(x).
    fn q(&self, s: usize, s_med: usize, cond: Option<usize>) -> f64 {
        let (s, s_med) = (s as f64, s_med as f64);
        let h = self.h();
        let (_, h_u) = self.projection(&h);
        match self.outcome {
            OutcomeMode::Continuous => {
                let mean_t = cond.map_or(0.0, |c| self.conditional_expectation(c, |t| t));
                let modifier = self
                    .effect_modifier
                    .as_ref()
                    .map_or(0.0, |em| em.delta * (1.0 - std_normal_cdf(em.threshold)));
                s * (self.b + modifier) + self.d * self.a * s_med + h_u * mean_t
            }
            OutcomeMode::Binary { threshold } => {
                let h_sq: f64 = h.iter().map(|v| v * v).sum();
                let spread = (self.d * self.d * self.sigma_m * self.sigma_m
                    + self.sigma_y * self.sigma_y
                    + (h_sq - h_u * h_u).max(0.0))
                .sqrt();
                let shift = self.b * s + self.d * self.a * s_med - threshold;
                let f = |t: f64| std_normal_cdf((shift + h_u * t) / spread);
                match cond {
                    Some(c) => self.conditional_expectation(c, f),
                    None => {
                        let (nodes, weights) = normal_quadrature();
                        nodes.iter().zip(weights).map(|(&t, &w)| w * f(t)).sum()
                    }
                }
            }
        }
    }

    pub fn true_effects(&self) -> Result<GroundTruth> {
        self.validate()?;
        Ok(GroundTruth::from_q(
            |s, sm, c| self.q(s, sm, Some(c)),
            |s, sm| self.q(s, sm, None),
        ))
    }

    fn sample_row<R: Rng>(&self, rng: &mut R) -> (Vec<f64>, bool, f64, f64) {
        let x: Vec<f64> = (0..self.x_dim).map(|_| rng.sample(StandardNormal)).collect();
        let lin: f64 = self
            .confounding
            .as_ref()
            .map_or(0.0, |c| c.iter().zip(&x).map(|(a, b)| a * b).sum());
        let s2 = rng.gen::<f64>() < sigmoid(self.logit_base() + lin);
        let s = f64::from(u8::from(s2));
        let dot = |coef: &[f64]| coef.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>();
        let e_m: f64 = rng.sample(StandardNormal);
        let e_y: f64 = rng.sample(StandardNormal);
        let m = self.a * s + dot(&self.g) + self.sigma_m * e_m;
        let b = self.b
            + self
                .effect_modifier
                .as_ref()
                .map_or(0.0, |em| if x[em.index] > em.threshold { em.delta } else { 0.0 });
        let y_star = b * s + self.d * m + dot(&self.t) + self.sigma_y * e_y;
        let y = match self.outcome {
            OutcomeMode::Continuous => y_star,
            OutcomeMode::Binary { threshold } => f64::from(u8::from(y_star > threshold)),
        };
        (x, s2, m, y)
    }
}

const S_LEVELS: [&str; 2] = ["s1", "s2"];
const Y_LEVELS: [&str; 2] = ["0", "1"];

fn level_names(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|i| format!("{prefix}{i}")).collect()
}

fn categorical_spec(name: &str, levels: &[String]) -> ColumnSpec {
    let refs: Vec<&str> = levels.iter().map(String::as_str).collect();
    ColumnSpec::categorical(name, &refs)
}

/// Run `row` for every index in parallel blocks with per-block substreams.
fn sample_blocks<T: Send, F>(n: usize, seed: u64, row: F) -> Vec<T>
where
    F: Fn(&mut crate::rng::StreamRng) -> T + Sync,
{
    let blocks = n.div_ceil(BLOCK);
    let parts: Vec<Vec<T>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = substream(seed, "scm_sample", b as u64);
            let len = BLOCK.min(n - b * BLOCK);
            (0..len).map(|_| row(&mut rng)).collect()
        })
        .collect();
    parts.into_iter().flatten().collect()
}

impl ScmSpec {
    pub fn from_json_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let spec: ScmSpec = serde_json::from_str(&text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ScmSpec::Discrete(d) => d.validate(),
            ScmSpec::Linear(l) => l.validate(),
        }
    }

    pub fn true_effects(&self) -> Result<GroundTruth> {
        match self {
            ScmSpec::Discrete(d) => d.true_effects(),
            ScmSpec::Linear(l) => l.true_effects(),
        }
    }

    /// Role schema matching the columns produced by [`sample`].
    pub fn role_schema(&self) -> RoleSchema {
        let (confounders, continuous_y) = match self {
            ScmSpec::Discrete(_) => (vec!["x".to_string()], false),
            ScmSpec::Linear(l) => (
                (1..=l.x_dim).map(|j| format!("x{j}")).collect(),
                l.outcome == OutcomeMode::Continuous,
            ),
        };
        RoleSchema {
            sensitive: "s".into(),
            s1_levels: LevelSet::Listed(vec![S_LEVELS[0].into()]),
            outcome: "y".into(),
            positive_level: if continuous_y { None } else { Some("1".into()) },
            confounders,
            mediators: vec!["m".into()],
            columns: self.column_specs(),
        }
    }

    /// Column specs of [`sample`] output, in column order.
    pub fn column_specs(&self) -> Vec<ColumnSpec> {
        let s_levels: Vec<String> = S_LEVELS.iter().map(|s| s.to_string()).collect();
        let y_levels: Vec<String> = Y_LEVELS.iter().map(|s| s.to_string()).collect();
        match self {
            ScmSpec::Discrete(d) => vec![
                categorical_spec("x", &level_names("x", d.nx())),
                categorical_spec("s", &s_levels),
                categorical_spec("m", &level_names("m", d.nm())),
                categorical_spec("y", &y_levels),
            ],
            ScmSpec::Linear(l) => {
                let mut specs: Vec<ColumnSpec> = (1..=l.x_dim).map(|j| ColumnSpec::continuous(format!("x{j}"))).collect();
                specs.push(categorical_spec("s", &s_levels));
                specs.push(ColumnSpec::continuous("m"));
                specs.push(match l.outcome {
                    OutcomeMode::Continuous => ColumnSpec::continuous("y"),
                    OutcomeMode::Binary { .. } => categorical_spec("y", &y_levels),
                });
                specs
            }
        }
    }
}

/// Draw `n` i.i.d. rows in topological order X -> S -> M -> Y.
pub fn sample(spec: &ScmSpec, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample size must be >= 1".into()));
    }
    spec.validate()?;
    let data: Vec<ColumnData> = match spec {
        ScmSpec::Discrete(d) => {
            let rows = sample_blocks(n, seed, |rng| d.sample_row(rng));
            vec![
                ColumnData::Categorical(rows.iter().map(|r| r.0 as u32).collect()),
                ColumnData::Categorical(rows.iter().map(|r| r.1 as u32).collect()),
                ColumnData::Categorical(rows.iter().map(|r| r.2 as u32).collect()),
                ColumnData::Categorical(rows.iter().map(|r| u32::from(r.3)).collect()),
            ]
        }
        ScmSpec::Linear(l) => {
            let rows = sample_blocks(n, seed, |rng| l.sample_row(rng));
            let mut cols: Vec<ColumnData> = (0..l.x_dim)
                .map(|j| ColumnData::Continuous(rows.iter().map(|r| r.0[j]).collect()))
                .collect();
            cols.push(ColumnData::Categorical(rows.iter().map(|r| u32::from(r.1)).collect()));
            cols.push(ColumnData::Continuous(rows.iter().map(|r| r.2).collect()));
            cols.push(match l.outcome {
                OutcomeMode::Continuous => ColumnData::Continuous(rows.iter().map(|r| r.3).collect()),
                OutcomeMode::Binary { .. } => ColumnData::Categorical(rows.iter().map(|r| r.3 as u32).collect()),
            });
            cols
        }
    };
    let columns = spec.column_specs().into_iter().zip(data).map(|(spec, data)| Column { spec, data }).collect();
    Dataset::new(columns)
}

pub fn true_effects(spec: &ScmSpec) -> Result<GroundTruth> {
    spec.true_effects()
}

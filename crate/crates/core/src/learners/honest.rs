//! Honest causal trees.
//!
//! Splits maximise `(n_L n_R / n_P^2) (tau_L - tau_R)^2` on the structure
//! half, where `tau` is the within-node least-squares slope of outcome on
//! treatment. For a raw 0/1 treatment that slope is exactly
//! `mean(y | treated) - mean(y | control)`. Leaf effects are re-estimated on
//! the disjoint estimation half; a node whose estimation rows lack an arm
//! inherits its parent's effect.

use ndarray::{ArrayView1, ArrayView2};
use rand::seq::{index::sample, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::binning::{BinMapper, BinnedMatrix, MAX_BINS};
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HonestTreeParams {
    pub min_leaf: usize,
    /// Candidate features per split; `None` uses every feature.
    #[serde(default)]
    pub mtry: Option<usize>,
    pub honest_fraction: f64,
    #[serde(default)]
    pub max_depth: Option<usize>,
}

impl Default for HonestTreeParams {
    fn default() -> Self {
        HonestTreeParams {
            min_leaf: 10,
            mtry: None,
            honest_fraction: 0.5,
            max_depth: None,
        }
    }
}

/// Sufficient statistics for a node's treatment-effect slope.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: usize,
    pub n_treated: usize,
    pub sw: f64,
    pub sy: f64,
    pub swy: f64,
    pub sww: f64,
}

impl Moments {
    #[inline]
    pub fn add(&mut self, treated: bool, w: f64, y: f64) {
        self.n += 1;
        self.n_treated += usize::from(treated);
        self.sw += w;
        self.sy += y;
        self.swy += w * y;
        self.sww += w * w;
    }

    fn plus(&self, o: &Moments) -> Moments {
        Moments {
            n: self.n + o.n,
            n_treated: self.n_treated + o.n_treated,
            sw: self.sw + o.sw,
            sy: self.sy + o.sy,
            swy: self.swy + o.swy,
            sww: self.sww + o.sww,
        }
    }

    fn minus(&self, o: &Moments) -> Moments {
        Moments {
            n: self.n - o.n,
            n_treated: self.n_treated - o.n_treated,
            sw: self.sw - o.sw,
            sy: self.sy - o.sy,
            swy: self.swy - o.swy,
            sww: self.sww - o.sww,
        }
    }

    pub fn has_both_arms(&self) -> bool {
        self.n_treated > 0 && self.n_treated < self.n
    }

    /// Least-squares slope of y on w; `None` without both arms.
    pub fn tau(&self) -> Option<f64> {
        if !self.has_both_arms() {
            return None;
        }
        let n = self.n as f64;
        let var = self.sww - self.sw * self.sw / n;
        if var <= 1e-12 * n {
            return None;
        }
        Some((self.swy - self.sw * self.sy / n) / var)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CausalSplit {
    pub feature: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
    /// Criterion value attained on the structure half.
    pub criterion: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CausalNode {
    pub split: Option<CausalSplit>,
    /// Root has depth 1.
    pub depth: usize,
    pub tau: f64,
    /// Estimation-half statistics of the rows reaching this node.
    pub estimation: Moments,
    /// True when `tau` was inherited from the parent.
    pub inherited: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CausalTree {
    pub nodes: Vec<CausalNode>,
}

impl CausalTree {
    #[inline]
    pub fn leaf_of(&self, row: ArrayView1<f64>) -> usize {
        let mut at = 0;
        while let Some(s) = &self.nodes[at].split {
            at = if row[s.feature] <= s.threshold { s.left } else { s.right };
        }
        at
    }

    pub fn predict_row(&self, row: ArrayView1<f64>) -> f64 {
        self.nodes[self.leaf_of(row)].tau
    }

    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict_row(r)).collect()
    }

    pub fn leaves(&self) -> impl Iterator<Item = &CausalNode> {
        self.nodes.iter().filter(|n| n.split.is_none())
    }

    /// (feature, depth) of every split.
    pub fn splits(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.nodes.iter().filter_map(|n| n.split.as_ref().map(|s| (s.feature, n.depth)))
    }
}

/// Per-row inputs for growing causal trees on pre-binned features.
pub(crate) struct CausalData<'a> {
    pub binned: &'a BinnedMatrix,
    pub mapper: &'a BinMapper,
    /// Raw arm membership (treated = true).
    pub arm: &'a [bool],
    /// Treatment used in the slope (raw 0/1 or centred residual).
    pub w: &'a [f64],
    pub y: &'a [f64],
}

pub(crate) struct GrowParams {
    pub min_leaf: usize,
    pub mtry: usize,
    pub max_depth: Option<usize>,
}

impl CausalData<'_> {
    fn moments(&self, rows: &[u32]) -> Moments {
        let mut m = Moments::default();
        for &r in rows {
            let r = r as usize;
            m.add(self.arm[r], self.w[r], self.y[r]);
        }
        m
    }

    fn best_split<R: Rng>(
        &self,
        rows: &[u32],
        parent: &Moments,
        params: &GrowParams,
        rng: &mut R,
        hist: &mut [Moments],
    ) -> Option<(usize, usize, f64)> {
        let p = self.mapper.n_features();
        let mut feats = sample(rng, p, params.mtry.min(p)).into_vec();
        feats.sort_unstable();
        let n_p = parent.n as f64;
        let mut best: Option<(usize, usize, f64)> = None;
        for f in feats {
            let nb = self.mapper.n_bins(f);
            if nb < 2 {
                continue;
            }
            hist[..nb].fill(Moments::default());
            let col = &self.binned.cols[f];
            for &r in rows {
                let r = r as usize;
                hist[col[r] as usize].add(self.arm[r], self.w[r], self.y[r]);
            }
            let mut left = Moments::default();
            for b in 0..nb - 1 {
                left = left.plus(&hist[b]);
                if left.n < params.min_leaf {
                    continue;
                }
                let right = parent.minus(&left);
                if right.n < params.min_leaf {
                    break;
                }
                let (Some(tl), Some(tr)) = (left.tau(), right.tau()) else {
                    continue;
                };
                let crit = (left.n as f64 * right.n as f64) / (n_p * n_p) * (tl - tr).powi(2);
                if crit > 0.0 && best.map_or(true, |(_, _, c)| crit > c) {
                    best = Some((f, b, crit));
                }
            }
        }
        best
    }
}

/// Grow one honest tree from disjoint structure and estimation rows.
pub(crate) fn grow<R: Rng>(
    data: &CausalData,
    structure: Vec<u32>,
    estimation: &[u32],
    params: &GrowParams,
    rng: &mut R,
) -> Result<CausalTree> {
    let root_moments = data.moments(&structure);
    let Some(root_tau) = root_moments.tau() else {
        return Err(Error::Learner("structure half lacks a treatment arm at the root".into()));
    };
    let mut nodes = vec![CausalNode {
        split: None,
        depth: 1,
        tau: root_tau,
        estimation: Moments::default(),
        inherited: false,
    }];
    let mut hist = vec![Moments::default(); MAX_BINS];
    let mut stack = vec![(0usize, structure, root_moments)];
    while let Some((node, rows, moments)) = stack.pop() {
        let depth = nodes[node].depth;
        if rows.len() < 2 * params.min_leaf || params.max_depth.is_some_and(|d| depth >= d) {
            continue;
        }
        let Some((f, b, criterion)) = data.best_split(&rows, &moments, params, rng, &mut hist) else {
            continue;
        };
        let col = &data.binned.cols[f];
        let (rl, rr): (Vec<u32>, Vec<u32>) = rows.into_iter().partition(|&r| col[r as usize] as usize <= b);
        let ml = data.moments(&rl);
        let mr = moments.minus(&ml);
        let li = nodes.len();
        for m in [&ml, &mr] {
            nodes.push(CausalNode {
                split: None,
                depth: depth + 1,
                tau: m.tau().unwrap_or(f64::NAN),
                estimation: Moments::default(),
                inherited: false,
            });
        }
        nodes[node].split = Some(CausalSplit {
            feature: f,
            threshold: data.mapper.threshold(f, b),
            left: li,
            right: li + 1,
            criterion,
        });
        stack.push((li + 1, rr, mr));
        stack.push((li, rl, ml));
    }

    // route estimation rows and re-estimate every node top-down
    for &r in estimation {
        let r = r as usize;
        let mut at = 0;
        loop {
            nodes[at].estimation.add(data.arm[r], data.w[r], data.y[r]);
            match &nodes[at].split {
                Some(s) => at = if (data.binned.cols[s.feature][r] as usize) <= threshold_bin(data.mapper, s) { s.left } else { s.right },
                None => break,
            }
        }
    }
    let mut parent_tau = vec![root_tau; nodes.len()];
    for i in 0..nodes.len() {
        let node = &mut nodes[i];
        match node.estimation.tau() {
            Some(t) => {
                node.tau = t;
                node.inherited = false;
            }
            None => {
                node.tau = parent_tau[i];
                node.inherited = true;
            }
        }
        if let Some(s) = &node.split {
            let (l, r, t) = (s.left, s.right, node.tau);
            parent_tau[l] = t;
            parent_tau[r] = t;
        }
    }
    Ok(CausalTree { nodes })
}

fn threshold_bin(mapper: &BinMapper, split: &CausalSplit) -> usize {
    mapper.bin(split.feature, split.threshold) as usize
}

/// Fit a single honest causal tree on raw 0/1 `treatment`.
pub fn fit_honest_tree(
    features: ArrayView2<f64>,
    treatment: &[f64],
    outcome: &[f64],
    params: &HonestTreeParams,
    seed: u64,
) -> Result<CausalTree> {
    let (n, p) = features.dim();
    if treatment.len() != n || outcome.len() != n {
        return Err(Error::InvalidArgument("features, treatment and outcome differ in length".into()));
    }
    if treatment.iter().any(|&t| t != 0.0 && t != 1.0) {
        return Err(Error::InvalidArgument("treatment must be 0/1".into()));
    }
    if !(params.honest_fraction > 0.0 && params.honest_fraction < 1.0) || params.min_leaf == 0 {
        return Err(Error::InvalidSpec("honest_fraction must be in (0, 1) and min_leaf >= 1".into()));
    }
    let arm: Vec<bool> = treatment.iter().map(|&t| t == 1.0).collect();
    if arm.iter().all(|&a| a) || arm.iter().all(|&a| !a) {
        return Err(Error::InvalidArgument("both treatment arms must be present".into()));
    }
    if n < 4 {
        return Err(Error::InvalidArgument(format!("need at least 4 rows, got {n}")));
    }
    let mapper = BinMapper::fit(features, MAX_BINS);
    let binned = mapper.transform(features);
    let mut rng = substream(seed, "honest_tree", 0);
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(&mut rng);
    let n_est = ((params.honest_fraction * n as f64).round() as usize).clamp(1, n - 1);
    let (est, structure) = order.split_at(n_est);
    let data = CausalData {
        binned: &binned,
        mapper: &mapper,
        arm: &arm,
        w: treatment,
        y: outcome,
    };
    let gp = GrowParams {
        min_leaf: params.min_leaf,
        mtry: params.mtry.unwrap_or(p).clamp(1, p.max(1)),
        max_depth: params.max_depth,
    };
    grow(&data, structure.to_vec(), est, &gp, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use proptest::prelude::{any, prop_assert, prop_assume, proptest};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn criterion_brute_force(x: &[f64], w: &[f64], y: &[f64], min_leaf: usize) -> f64 {
        let mut xs = x.to_vec();
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let all = |keep: &dyn Fn(f64) -> bool| {
            let mut m = Moments::default();
            for i in 0..x.len() {
                if keep(x[i]) {
                    m.add(w[i] == 1.0, w[i], y[i]);
                }
            }
            m
        };
        let n = x.len() as f64;
        let mut best: f64 = 0.0;
        for t in xs.windows(2).map(|v| 0.5 * (v[0] + v[1])) {
            let l = all(&|v| v <= t);
            let r = all(&|v| v > t);
            if l.n < min_leaf || r.n < min_leaf {
                continue;
            }
            if let (Some(a), Some(b)) = (l.tau(), r.tau()) {
                best = best.max(l.n as f64 * r.n as f64 / (n * n) * (a - b).powi(2));
            }
        }
        best
    }

    fn grow_all(x: &[f64], w: &[f64], y: &[f64], min_leaf: usize) -> Result<CausalTree> {
        let n = x.len();
        let xm = Array2::from_shape_vec((n, 1), x.to_vec()).unwrap();
        let mapper = BinMapper::fit(xm.view(), MAX_BINS);
        let binned = mapper.transform(xm.view());
        let arm: Vec<bool> = w.iter().map(|&v| v == 1.0).collect();
        let data = CausalData {
            binned: &binned,
            mapper: &mapper,
            arm: &arm,
            w,
            y,
        };
        let rows: Vec<u32> = (0..n as u32).collect();
        let gp = GrowParams {
            min_leaf,
            mtry: 1,
            max_depth: Some(2),
        };
        grow(&data, rows.clone(), &rows, &gp, &mut ChaCha8Rng::seed_from_u64(0))
    }

    proptest! {
        #[test]
        fn root_split_attains_brute_force_maximum(
            cells in proptest::collection::vec((-5i32..5, any::<bool>(), -3.0f64..3.0), 8..50),
            min_leaf in 1usize..5,
        ) {
            let x: Vec<f64> = cells.iter().map(|c| c.0 as f64).collect();
            let w: Vec<f64> = cells.iter().map(|c| f64::from(u8::from(c.1))).collect();
            let y: Vec<f64> = cells.iter().map(|c| c.2).collect();
            prop_assume!(w.iter().any(|&v| v == 1.0) && w.iter().any(|&v| v == 0.0));
            let tree = grow_all(&x, &w, &y, min_leaf).unwrap();
            let brute = criterion_brute_force(&x, &w, &y, min_leaf);
            let got = tree.nodes[0].split.as_ref().map_or(0.0, |s| s.criterion);
            prop_assert!((got - brute).abs() <= 1e-9 * brute.max(1.0), "tree {got} brute {brute}");
        }
    }

    #[test]
    fn missing_arm_at_root_is_an_error() {
        assert!(grow_all(&[1.0, 2.0, 3.0, 4.0], &[1.0; 4], &[0.0, 1.0, 0.0, 1.0], 1).is_err());
        let x = Array2::zeros((6, 1));
        assert!(fit_honest_tree(x.view(), &[0.0; 6], &[1.0; 6], &HonestTreeParams::default(), 0).is_err());
    }

    #[test]
    fn tau_is_difference_in_means_for_binary_treatment() {
        let mut m = Moments::default();
        for (w, y) in [(1.0, 3.0), (1.0, 5.0), (0.0, 1.0), (0.0, 2.0), (0.0, 3.0)] {
            m.add(w == 1.0, w, y);
        }
        assert!((m.tau().unwrap() - (4.0 - 2.0)).abs() < 1e-12);
    }

    #[test]
    fn effect_modifier_recovered() {
        let n = 8000;
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let x = Array2::from_shape_fn((n, 3), |_| rng.sample::<f64, _>(StandardNormal));
        let w: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let y: Vec<f64> = (0..n)
            .map(|i| w[i] * f64::from(u8::from(x[[i, 0]] > 0.0)) + 0.1 * rng.sample::<f64, _>(StandardNormal))
            .collect();
        let params = HonestTreeParams {
            min_leaf: 50,
            ..Default::default()
        };
        let tree = fit_honest_tree(x.view(), &w, &y, &params, 3).unwrap();
        let root = tree.nodes[0].split.as_ref().unwrap();
        assert_eq!(root.feature, 0);
        assert!(root.threshold.abs() < 0.1, "{}", root.threshold);
        for leaf in tree.leaves() {
            assert!(leaf.tau.abs() < 0.15 || (leaf.tau - 1.0).abs() < 0.15, "{}", leaf.tau);
        }
    }

    #[test]
    fn null_effect_leaves_near_zero() {
        let n = 4000;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let x = Array2::from_shape_fn((n, 2), |_| rng.gen_range(0.0..1.0));
        let w: Vec<f64> = (0..n).map(|_| f64::from(u8::from(rng.gen_bool(0.5)))).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let params = HonestTreeParams {
            min_leaf: 200,
            ..Default::default()
        };
        let tree = fit_honest_tree(x.view(), &w, &y, &params, 0).unwrap();
        for leaf in tree.leaves() {
            let m = leaf.estimation;
            let (n1, n0) = (m.n_treated as f64, (m.n - m.n_treated) as f64);
            let se = (1.0 / n1 + 1.0 / n0).sqrt();
            assert!(leaf.tau.abs() < 3.0 * se, "tau {} se {se}", leaf.tau);
        }
    }

    #[test]
    fn empty_arm_leaf_inherits_parent() {
        // n = 10, half for estimation: small leaves routinely miss an arm
        let mut inherited = false;
        for seed in 0..50 {
            let x = Array2::from_shape_fn((10, 1), |(i, _)| i as f64);
            let w = [0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 1.0];
            let y: Vec<f64> = (0..10).map(|i| (i * i) as f64 * 0.1 + w[i]).collect();
            let params = HonestTreeParams {
                min_leaf: 1,
                ..Default::default()
            };
            let tree = fit_honest_tree(x.view(), &w, &y, &params, seed).unwrap();
            for (i, node) in tree.nodes.iter().enumerate() {
                if node.inherited {
                    inherited = true;
                    let parent = tree
                        .nodes
                        .iter()
                        .find(|p| p.split.as_ref().is_some_and(|s| s.left == i || s.right == i));
                    if let Some(parent) = parent {
                        assert_eq!(node.tau, parent.tau);
                    }
                }
            }
        }
        assert!(inherited);
    }
}

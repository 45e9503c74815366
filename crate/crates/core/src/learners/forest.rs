use ndarray::ArrayView2;
use rand::seq::index::sample;
use rand::Rng;
use rayon::prelude::*;

use super::binning::{BinMapper, BinnedMatrix, MAX_BINS};
use super::tree::{Node, Tree};
use crate::rng::substream;

#[derive(Clone, Debug)]
pub struct ForestConfig {
    pub num_trees: usize,
    pub min_leaf: usize,
    pub mtry: usize,
    pub honest_fraction: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct RegressionForest {
    trees: Vec<Tree>,
}

impl RegressionForest {
    pub fn predict(&self, x: ArrayView2<f64>) -> Vec<f64> {
        let k = self.trees.len() as f64;
        x.rows()
            .into_iter()
            .map(|row| self.trees.iter().map(|t| t.predict_row(row)).sum::<f64>() / k)
            .collect()
    }
}

fn mean(y: &[f64], rows: &[u32]) -> Option<f64> {
    if rows.is_empty() {
        None
    } else {
        Some(rows.iter().map(|&r| y[r as usize]).sum::<f64>() / rows.len() as f64)
    }
}

struct Grower<'a> {
    binned: &'a BinnedMatrix,
    mapper: &'a BinMapper,
    y: &'a [f64],
    cfg: &'a ForestConfig,
}

impl Grower<'_> {
    /// Best (feature, bin) by variance reduction among `mtry` random features.
    fn best_split<R: Rng>(&self, rows: &[u32], rng: &mut R) -> Option<(usize, usize)> {
        let p = self.mapper.n_features();
        let mut feats = sample(rng, p, self.cfg.mtry.min(p)).into_vec();
        feats.sort_unstable();
        let n = rows.len() as f64;
        let total: f64 = rows.iter().map(|&r| self.y[r as usize]).sum();
        let parent = total * total / n;
        let mut best: Option<(usize, usize, f64)> = None;
        let mut count = [0usize; MAX_BINS];
        let mut sum = [0.0f64; MAX_BINS];
        for f in feats {
            let nb = self.mapper.n_bins(f);
            if nb < 2 {
                continue;
            }
            count[..nb].fill(0);
            sum[..nb].fill(0.0);
            let col = &self.binned.cols[f];
            for &r in rows {
                let b = col[r as usize] as usize;
                count[b] += 1;
                sum[b] += self.y[r as usize];
            }
            let (mut nl, mut sl) = (0usize, 0.0);
            for b in 0..nb - 1 {
                nl += count[b];
                sl += sum[b];
                let nr = rows.len() - nl;
                if nl < self.cfg.min_leaf {
                    continue;
                }
                if nr < self.cfg.min_leaf {
                    break;
                }
                let sr = total - sl;
                let gain = sl * sl / nl as f64 + sr * sr / nr as f64 - parent;
                if gain > 1e-12 && best.map_or(true, |(_, _, g)| gain > g) {
                    best = Some((f, b, gain));
                }
            }
        }
        best.map(|(f, b, _)| (f, b))
    }

    fn grow<R: Rng>(&self, structure: Vec<u32>, estimation: Option<Vec<u32>>, rng: &mut R) -> Tree {
        let mut tree = Tree::default();
        tree.nodes.push(Node::Leaf { value: 0.0 });
        let root_value = mean(self.y, estimation.as_deref().unwrap_or(&structure))
            .or_else(|| mean(self.y, &structure))
            .unwrap_or(0.0);
        let mut stack = vec![(0usize, structure, estimation, root_value)];
        while let Some((node, rows, est, inherited)) = stack.pop() {
            let value = match &est {
                Some(e) => mean(self.y, e).unwrap_or(inherited),
                None => mean(self.y, &rows).unwrap_or(inherited),
            };
            let split = if rows.len() >= 2 * self.cfg.min_leaf {
                self.best_split(&rows, rng)
            } else {
                None
            };
            let Some((f, b)) = split else {
                tree.nodes[node] = Node::Leaf { value };
                continue;
            };
            let col = &self.binned.cols[f];
            let goes_left = |r: &u32| col[*r as usize] as usize <= b;
            let (rl, rr): (Vec<u32>, Vec<u32>) = rows.into_iter().partition(goes_left);
            let (el, er) = match est {
                Some(e) => {
                    let (l, r): (Vec<u32>, Vec<u32>) = e.into_iter().partition(goes_left);
                    (Some(l), Some(r))
                }
                None => (None, None),
            };
            let li = tree.nodes.len();
            tree.nodes.push(Node::Leaf { value: 0.0 });
            tree.nodes.push(Node::Leaf { value: 0.0 });
            tree.nodes[node] = Node::Split {
                feature: f,
                threshold: self.mapper.threshold(f, b),
                left: li,
                right: li + 1,
            };
            stack.push((li + 1, rr, er, value));
            stack.push((li, rl, el, value));
        }
        tree
    }
}

pub fn fit(x: ArrayView2<f64>, y: &[f64], cfg: &ForestConfig, seed: u64) -> RegressionForest {
    let n = y.len();
    let mapper = BinMapper::fit(x, MAX_BINS);
    let binned = mapper.transform(x);
    let grower = Grower {
        binned: &binned,
        mapper: &mapper,
        y,
        cfg,
    };
    let trees = (0..cfg.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = substream(seed, "regression_forest", t as u64);
            match cfg.honest_fraction {
                Some(h) => {
                    // half-sample without replacement, then an honest split of it
                    let m = (n / 2).max(2).min(n);
                    let drawn: Vec<u32> = sample(&mut rng, n, m).into_iter().map(|i| i as u32).collect();
                    let n_est = ((h * m as f64).round() as usize).clamp(1, m - 1);
                    let (est, structure) = drawn.split_at(n_est);
                    grower.grow(structure.to_vec(), Some(est.to_vec()), &mut rng)
                }
                None => {
                    let boot: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n) as u32).collect();
                    grower.grow(boot, None, &mut rng)
                }
            }
        })
        .collect();
    RegressionForest { trees }
}

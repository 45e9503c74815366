//! Quantile binning shared by the tree learners.
//!
//! A feature with cuts `c_0 < c_1 < ... < c_{k-1}` maps a value `v` to the
//! first bin `b` with `v <= c_b` (or `k` if none). Splitting "bin <= b" is then
//! the same as splitting "v <= c_b" on raw values.

use ndarray::ArrayView2;

pub const MAX_BINS: usize = 255;

#[derive(Clone, Debug)]
pub struct BinMapper {
    cuts: Vec<Vec<f64>>,
}

/// Column-major binned copy of a feature matrix.
#[derive(Clone, Debug)]
pub struct BinnedMatrix {
    pub n_rows: usize,
    pub cols: Vec<Vec<u8>>,
}

fn column_cuts(mut values: Vec<f64>, max_bins: usize) -> Vec<f64> {
    values.sort_by(f64::total_cmp);
    let mut distinct: Vec<(f64, usize)> = Vec::new();
    for v in values.iter().copied() {
        match distinct.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => distinct.push((v, 1)),
        }
    }
    if distinct.len() <= max_bins {
        return distinct.windows(2).map(|w| 0.5 * (w[0].0 + w[1].0)).collect();
    }
    let n = values.len() as f64;
    let per_bin = n / max_bins as f64;
    let mut cuts = Vec::with_capacity(max_bins - 1);
    let mut seen = 0usize;
    for w in distinct.windows(2) {
        seen += w[0].1;
        if seen as f64 >= per_bin * (cuts.len() + 1) as f64 {
            cuts.push(0.5 * (w[0].0 + w[1].0));
            if cuts.len() == max_bins - 1 {
                break;
            }
        }
    }
    cuts
}

impl BinMapper {
    pub fn fit(x: ArrayView2<f64>, max_bins: usize) -> Self {
        assert!((2..=MAX_BINS).contains(&max_bins));
        let cuts = x.columns().into_iter().map(|c| column_cuts(c.to_vec(), max_bins)).collect();
        BinMapper { cuts }
    }

    pub fn n_features(&self) -> usize {
        self.cuts.len()
    }

    pub fn n_bins(&self, feature: usize) -> usize {
        self.cuts[feature].len() + 1
    }

    #[inline]
    pub fn bin(&self, feature: usize, value: f64) -> u8 {
        self.cuts[feature].partition_point(|&c| c < value) as u8
    }

    /// Raw-value threshold equivalent to "bin <= b".
    pub fn threshold(&self, feature: usize, bin: usize) -> f64 {
        self.cuts[feature][bin]
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> BinnedMatrix {
        let cols = x
            .columns()
            .into_iter()
            .enumerate()
            .map(|(f, c)| c.iter().map(|&v| self.bin(f, v)).collect())
            .collect();
        BinnedMatrix { n_rows: x.nrows(), cols }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn few_distinct_values_get_midpoint_cuts() {
        let x = Array2::from_shape_vec((5, 1), vec![3.0, 1.0, 2.0, 1.0, 3.0]).unwrap();
        let m = BinMapper::fit(x.view(), 255);
        assert_eq!(m.n_bins(0), 3);
        assert_eq!(m.threshold(0, 0), 1.5);
        assert_eq!(m.bin(0, 1.0), 0);
        assert_eq!(m.bin(0, 1.5), 0);
        assert_eq!(m.bin(0, 2.0), 1);
        assert_eq!(m.bin(0, 99.0), 2);
    }

    #[test]
    fn many_values_capped() {
        let x = Array2::from_shape_fn((10_000, 1), |(i, _)| i as f64);
        let m = BinMapper::fit(x.view(), 255);
        assert!(m.n_bins(0) <= 255);
        let b = m.transform(x.view());
        // bins are monotone in the raw value
        assert!(b.cols[0].windows(2).all(|w| w[0] <= w[1]));
        // and roughly balanced
        let top = b.cols[0].iter().filter(|&&v| v == 0).count();
        assert!((30..=50).contains(&top), "{top}");
    }

    #[test]
    fn bin_threshold_agreement() {
        let x = Array2::from_shape_fn((1000, 1), |(i, _)| ((i * 7919) % 1000) as f64 / 10.0);
        let m = BinMapper::fit(x.view(), 32);
        for b in 0..m.n_bins(0) - 1 {
            let t = m.threshold(0, b);
            for &v in x.column(0) {
                assert_eq!(m.bin(0, v) as usize <= b, v <= t);
            }
        }
    }
}

//! Percentile bootstrap helpers.

use rand::Rng;

use crate::rng::substream;

/// Quantile `q` of ascending `sorted` by linear interpolation between order
/// statistics.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    assert!(!sorted.is_empty());
    let h = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than 2 values.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
}

/// Two-sided percentile interval at `level` (e.g. 0.95). `None` for fewer
/// than two replicates.
pub fn percentile_interval(replicates: &[f64], level: f64) -> Option<(f64, f64)> {
    if replicates.len() < 2 {
        return None;
    }
    let mut sorted = replicates.to_vec();
    sorted.sort_by(f64::total_cmp);
    let alpha = (1.0 - level) / 2.0;
    Some((quantile(&sorted, alpha), quantile(&sorted, 1.0 - alpha)))
}

/// Row indices of bootstrap replicate `b`: `n` draws with replacement.
pub fn resample(n: usize, seed: u64, b: usize) -> Vec<usize> {
    let mut rng = substream(seed, "bootstrap", b as u64);
    (0..n).map(|_| rng.gen_range(0..n)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantile_interpolates() {
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 0.5), 3.0);
        assert_eq!(quantile(&v, 0.125), 1.5);
        assert_eq!(quantile(&v, 1.0), 5.0);
    }

    #[test]
    fn interval_needs_two_replicates() {
        assert!(percentile_interval(&[1.0], 0.95).is_none());
        let (lo, hi) = percentile_interval(&[3.0, 1.0, 2.0], 0.5).unwrap();
        assert_eq!((lo, hi), (1.5, 2.5));
    }

    #[test]
    fn sd_matches_hand_computation() {
        assert!((std_dev(&[2.0, 4.0, 4.0, 4.0, 5.0, 5.0, 7.0, 9.0]) - 2.138_089_935_299_395).abs() < 1e-12);
        assert_eq!(std_dev(&[1.0]), 0.0);
    }

    #[test]
    fn resample_is_seeded() {
        assert_eq!(resample(50, 1, 3), resample(50, 1, 3));
        assert_ne!(resample(50, 1, 3), resample(50, 1, 4));
        assert!(resample(50, 1, 3).iter().all(|&i| i < 50));
    }
}

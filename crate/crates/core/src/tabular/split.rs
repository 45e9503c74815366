use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::RoledDataset;
use crate::error::{Error, Result};
use crate::rng::substream;

#[derive(Clone, Debug)]
pub struct StratifiedSplit {
    pub train: RoledDataset,
    pub test: RoledDataset,
    /// Positions (into the input dataset) of the test rows, ascending.
    pub test_positions: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Train/test split that samples `round(test_fraction * n_stratum)` rows of
/// every stratum into the test set (at least one, and never the whole
/// stratum). Strata with fewer than two rows go wholly to train and are
/// reported in `warnings`.
pub fn split_stratified(
    data: &RoledDataset,
    test_fraction: f64,
    strata: &[usize],
    seed: u64,
) -> Result<StratifiedSplit> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!("test_fraction must be in (0, 1), got {test_fraction}")));
    }
    if strata.len() != data.n() {
        return Err(Error::InvalidArgument(format!(
            "{} strata labels for {} rows",
            strata.len(),
            data.n()
        )));
    }
    let mut by_stratum: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (i, &s) in strata.iter().enumerate() {
        by_stratum.entry(s).or_default().push(i);
    }

    let mut test = Vec::new();
    let mut warnings = Vec::new();
    for (&label, rows) in &by_stratum {
        if rows.len() < 2 {
            warnings.push(format!("stratum {label} has {} row(s); assigned to train", rows.len()));
            continue;
        }
        let n_test = ((test_fraction * rows.len() as f64).round() as usize).clamp(1, rows.len() - 1);
        let mut shuffled = rows.clone();
        shuffled.shuffle(&mut substream(seed, "split", label as u64));
        test.extend_from_slice(&shuffled[..n_test]);
    }
    test.sort_unstable();
    let mut is_test = vec![false; data.n()];
    for &i in &test {
        is_test[i] = true;
    }
    let train: Vec<usize> = (0..data.n()).filter(|&i| !is_test[i]).collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(StratifiedSplit {
        train: data.subset(&train),
        test: data.subset(&test),
        test_positions: test,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{bind_roles, Column, ColumnData, ColumnSpec, Dataset, LevelSet, RoleSchema};
    use proptest::prelude::*;

    fn data(n: usize) -> RoledDataset {
        let ds = Dataset::new(vec![
            Column {
                spec: ColumnSpec::categorical("s", &["a", "b"]),
                data: ColumnData::Categorical((0..n).map(|i| (i % 2) as u32).collect()),
            },
            Column {
                spec: ColumnSpec::continuous("y"),
                data: ColumnData::Continuous((0..n).map(|i| i as f64).collect()),
            },
        ])
        .unwrap();
        bind_roles(
            ds,
            &RoleSchema {
                sensitive: "s".into(),
                s1_levels: LevelSet::Listed(vec!["a".into()]),
                outcome: "y".into(),
                positive_level: None,
                confounders: vec![],
                mediators: vec![],
                columns: vec![],
            },
        )
        .unwrap()
    }

    #[test]
    fn one_test_row_per_stratum_of_five() {
        let d = data(10);
        let strata: Vec<usize> = (0..10).map(|i| i / 5).collect();
        let s = split_stratified(&d, 0.2, &strata, 1).unwrap();
        assert_eq!(s.test.n(), 2);
        let test_strata: Vec<usize> = s.test_positions.iter().map(|&i| strata[i]).collect();
        assert_eq!(test_strata, vec![0, 1]);
    }

    #[test]
    fn same_seed_same_partition() {
        let d = data(50);
        let strata: Vec<usize> = (0..50).map(|i| i % 4).collect();
        let a = split_stratified(&d, 0.2, &strata, 9).unwrap();
        let b = split_stratified(&d, 0.2, &strata, 9).unwrap();
        assert_eq!(a.test.row_ids(), b.test.row_ids());
        let c = split_stratified(&d, 0.2, &strata, 10).unwrap();
        assert_ne!(a.test.row_ids(), c.test.row_ids());
    }

    #[test]
    fn singleton_stratum_goes_to_train_with_warning() {
        let d = data(7);
        let strata = vec![0, 0, 0, 1, 1, 1, 2];
        let s = split_stratified(&d, 0.3, &strata, 0).unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.train.row_ids().contains(&6));
    }

    #[test]
    fn bad_fraction_rejected() {
        let d = data(4);
        assert!(split_stratified(&d, 0.0, &[0; 4], 0).is_err());
        assert!(split_stratified(&d, 1.0, &[0; 4], 0).is_err());
    }

    proptest! {
        #[test]
        fn partition_is_exhaustive_and_near_target(
            labels in proptest::collection::vec(0usize..5, 4..120),
            frac in 0.05f64..0.95,
            seed in 0u64..1000,
        ) {
            let n = labels.len();
            let d = data(n);
            let s = split_stratified(&d, frac, &labels, seed).unwrap();
            let mut ids: Vec<usize> = s.train.row_ids().iter().chain(s.test.row_ids()).copied().collect();
            ids.sort_unstable();
            prop_assert_eq!(ids, (0..n).collect::<Vec<_>>());
            let n_strata = labels.iter().collect::<std::collections::BTreeSet<_>>().len() as f64;
            prop_assert!((s.test.n() as f64 - frac * n as f64).abs() <= n_strata);
        }
    }
}

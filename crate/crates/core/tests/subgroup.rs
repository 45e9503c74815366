use disparity_core::hetero_forest::IndividualEffects;
use disparity_core::subgroup::{assign, export_histogram, summarize, BinningSpec, VariableSummary};
use disparity_core::tabular::{bind_roles, presets, Column, ColumnData, ColumnSpec, Dataset, LevelSet, RoleSchema};
use disparity_core::RoledDataset;
use proptest::prelude::*;

fn effects(tau: Vec<f64>) -> IndividualEffects {
    IndividualEffects {
        row_ids: (0..tau.len()).collect(),
        tau,
        out_of_bag: false,
    }
}

fn adult_spec() -> BinningSpec {
    BinningSpec::new(presets::adult().thresholds).unwrap()
}

/// Rows: (s2?, y, education, hours).
fn toy(rows: &[(bool, u32, u32, f64)]) -> RoledDataset {
    let cat = |name: &str, levels: &[&str], codes: Vec<u32>| Column {
        spec: ColumnSpec::categorical(name, levels),
        data: ColumnData::Categorical(codes),
    };
    let ds = Dataset::new(vec![
        cat("race", &["Black", "White"], rows.iter().map(|r| u32::from(r.0)).collect()),
        cat("income", &["<=50K", ">50K"], rows.iter().map(|r| r.1).collect()),
        cat("education", &["College", "HS", "Masters"], rows.iter().map(|r| r.2).collect()),
        Column {
            spec: ColumnSpec::continuous("hours"),
            data: ColumnData::Continuous(rows.iter().map(|r| r.3).collect()),
        },
    ])
    .unwrap();
    let schema = RoleSchema {
        sensitive: "race".into(),
        s1_levels: LevelSet::Listed(vec!["Black".into()]),
        outcome: "income".into(),
        positive_level: Some(">50K".into()),
        confounders: vec!["education".into()],
        mediators: vec!["hours".into()],
        columns: vec![],
    };
    bind_roles(ds, &schema).unwrap()
}

#[test]
fn adult_thresholds_place_examples() {
    let a = assign(&effects(vec![-0.02, 0.0, 0.03, 0.08]), &adult_spec()).unwrap();
    assert_eq!(a.group, vec![0, 1, 2, 3]);
    assert_eq!(a.spec.labels[3], "Sub-group 4");
}

#[test]
fn boundary_values_join_the_upper_group() {
    assert_eq!(assign(&effects(vec![-0.01]), &adult_spec()).unwrap().group, vec![1]);
    let hdma = BinningSpec::new(presets::hdma_white().thresholds).unwrap();
    assert_eq!(assign(&effects(vec![0.025]), &hdma).unwrap().group, vec![2]);
}

#[test]
fn invalid_inputs_are_rejected() {
    assert!(assign(&effects(vec![f64::NAN]), &adult_spec()).is_err());
    assert!(BinningSpec::new(vec![0.1, 0.0]).is_err());
    assert!(BinningSpec::new(vec![0.0, 0.0]).is_err());
    let bad = BinningSpec {
        thresholds: vec![0.0],
        labels: vec!["only one".into()],
    };
    assert!(bad.validate().is_err());
    let defaulted = BinningSpec {
        thresholds: vec![0.0],
        labels: vec![],
    }
    .normalized()
    .unwrap();
    assert_eq!(defaulted.labels, vec!["Sub-group 1", "Sub-group 2"]);
}

#[test]
fn summary_counts_tv_and_levels() {
    // group 1 (tau < 0): rows 0..4; group 2: rows 4..7
    let data = toy(&[
        (false, 0, 0, 40.0),
        (false, 1, 0, 50.0),
        (true, 1, 1, 30.0),
        (true, 1, 1, 50.0),
        (true, 0, 2, 20.0),
        (true, 1, 2, 40.0),
        (true, 1, 0, 60.0),
    ]);
    let a = assign(&effects(vec![-1.0, -1.0, -1.0, -1.0, 1.0, 1.0, 1.0]), &BinningSpec::new(vec![0.0]).unwrap()).unwrap();
    let s = summarize(&data, &a).unwrap();
    assert_eq!(s.groups[0].n, 4);
    // mean(y|s2) - mean(y|s1) = 1 - 0.5
    assert_eq!(s.groups[0].tv, Some(0.5));
    assert_eq!(s.groups[1].tv, None);
    assert_eq!(s.groups[1].categories[0].n, 0);
    assert!(s.groups[1].categories[0].variables.is_empty());

    let s2_vars = &s.groups[1].categories[1].variables;
    match &s2_vars[0] {
        VariableSummary::Categorical { majority, minority, .. } => {
            assert_eq!((majority.level.as_str(), majority.percent), ("Masters", 66.666667));
            assert_eq!((minority.level.as_str(), minority.percent), ("College", 33.333333));
        }
        other => panic!("{other:?}"),
    }
    match &s2_vars[1] {
        VariableSummary::Continuous { mean, sd, .. } => {
            assert_eq!(*mean, 40.0);
            assert_eq!(*sd, 20.0);
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn singleton_cell_has_equal_majority_and_minority() {
    let data = toy(&[(false, 0, 1, 10.0), (true, 1, 0, 20.0)]);
    let a = assign(&effects(vec![0.0, 0.0]), &BinningSpec::new(vec![1.0]).unwrap()).unwrap();
    let s = summarize(&data, &a).unwrap();
    match &s.groups[0].categories[0].variables[0] {
        VariableSummary::Categorical { majority, minority, .. } => {
            assert_eq!(majority, minority);
            assert_eq!(majority.percent, 100.0);
            assert_eq!(majority.level, "HS");
        }
        other => panic!("{other:?}"),
    }
}

#[test]
fn summary_requires_every_row_assigned() {
    let data = toy(&[(false, 0, 1, 10.0), (true, 1, 0, 20.0)]);
    let a = assign(&effects(vec![0.0]), &adult_spec()).unwrap();
    assert!(summarize(&data, &a).is_err());
}

#[test]
fn reports_are_written() {
    let data = toy(&[(false, 0, 1, 10.0), (true, 1, 0, 20.0), (true, 0, 0, 30.0)]);
    let a = assign(&effects(vec![-0.5, 0.02, 0.2]), &adult_spec()).unwrap();
    let s = summarize(&data, &a).unwrap();
    let dir = tempfile::tempdir().unwrap();
    s.write_json(dir.path().join("s.json")).unwrap();
    s.write_csv(dir.path().join("s.csv")).unwrap();
    let csv = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
    assert!(csv.starts_with("group,category,variable,statistic,value\n"));
    assert!(csv.contains("Sub-group 3,s2,education,majority_level,College"));
}

#[test]
fn equal_effects_fill_one_bin() {
    let h = export_histogram(&effects(vec![0.013; 9]), 0.005).unwrap();
    let nonzero: Vec<_> = h.bins.iter().filter(|b| b.count > 0).collect();
    assert_eq!(nonzero.len(), 1);
    assert_eq!(nonzero[0].count, 9);
    assert_eq!((nonzero[0].bin_left, nonzero[0].bin_right), (0.01, 0.015));
    assert!(export_histogram(&effects(vec![0.0]), 0.0).is_err());
}

proptest! {
    #[test]
    fn groups_partition_and_order_effects(
        tau in proptest::collection::vec(-0.2f64..0.2, 1..300),
    ) {
        let a = assign(&effects(tau.clone()), &adult_spec()).unwrap();
        prop_assert_eq!(a.sizes().iter().sum::<usize>(), tau.len());
        let means: Vec<f64> = a.mean_tau().into_iter().flatten().collect();
        prop_assert!(means.windows(2).all(|w| w[0] < w[1]));
        for (&t, &g) in tau.iter().zip(&a.group) {
            let lo = if g == 0 { f64::NEG_INFINITY } else { a.spec.thresholds[g - 1] };
            let hi = a.spec.thresholds.get(g).copied().unwrap_or(f64::INFINITY);
            prop_assert!(lo <= t && t < hi);
        }
    }

    #[test]
    fn small_threshold_shifts_keep_assignment(
        tau in proptest::collection::vec(-0.2f64..0.2, 2..200),
        frac in -0.49f64..0.49,
    ) {
        let spec = adult_spec();
        let base = assign(&effects(tau.clone()), &spec).unwrap();
        // largest shift that cannot cross any effect value
        let gap = spec
            .thresholds
            .iter()
            .flat_map(|t| tau.iter().map(move |v| (v - t).abs()))
            .fold(f64::INFINITY, f64::min);
        prop_assume!(gap > 1e-9);
        let moved = BinningSpec::new(spec.thresholds.iter().map(|t| t + frac * gap).collect()).unwrap();
        prop_assert_eq!(assign(&effects(tau), &moved).unwrap().group, base.group);
    }

    #[test]
    fn histogram_conserves_counts(
        tau in proptest::collection::vec(-0.3f64..0.3, 1..300),
        width in 0.001f64..0.1,
    ) {
        let h = export_histogram(&effects(tau.clone()), width).unwrap();
        prop_assert_eq!(h.bins.iter().map(|b| b.count).sum::<usize>(), tau.len());
        let lo = tau.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = tau.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(h.bins[0].bin_left <= lo + 1e-6);
        prop_assert!(h.bins.last().unwrap().bin_right >= hi - 1e-6);
    }
}

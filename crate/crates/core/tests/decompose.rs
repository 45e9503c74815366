use disparity_core::decompose::{
    decomposition_report, estimate_decomposition, format_estimate, total_variation, DecompositionConfig,
};
use disparity_core::learners::{LearnerSpec, Objective};
use disparity_core::rng::substream;
use disparity_core::scm_sim::{sample, true_effects, DiscreteScm, LinearScm, OutcomeMode, ScmSpec};
use disparity_core::tabular::bind_roles;
use disparity_core::RoledDataset;

fn fixture(name: &str) -> ScmSpec {
    ScmSpec::from_json_file(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn simulate(spec: &ScmSpec, n: usize, seed: u64) -> RoledDataset {
    bind_roles(sample(spec, n, seed).unwrap(), &spec.role_schema()).unwrap()
}

fn point_config() -> DecompositionConfig {
    DecompositionConfig {
        bootstrap: 0,
        ..Default::default()
    }
}

fn linear_config(bootstrap: usize, seed: u64) -> DecompositionConfig {
    let lin = LearnerSpec::linear(1e-6, Objective::SquaredError);
    DecompositionConfig {
        mu: lin.clone(),
        nu: lin,
        folds: 5,
        bootstrap,
        seed,
    }
}

fn linear_scm(b: f64) -> LinearScm {
    LinearScm {
        p_s2: 0.5,
        x_dim: 2,
        a: 0.5,
        b,
        d: 0.4,
        g: vec![0.3, -0.2],
        t: vec![0.2, 0.1],
        sigma_m: 1.0,
        sigma_y: 1.0,
        confounding: None,
        outcome: OutcomeMode::Continuous,
        effect_modifier: None,
    }
}

#[test]
fn linear_fixture_matches_struct() {
    let mut l = linear_scm(0.3);
    l.sigma_m = 0.5;
    l.sigma_y = 0.5;
    assert_eq!(fixture("linear-A.json"), ScmSpec::Linear(l));
}

#[test]
fn constant_outcome_has_zero_tv() {
    let mut d = DiscreteScm::random(&mut substream(1, "spec", 0), 2, 2);
    for s in 0..2 {
        for row in d.p_y_given_smx[s].iter_mut() {
            row.fill(1.0);
        }
    }
    let data = simulate(&ScmSpec::Discrete(d), 500, 1);
    assert_eq!(total_variation(&data).unwrap().point, 0.0);
}

#[test]
fn sampled_tv_within_three_sigma_of_enumeration() {
    let spec = fixture("cpt-A.json");
    let truth = true_effects(&spec).unwrap().tv;
    let data = simulate(&spec, 100_000, 4);
    let tv = total_variation(&data).unwrap().point;
    let (n1, n2) = data.group_sizes();
    let sd = (0.25 / n1 as f64 + 0.25 / n2 as f64).sqrt();
    assert!((tv - truth).abs() < 3.0 * sd, "{tv} vs {truth}");
}

#[test]
fn cpt_a_effects_within_one_point_of_enumeration() {
    let spec = fixture("cpt-A.json");
    let g = true_effects(&spec).unwrap();
    let r = estimate_decomposition(&simulate(&spec, 50_000, 7), &point_config()).unwrap();
    for (est, truth) in [(r.ctf_de.point, g.ctf_de), (r.ctf_ie.point, g.ctf_ie), (r.ctf_se.point, g.ctf_se)] {
        assert!((est - truth).abs() < 0.01, "{est} vs {truth}");
    }
}

#[test]
fn linear_scm_natural_effects_match_closed_form() {
    let spec = fixture("linear-A.json");
    let r = estimate_decomposition(&simulate(&spec, 20_000, 3), &linear_config(0, 42)).unwrap();
    assert!((r.nde.point - 0.3).abs() < 0.02, "{}", r.nde.point);
    assert!((r.nie.point - 0.2).abs() < 0.02, "{}", r.nie.point);
    assert!(r.ctf_se.point.abs() < 0.02, "{}", r.ctf_se.point);
}

#[test]
fn additivity_is_exact() {
    for seed in 0..5 {
        let spec = ScmSpec::Discrete(DiscreteScm::random(&mut substream(seed, "spec", 0), 3, 2));
        let cfg = DecompositionConfig {
            bootstrap: 5,
            ..linear_config(0, seed)
        };
        let r = estimate_decomposition(&simulate(&spec, 2_000, seed), &cfg).unwrap();
        assert!((r.tv.point - (r.ctf_de.point - r.ctf_ie.point - r.ctf_se.point)).abs() < 1e-12);
    }
}

#[test]
fn swapping_groups_negates_tv() {
    let data = simulate(&fixture("cpt-A.json"), 5_000, 2);
    let a = total_variation(&data).unwrap().point;
    let b = total_variation(&data.swap_sensitive()).unwrap().point;
    assert_eq!(a, -b);
}

#[test]
fn bootstrap_is_seeded() {
    let data = simulate(&fixture("cpt-A.json"), 3_000, 5);
    let cfg = linear_config(20, 11);
    let a = estimate_decomposition(&data, &cfg).unwrap();
    let b = estimate_decomposition(&data, &cfg).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.ctf_de.n_bootstrap, 20);
    assert!(a.ctf_de.contains(a.ctf_de.point));
}

#[test]
fn report_formats() {
    assert_eq!(format_estimate(0.016, Some(0.0001)), "0.016 (0.0001)");
    assert_eq!(format_estimate(0.1042, Some(0.0123)), "0.104 (0.012)");
    let data = simulate(&fixture("cpt-A.json"), 2_000, 6);
    let r = estimate_decomposition(&data, &linear_config(0, 1)).unwrap();
    let report = decomposition_report(&r);
    assert_eq!(report.rows.len(), 6);
    assert!(report.rows.iter().all(|row| row.interval == "n/a"));
    assert!((report.contributions.indirect.point + r.ctf_ie.point).abs() < 1e-6);
}

#[test]
fn empty_group_is_an_error() {
    let data = simulate(&fixture("cpt-A.json"), 1_000, 8);
    let s1_rows: Vec<usize> = (0..data.n()).filter(|&i| !data.is_s2()[i]).collect();
    assert!(estimate_decomposition(&data.subset(&s1_rows), &point_config()).is_err());
}

/// No direct path and no confounding: over 200 simulated datasets the
/// bootstrap intervals of ctf_de and ctf_se should cover 0 about 95% of
/// the time.
#[test]
fn null_effect_intervals_cover_zero() {
    let spec = ScmSpec::Linear(linear_scm(0.0));
    let runs = 200;
    let (mut de, mut se) = (0, 0);
    for r in 0..runs {
        let data = simulate(&spec, 1_000, 1_000 + r);
        let res = estimate_decomposition(&data, &linear_config(100, r)).unwrap();
        de += usize::from(res.ctf_de.contains(0.0));
        se += usize::from(res.ctf_se.contains(0.0));
    }
    let (de, se) = (de as f64 / runs as f64, se as f64 / runs as f64);
    assert!(de >= 0.92, "ctf_de coverage {de}");
    assert!(se >= 0.92, "ctf_se coverage {se}");
}

use disparity_core::rng::substream;
use disparity_core::scm_sim::{
    sample, true_effects, DiscreteScm, EffectModifier, LinearScm, OutcomeMode, ScmSpec,
};
use disparity_core::tabular::bind_roles;
use proptest::prelude::*;

fn fixture(name: &str) -> ScmSpec {
    ScmSpec::from_json_file(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

fn random_discrete(seed: u64, nx: usize, nm: usize) -> DiscreteScm {
    DiscreteScm::random(&mut substream(seed, "test_spec", 0), nx, nm)
}

fn group_means(spec: &ScmSpec, n: usize, seed: u64) -> (f64, f64, usize, usize) {
    let data = bind_roles(sample(spec, n, seed).unwrap(), &spec.role_schema()).unwrap();
    let (mut s1, mut s2, mut n1, mut n2) = (0.0, 0.0, 0, 0);
    for (&y, &is2) in data.y().iter().zip(data.is_s2()) {
        if is2 {
            s2 += y;
            n2 += 1;
        } else {
            s1 += y;
            n1 += 1;
        }
    }
    (s1 / n1 as f64, s2 / n2 as f64, n1, n2)
}

#[test]
fn cpt_a_matches_rational_enumeration() {
    // frozen from tests/oracles/enumerate_discrete.py
    let g = true_effects(&fixture("cpt-A.json")).unwrap();
    let expect = [
        (g.tv, 6391.0 / 20700.0),
        (g.ctf_de, 41.0 / 300.0),
        (g.ctf_ie, -3.0 / 50.0),
        (g.ctf_se, -116.0 / 1035.0),
        (g.nde, 71.0 / 500.0),
        (g.nie, 1.0 / 25.0),
    ];
    for (got, want) in expect {
        assert!((got - want).abs() < 1e-14, "{got} vs {want}");
    }
}

#[test]
fn uniform_outcome_has_mean_one_half() {
    let mut d = random_discrete(3, 3, 2);
    for s in 0..2 {
        for row in d.p_y_given_smx[s].iter_mut() {
            row.fill(0.5);
        }
    }
    let spec = ScmSpec::Discrete(d);
    let data = sample(&spec, 1000, 7).unwrap();
    let y = bind_roles(data, &spec.role_schema()).unwrap();
    let mean = y.y().iter().sum::<f64>() / 1000.0;
    assert!((mean - 0.5).abs() < 0.05, "{mean}");
}

#[test]
fn sampling_is_seeded() {
    let spec = fixture("cpt-A.json");
    let a = sample(&spec, 5000, 11).unwrap();
    let b = sample(&spec, 5000, 11).unwrap();
    let c = sample(&spec, 5000, 12).unwrap();
    let codes = |d: &disparity_core::Dataset| d.column("y").unwrap().codes().unwrap().to_vec();
    assert_eq!(codes(&a), codes(&b));
    assert_ne!(codes(&a), codes(&c));
}

#[test]
fn empirical_tv_converges() {
    let spec = fixture("cpt-A.json");
    let truth = true_effects(&spec).unwrap().tv;
    for (n, seed) in [(1_000, 1), (10_000, 2), (100_000, 3)] {
        let (m1, m2, n1, n2) = group_means(&spec, n, seed);
        let sd = (m1 * (1.0 - m1) / n1 as f64 + m2 * (1.0 - m2) / n2 as f64).sqrt();
        assert!((m2 - m1 - truth).abs() < 3.0 * sd, "n={n}: {} vs {truth}", m2 - m1);
    }
}

fn linear(confounding: Option<Vec<f64>>, outcome: OutcomeMode) -> LinearScm {
    LinearScm {
        p_s2: 0.5,
        x_dim: 2,
        a: 0.5,
        b: 0.3,
        d: 0.4,
        g: vec![0.3, -0.2],
        t: vec![0.2, 0.1],
        sigma_m: 1.0,
        sigma_y: 1.0,
        confounding,
        outcome,
        effect_modifier: None,
    }
}

#[test]
fn linear_continuous_tv_is_direct_plus_mediated() {
    let spec = ScmSpec::Linear(linear(None, OutcomeMode::Continuous));
    let g = true_effects(&spec).unwrap();
    assert!((g.tv - 0.5).abs() < 1e-12);
    assert!((g.nde - 0.3).abs() < 1e-12);
    assert!((g.nie - 0.2).abs() < 1e-12);
    assert!(g.ctf_se.abs() < 1e-12);
    let (m1, m2, n1, n2) = group_means(&spec, 20_000, 5);
    // var(y*) = d^2 (g.g + 1) + t.t + 1
    let var = 0.16 * (0.13 + 1.0) + 0.05 + 1.0;
    let sd = (var / n1 as f64 + var / n2 as f64).sqrt();
    assert!((m2 - m1 - 0.5).abs() < 3.0 * sd, "{}", m2 - m1);
}

#[test]
fn linear_binary_truth_matches_large_sample() {
    let spec = ScmSpec::Linear(linear(Some(vec![0.9, -0.4]), OutcomeMode::Binary { threshold: 0.2 }));
    let g = true_effects(&spec).unwrap();
    assert!((g.tv - (g.ctf_de - g.ctf_ie - g.ctf_se)).abs() < 1e-12);
    let (m1, m2, n1, n2) = group_means(&spec, 200_000, 9);
    let sd = (m1 * (1.0 - m1) / n1 as f64 + m2 * (1.0 - m2) / n2 as f64).sqrt();
    assert!((m2 - m1 - g.tv).abs() < 3.0 * sd, "{} vs {}", m2 - m1, g.tv);
}

#[test]
fn effect_modifier_shifts_direct_effect() {
    let mut l = linear(None, OutcomeMode::Continuous);
    l.b = 0.0;
    l.effect_modifier = Some(EffectModifier {
        index: 0,
        threshold: 0.0,
        delta: 0.4,
    });
    let g = true_effects(&ScmSpec::Linear(l.clone())).unwrap();
    assert!((g.nde - 0.2).abs() < 1e-12);
    l.outcome = OutcomeMode::Binary { threshold: 0.0 };
    assert!(l.validate().is_err());
}

#[test]
fn schema_binds_sampled_data() {
    for spec in [fixture("cpt-A.json"), ScmSpec::Linear(linear(None, OutcomeMode::Continuous))] {
        let data = sample(&spec, 50, 0).unwrap();
        let bound = bind_roles(data, &spec.role_schema()).unwrap();
        assert_eq!(bound.n(), 50);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn decomposition_identity_holds(seed in any::<u64>(), nx in 1usize..8, nm in 1usize..5) {
        let g = random_discrete(seed, nx, nm).true_effects().unwrap();
        prop_assert!((g.tv - (g.ctf_de - g.ctf_ie - g.ctf_se)).abs() < 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn constant_propensity_removes_spurious_effect(seed in any::<u64>(), nx in 1usize..8, nm in 1usize..5, p in 0.1f64..0.9) {
        let mut d = random_discrete(seed, nx, nm);
        d.p_s2_given_x = vec![p; nx];
        prop_assert!(d.true_effects().unwrap().ctf_se.abs() < 1e-12);
    }

    #[test]
    fn no_direct_path_means_no_direct_effect(seed in any::<u64>(), nx in 1usize..8, nm in 1usize..5) {
        let mut d = random_discrete(seed, nx, nm);
        d.p_y_given_smx[1] = d.p_y_given_smx[0].clone();
        let g = d.true_effects().unwrap();
        prop_assert!(g.ctf_de.abs() < 1e-12);
        prop_assert!(g.nde.abs() < 1e-12);
    }

    #[test]
    fn no_mediation_means_no_indirect_effect(seed in any::<u64>(), nx in 1usize..8, nm in 1usize..5) {
        let mut d = random_discrete(seed, nx, nm);
        d.p_m_given_sx[1] = d.p_m_given_sx[0].clone();
        let g = d.true_effects().unwrap();
        prop_assert!(g.ctf_ie.abs() < 1e-12);
        prop_assert!(g.nie.abs() < 1e-12);
    }
}

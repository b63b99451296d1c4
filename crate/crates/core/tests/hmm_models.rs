use proptest::prelude::*;

use rhodep::families::Emission;
use rhodep::hmm::{
    build_hmm_model, delta_for, param_error, product_chain_density, simplex_grid, stationary_distribution,
    transition_grid, vbar_exponential_family, vbar_for_nets, window, HmmModelDescription, HmmParams,
    SimplexWeights, TransitionMatrix,
};
use rhodep::measure::{QuadratureRule, SampleSpace};

fn simplex(m: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.02f64..1.0, m).prop_map(|v| {
        let total: f64 = v.iter().sum();
        v.iter().map(|x| x / total).collect()
    })
}

fn params(w: Vec<f64>, q: Vec<Vec<f64>>, emissions: Vec<Emission>) -> HmmParams {
    HmmParams::new(SimplexWeights::new(w).unwrap(), TransitionMatrix::new(q).unwrap(), emissions).unwrap()
}

fn categorical(p: &[f64]) -> Emission {
    Emission::Categorical { probs: p.to_vec() }
}

fn mass(c: &rhodep::measure::DensityCandidate) -> f64 {
    let rule = QuadratureRule::for_candidates(c.space(), &[c]).unwrap();
    rule.mass(&rule.log_values(c).unwrap())
}

/// Random `K`-state parameters with categorical emissions on `m` symbols.
fn random_params(k: usize, m: usize) -> impl Strategy<Value = HmmParams> {
    (simplex(k), prop::collection::vec(simplex(k), k), prop::collection::vec(simplex(m), k))
        .prop_map(|(w, q, f)| params(w, q, f.iter().map(|p| categorical(p)).collect()))
}

#[test]
fn windows_overlap_and_respect_bounds() {
    let base = SampleSpace::continuous_uniform(0.0, 10.0, 10).unwrap();
    let w = window(&base, &[1.0, 2.0, 3.0, 4.0], 2).unwrap();
    assert_eq!(w.sample.coordinates(), &[1.0, 2.0, 2.0, 3.0, 3.0, 4.0]);
    let series: Vec<f64> = (0..10).map(f64::from).collect();
    assert_eq!(window(&base, &series, 3).unwrap().sample.len(), 8);
    assert!(window(&base, &series, 5).is_ok());
    assert!(window(&base, &series, 6).is_err());
    assert!(window(&base, &series, 1).is_err());
}

#[test]
fn degenerate_chains_factorize() {
    let base = SampleSpace::symbols(3).unwrap();
    let f1 = [0.2, 0.5, 0.3];
    let p = params(vec![1.0, 0.0], vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![categorical(&f1), categorical(&[0.6, 0.2, 0.2])]);
    let c = product_chain_density("p", &p, 2, &base).unwrap();
    for (a, b) in [(0usize, 1usize), (2, 2), (1, 0)] {
        let got = c.log_density(&[a as f64, b as f64]).exp();
        assert!((got - f1[a] * f1[b]).abs() < 1e-15);
    }
    let same = params(vec![0.3, 0.7], vec![vec![0.6, 0.4], vec![0.1, 0.9]], vec![categorical(&f1), categorical(&f1)]);
    let c = product_chain_density("same", &same, 3, &base).unwrap();
    let got = c.log_density(&[0.0, 1.0, 2.0]).exp();
    assert!((got - f1[0] * f1[1] * f1[2]).abs() < 1e-15);
}

proptest! {
    #[test]
    fn forward_recursion_matches_four_term_sum(p in random_params(2, 3), a in 0usize..3, b in 0usize..3) {
        let c = product_chain_density("p", &p, 2, &SampleSpace::symbols(3).unwrap()).unwrap();
        let f = |k: usize, x: usize| match &p.emissions[k] {
            Emission::Categorical { probs } => probs[x],
            _ => unreachable!(),
        };
        let w = p.w.as_slice();
        let mut want = 0.0;
        for (k1, &w1) in w.iter().enumerate() {
            for k2 in 0..2 {
                want += w1 * p.q.get(k1, k2) * f(k1, a) * f(k2, b);
            }
        }
        let got = c.log_density(&[a as f64, b as f64]).exp();
        prop_assert!((got - want).abs() <= 1e-14 * want.max(1e-300));
    }

    #[test]
    fn chain_densities_are_normalized(p in random_params(3, 2), l in 1usize..4) {
        let c = product_chain_density("p", &p, l, &SampleSpace::symbols(2).unwrap()).unwrap();
        prop_assert!((mass(&c) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relabeling_both_sides_keeps_param_error(est in random_params(3, 2), truth in random_params(3, 2), sigma in 0usize..6) {
        let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
        let perm = perms[sigma];
        let relabel = |p: &HmmParams| {
            let w: Vec<f64> = (0..3).map(|i| p.w.as_slice()[perm[i]]).collect();
            let q: Vec<Vec<f64>> = (0..3).map(|i| (0..3).map(|j| p.q.get(perm[i], perm[j])).collect()).collect();
            let e: Vec<Emission> = (0..3).map(|i| p.emissions[perm[i]].clone()).collect();
            params(w, q, e)
        };
        let base = param_error(&est, &truth).unwrap();
        prop_assert!(base >= 0.0);
        prop_assert!((param_error(&relabel(&est), &relabel(&truth)).unwrap() - base).abs() < 1e-12);
        prop_assert!(param_error(&relabel(&truth), &truth).unwrap() < 1e-12);
    }
}

#[test]
fn weight_error_example() {
    let q = vec![vec![0.7, 0.3], vec![0.4, 0.6]];
    let e = vec![Emission::Exponential { rate: 1.0 }, Emission::Exponential { rate: 3.0 }];
    let truth = params(vec![0.5, 0.5], q.clone(), e.clone());
    let est = params(vec![0.6, 0.4], q, e);
    assert!((param_error(&est, &truth).unwrap() - 0.02).abs() < 1e-15);
    assert_eq!(param_error(&truth, &truth).unwrap(), 0.0);
}

#[test]
fn stationary_examples() {
    let pi = stationary_distribution(&TransitionMatrix::new(vec![vec![0.9, 0.1], vec![0.2, 0.8]]).unwrap()).unwrap();
    assert!((pi.as_slice()[0] - 2.0 / 3.0).abs() < 1e-12);
    let u = stationary_distribution(&TransitionMatrix::new(vec![vec![1.0 / 3.0; 3]; 3]).unwrap()).unwrap();
    assert!(u.as_slice().iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-12));
    assert!(stationary_distribution(&TransitionMatrix::identity(2).unwrap()).is_err());
    assert!(stationary_distribution(&TransitionMatrix::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()).is_err());
}

#[test]
fn grids_and_counts() {
    let w = simplex_grid(2, 0.1, 0.1).unwrap();
    assert_eq!(w.len(), 9);
    assert_eq!(simplex_grid(2, 0.5, 0.1).unwrap().len(), 1);
    let q = transition_grid(2, 0.1, 0.1).unwrap();
    assert_eq!(q.len(), 81);
    let base = SampleSpace::symbols(2).unwrap();
    let net = vec![categorical(&[0.2, 0.8]), categorical(&[0.5, 0.5]), categorical(&[0.7, 0.3])];
    let d = HmmModelDescription::explicit(2, 2, 0.1, 0.1, base.clone(), w, q, vec![net.clone(), net.clone()]).unwrap();
    assert_eq!(d.candidate_count, 9 * 81 * 9);
    assert!(build_hmm_model(&d, 1000).is_err());

    let single = HmmModelDescription::explicit(
        2,
        2,
        0.5,
        0.5,
        base,
        simplex_grid(2, 0.5, 0.5).unwrap(),
        transition_grid(2, 0.5, 0.5).unwrap(),
        vec![net[..1].to_vec(), net[1..2].to_vec()],
    )
    .unwrap();
    let m = build_hmm_model(&single, 10).unwrap();
    assert_eq!(m.model.len(), 1);
    assert!((mass(m.model.candidate(0)) - 1.0).abs() < 1e-12);
}

#[test]
fn complexity_formulas() {
    assert!((delta_for(784.0, 10_000, 2).unwrap() - 0.0784).abs() < 1e-15);
    assert_eq!(delta_for(1e12, 10, 3).unwrap(), 1.0 / 3.0);
    assert_eq!(delta_for(50.0, 50, 2).unwrap(), 0.5);
    assert_eq!(vbar_for_nets(&[1], 2).unwrap(), 1.0);
    assert!((vbar_for_nets(&[8, 8], 2).unwrap() - 28.0).abs() < 1e-12);
    // 3·K^L + L·K^(L−1)·Σd with K = 2, L = 2, d = (1, 2).
    assert_eq!(vbar_exponential_family(&[1, 2], 2).unwrap(), 3.0 * 4.0 + 2.0 * 2.0 * 3.0);
}

use drmdp::ambiguity::{sup_one, wasserstein_discrete, AmbiguitySpec, DiscreteModelDistribution, GroundNorm};
use drmdp::Error;
use drmdp::guarantees::{certify_policy_iteration, RadiusSchedule};
use drmdp::mdp::{bellman_apply, evaluate_policy_iterative, policy_value, ValueTable};
use drmdp::oracles::{grid_inner_min, SimplexGrid};
use drmdp::random::{random_empirical, random_mdp, random_model, random_policy, random_row, random_values};
use drmdp::regularization::{sandwich_check, simulation_lemma_check, SandwichOptions};
use drmdp::robust_dp::{
    budgeted_transport_min, budgeted_transport_min_lp, dr_bellman_apply, inner_min_linear, OracleSupport,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn norm_strategy() -> impl Strategy<Value = GroundNorm> {
    prop_oneof![
        Just(GroundNorm::L1Product),
        Just(GroundNorm::L2Product),
        Just(GroundNorm::SupOne)
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dr_backup_contracts_and_is_monotone(seed in any::<u64>(), norm in norm_strategy(), alpha in 0.0f64..0.6) {
        let mut r = rng(seed);
        let (ns, na) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let mdp = random_mdp(ns, na, 0.9, &mut r).unwrap();
        let emp = random_empirical::<f64, _>(ns, na, r.gen_range(1..=4), &mut r).unwrap();
        let spec = AmbiguitySpec::uniform(ns, alpha, norm).unwrap();
        let pi = random_policy(ns, na, &mut r);
        let v = random_values::<f64, _>(ns, -5.0, 5.0, &mut r);
        let w = random_values::<f64, _>(ns, -5.0, 5.0, &mut r);
        let tv = dr_bellman_apply(&mdp, &pi, &emp, &spec, &v, &[]).unwrap();
        let tw = dr_bellman_apply(&mdp, &pi, &emp, &spec, &w, &[]).unwrap();
        prop_assert!(tv.sup_dist(&tw) <= 0.9 * v.sup_dist(&w) + 1e-12);

        let upper = ValueTable(v.iter().zip(w.iter()).map(|(a, b)| a.max(*b)).collect());
        let tu = dr_bellman_apply(&mdp, &pi, &emp, &spec, &upper, &[]).unwrap();
        for s in 0..ns {
            prop_assert!(tu[s] >= tv[s] - 1e-12);
        }

        let shifted = ValueTable(v.iter().map(|x| x + 3.0).collect());
        let ts = dr_bellman_apply(&mdp, &pi, &emp, &spec, &shifted, &[]).unwrap();
        for s in 0..ns {
            prop_assert!((ts[s] - tv[s] - 0.9 * 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn dr_backup_decreases_with_radius(seed in any::<u64>(), norm in norm_strategy()) {
        let mut r = rng(seed);
        let (ns, na) = (r.gen_range(1..=3), r.gen_range(1..=2));
        let mdp = random_mdp(ns, na, 0.5, &mut r).unwrap();
        let emp = random_empirical::<f64, _>(ns, na, 3, &mut r).unwrap();
        let pi = random_policy(ns, na, &mut r);
        let v = random_values::<f64, _>(ns, -2.0, 2.0, &mut r);
        let mut prev: Option<ValueTable<f64>> = None;
        for alpha in [0.0, 0.05, 0.2, 1.0] {
            let spec = AmbiguitySpec::uniform(ns, alpha, norm).unwrap();
            let t = dr_bellman_apply(&mdp, &pi, &emp, &spec, &v, &[]).unwrap();
            if let Some(p) = &prev {
                for s in 0..ns {
                    prop_assert!(t[s] <= p[s] + 1e-12);
                }
            }
            prev = Some(t);
        }
    }

    #[test]
    fn ground_norms_are_norms(seed in any::<u64>(), norm in norm_strategy()) {
        let mut r = rng(seed);
        let (ns, na) = (r.gen_range(1..=4), r.gen_range(1..=3));
        let x: Vec<f64> = (0..ns * na * ns).map(|_| r.gen_range(-1.0..1.0)).collect();
        let y: Vec<f64> = (0..ns * na * ns).map(|_| r.gen_range(-1.0..1.0)).collect();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = x.iter().map(|a| -2.5 * a).collect();
        let n = |t: &[f64]| norm.evaluate(t, ns, na);
        prop_assert!(n(&sum) <= n(&x) + n(&y) + 1e-12);
        prop_assert!((n(&scaled) - 2.5 * n(&x)).abs() < 1e-12);
        prop_assert!(n(&x) >= 0.0);
        prop_assert!(sup_one(&x, ns, na) <= norm.beta::<f64>(ns, na) * n(&x) + 1e-12);
    }

    #[test]
    fn wasserstein_is_a_metric(seed in any::<u64>(), norm in norm_strategy()) {
        let mut r = rng(seed);
        let (ns, na) = (2, 2);
        let dist = |k: usize, r: &mut ChaCha8Rng| {
            let atoms = (0..k).map(|_| random_model::<f64, _>(ns, na, r)).collect();
            DiscreteModelDistribution::new(atoms, random_row(k, r)).unwrap()
        };
        let a = dist(2, &mut r);
        let b = dist(3, &mut r);
        let c = dist(2, &mut r);
        let w = |x: &DiscreteModelDistribution<f64>, y: &DiscreteModelDistribution<f64>| wasserstein_discrete(x, y, norm).unwrap();
        prop_assert!(w(&a, &a).abs() < 1e-12);
        prop_assert!((w(&a, &b) - w(&b, &a)).abs() < 1e-10);
        prop_assert!(w(&a, &c) <= w(&a, &b) + w(&b, &c) + 1e-10);
    }

    #[test]
    fn grid_search_bounds_the_inner_minimum(seed in any::<u64>(), lambda in 0.0f64..3.0, norm in norm_strategy()) {
        let mut r = rng(seed);
        let v: Vec<f64> = (0..3).map(|_| r.gen_range(-2.0..2.0)).collect();
        let p = random_row::<f64, _>(3, &mut r);
        let exact = inner_min_linear(&v, &p, lambda, norm).unwrap().1;
        let grid = grid_inner_min(&v, &p, lambda, norm, &SimplexGrid::new(3, 0.01).unwrap()).unwrap();
        prop_assert!(grid >= exact - 1e-9);
        prop_assert!(grid - exact <= (2.0 + lambda) * 0.03);
    }

    #[test]
    fn transport_envelope_matches_simplex(seed in any::<u64>(), alpha in 0.0f64..1.5) {
        let mut r = rng(seed);
        let (n, m) = (r.gen_range(1..=4), r.gen_range(1..=6));
        let values: Vec<f64> = (0..m).map(|_| r.gen_range(-3.0..3.0)).collect();
        let dist: Vec<f64> = (0..n * m).map(|_| r.gen_range(0.0..2.0)).collect();
        match (budgeted_transport_min(&values, &dist, alpha), budgeted_transport_min_lp(&values, &dist, alpha)) {
            (Ok(a), Ok(b)) => prop_assert!((a - b).abs() < 1e-9, "{} vs {}", a, b),
            (Err(Error::Infeasible(_)), Err(Error::Infeasible(_))) => {}
            other => prop_assert!(false, "{:?}", other),
        }
    }

    #[test]
    fn simulation_lemma_holds(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ns, na) = (r.gen_range(1..=4), r.gen_range(1..=3));
        let mdp = random_mdp(ns, na, 0.9, &mut r).unwrap();
        let pi = random_policy(ns, na, &mut r);
        let p = random_model(ns, na, &mut r);
        let q = random_model(ns, na, &mut r);
        prop_assert!(simulation_lemma_check(&mdp, &pi, &p, &q).unwrap().pass);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn sandwich_chain_holds(seed in any::<u64>(), norm in norm_strategy()) {
        let mut r = rng(seed);
        let (ns, na, n) = (2, r.gen_range(1..=2), r.gen_range(1..=3));
        let mdp = random_mdp(ns, na, 0.5, &mut r).unwrap();
        let emp = random_empirical(ns, na, n, &mut r).unwrap();
        let pi = random_policy(ns, na, &mut r);
        for alpha in [0.0, 0.05, 0.3] {
            let spec = AmbiguitySpec::uniform(ns, alpha, norm).unwrap();
            let rep = sandwich_check(&mdp, &pi, &emp, &spec, 0, OracleSupport::PolicyRowGrid { steps: 20 }, &SandwichOptions::default()).unwrap();
            prop_assert!(rep.pass, "{:?}", rep);
        }
    }

    #[test]
    fn policy_iteration_matches_enumeration(seed in any::<u64>()) {
        let mut r = rng(seed);
        let (ns, na) = (r.gen_range(1..=3), r.gen_range(1..=3));
        let mdp = random_mdp(ns, na, 0.8, &mut r).unwrap();
        let emp = random_empirical(ns, na, 2, &mut r).unwrap();
        let spec = AmbiguitySpec::uniform(ns, 0.1, GroundNorm::L1Product).unwrap();
        prop_assert!(certify_policy_iteration(&mdp, &emp, &spec, 1e-9).unwrap().pass);
    }

    #[test]
    fn radius_schedule_is_monotone(n in 0u64..1_000_000, eps in 0.01f64..0.99) {
        let s = RadiusSchedule::with_defaults(eps, 4).unwrap();
        prop_assert!(s.radius(n + 1) <= s.radius(n));
        prop_assert!(s.radius(n) <= s.c0());
    }
}

#[test]
fn iterative_evaluation_in_single_precision() {
    let mut r = rng(5);
    let mdp = random_mdp::<f32, _>(3, 2, 0.9, &mut r).unwrap();
    let p = random_model::<f32, _>(3, 2, &mut r);
    let pi = random_policy(3, 2, &mut r);
    let exact = policy_value(&mdp, &p, &pi).unwrap();
    let iter = evaluate_policy_iterative(&mdp, &p, &pi, 1e-3).unwrap();
    assert!(exact.sup_dist(&iter) <= 1e-3);
    let back = bellman_apply(&mdp, &p, &pi, &exact).unwrap();
    assert!(back.sup_dist(&exact) < 1e-4);
}

use proptest::prelude::*;

use subexp_lasso::distributions::{sample_inputs, DistributionKind, DistributionSpec};
use subexp_lasso::geometry::{min_norm_point, HypothesisSet};
use subexp_lasso::models::{generate_dataset, Noise, ObservationModel};
use subexp_lasso::solver::{empirical_risk, excess_decomposition, sign_invariant_error, solve_lasso, SolverConfig};

fn vec_strategy(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-5.0f64..5.0, p)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sets(p: usize) -> Vec<HypothesisSet> {
    vec![
        HypothesisSet::l1_ball(1.3, p),
        HypothesisSet::l2_ball(0.7, vec![0.2; p]),
        HypothesisSet::hypercube(0.5, p),
        HypothesisSet::polytope((0..p).map(|i| (0..p).map(|j| if i == j { 1.0 } else { -0.3 }).collect()).collect()),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn projection_is_feasible_idempotent_and_optimal(v in vec_strategy(4), w in vec_strategy(4)) {
        for set in sets(4) {
            let pv = set.project(&v).unwrap();
            prop_assert!(set.contains(&pv, 1e-8).unwrap());
            let again = set.project(&pv).unwrap();
            prop_assert!(pv.iter().zip(&again).all(|(a, b)| (a - b).abs() < 1e-8));
            // variational inequality against another point of the set
            let q = set.project(&w).unwrap();
            let lhs: f64 = v.iter().zip(&pv).zip(&q).map(|((vi, pi), qi)| (vi - pi) * (qi - pi)).sum();
            prop_assert!(lhs <= 1e-7, "{set:?}: {lhs}");
        }
    }

    #[test]
    fn support_function_dominates_projections(z in vec_strategy(3), v in vec_strategy(3)) {
        for set in sets(3) {
            let h = set.support_function(&z).unwrap();
            let pv = set.project(&v).unwrap();
            prop_assert!(dot(&z, &pv) <= h + 1e-8);
        }
    }

    #[test]
    fn min_norm_point_is_in_hull(points in prop::collection::vec(vec_strategy(3), 1..7)) {
        let mnp = min_norm_point(&points);
        let sum: f64 = mnp.weights.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9);
        prop_assert!(mnp.weights.iter().all(|w| *w >= -1e-12));
        let n2 = dot(&mnp.point, &mnp.point);
        // optimality: every point lies on the far side of the supporting plane
        for p in &points {
            prop_assert!(dot(p, &mnp.point) >= n2 - 1e-7);
        }
    }

    #[test]
    fn excess_identity(seed in 0u64..1000, b in vec_strategy(3), bn in vec_strategy(3)) {
        let spec = DistributionSpec::isotropic(DistributionKind::Laplace, 3);
        let model = ObservationModel::linear(vec![0.5, 0.0, -1.0], Noise::Gaussian { std: 0.3 });
        let data = generate_dataset(&model, &spec, 15, seed).unwrap();
        let (q, m) = excess_decomposition(&data, &b, &bn).unwrap();
        let e = empirical_risk(&data, &b).unwrap() - empirical_risk(&data, &bn).unwrap();
        prop_assert!((q + m - e).abs() <= 1e-9 * (1.0 + e.abs()));
        prop_assert!(q >= 0.0);
    }

    #[test]
    fn sign_invariance(a in vec_strategy(5), b in vec_strategy(5)) {
        let neg: Vec<f64> = b.iter().map(|x| -x).collect();
        prop_assert_eq!(sign_invariant_error(&a, &b).unwrap(), sign_invariant_error(&a, &neg).unwrap());
    }

    #[test]
    fn sampling_is_seed_deterministic(seed in any::<u64>()) {
        let spec = DistributionSpec::isotropic(DistributionKind::Rademacher, 4);
        prop_assert_eq!(sample_inputs(&spec, 8, seed).unwrap(), sample_inputs(&spec, 8, seed).unwrap());
    }
}

#[test]
fn solver_estimate_lies_in_set_and_beats_start() {
    let spec = DistributionSpec::isotropic(DistributionKind::Laplace, 8);
    let model = ObservationModel::linear(vec![1.0, -1.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0], Noise::Gaussian { std: 0.5 });
    for seed in 0..20 {
        let data = generate_dataset(&model, &spec, 25, seed).unwrap();
        for set in sets(8) {
            let res = solve_lasso(&data, &set, &SolverConfig::default()).unwrap();
            assert!(set.contains(&res.estimate, 1e-8).unwrap());
            let start = set.project(&[0.0; 8]).unwrap();
            assert!(res.objective <= empirical_risk(&data, &start).unwrap() + 1e-12);
        }
    }
}

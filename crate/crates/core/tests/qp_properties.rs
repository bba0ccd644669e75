mod common;

use common::{objective, random_qp};
use fxts_overtake::qp::{enumerate_oracle, kkt_residuals, solve_qp, QpProblem, QpStatus};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn tol(prob: &QpProblem) -> f64 {
    1e-8 * prob.q.norm().max(1.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn agrees_with_enumeration(seed in any::<u64>(), n in 1usize..=6, m in 0usize..=10) {
        let prob = random_qp(&mut common::rng(seed), n, m);
        let sol = solve_qp(&prob).unwrap();
        let oracle = enumerate_oracle(&prob).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        prop_assert_eq!(oracle.status, QpStatus::Optimal);
        prop_assert!((objective(&prob, &sol.z) - objective(&prob, &oracle.z)).abs() <= 1e-8 * objective(&prob, &oracle.z).abs().max(1.0));
        prop_assert!((&sol.z - &oracle.z).amax() <= 1e-6);
    }

    #[test]
    fn kkt_residuals_small(seed in any::<u64>()) {
        let prob = random_qp(&mut common::rng(seed), 5, 7);
        let sol = solve_qp(&prob).unwrap();
        let r = kkt_residuals(&prob, &sol);
        let t = tol(&prob);
        let station = (&prob.p * &sol.z + &prob.q + prob.a.transpose() * &sol.lambda).norm();
        prop_assert!(station <= t && r.primal <= t && r.dual <= t && r.complementarity <= t, "{:?}", r);
    }

    #[test]
    fn argmin_invariant_to_cost_scaling(seed in any::<u64>(), s in 0.01f64..100.0) {
        let prob = random_qp(&mut common::rng(seed), 5, 7);
        let scaled = QpProblem::new(&prob.p * s, &prob.q * s, prob.a.clone(), prob.b.clone()).unwrap();
        let z1 = solve_qp(&prob).unwrap().z;
        let z2 = solve_qp(&scaled).unwrap().z;
        prop_assert!((z1 - z2).amax() <= 1e-8);
    }

    #[test]
    fn duplicated_row_changes_nothing(seed in any::<u64>(), row in 0usize..7) {
        let prob = random_qp(&mut common::rng(seed), 5, 7);
        let a = DMatrix::from_fn(8, 5, |i, j| prob.a[(if i == 7 { row } else { i }, j)]);
        let b = DVector::from_fn(8, |i, _| prob.b[if i == 7 { row } else { i }]);
        let dup = QpProblem::new(prob.p.clone(), prob.q.clone(), a, b).unwrap();
        let z1 = solve_qp(&prob).unwrap().z;
        let sol = solve_qp(&dup).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        prop_assert!((z1 - sol.z).amax() <= 1e-8);
    }

    #[test]
    fn deterministic(seed in any::<u64>()) {
        let prob = random_qp(&mut common::rng(seed), 5, 7);
        prop_assert_eq!(solve_qp(&prob).unwrap(), solve_qp(&prob).unwrap());
    }
}

#[test]
fn oracle_agrees_on_closed_form_cases() {
    let half_line = QpProblem::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::zeros(1),
        DMatrix::from_element(1, 1, 1.0),
        DVector::from_element(1, -1.0),
    )
    .unwrap();
    let unconstrained = QpProblem::unconstrained(
        DMatrix::identity(2, 2),
        DVector::from_vec(vec![-1.0, -2.0]),
    )
    .unwrap();
    let empty = QpProblem::new(
        DMatrix::from_element(1, 1, 1.0),
        DVector::zeros(1),
        DMatrix::from_vec(2, 1, vec![1.0, -1.0]),
        DVector::from_vec(vec![-1.0, -2.0]),
    )
    .unwrap();
    for prob in [half_line, unconstrained, empty] {
        let a = solve_qp(&prob).unwrap();
        let b = enumerate_oracle(&prob).unwrap();
        assert_eq!(a.status, b.status);
        if a.status == QpStatus::Optimal {
            assert!((a.z - b.z).amax() < 1e-12);
        }
    }
}

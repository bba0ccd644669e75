mod common;

use common::road_state;
use fxts_overtake::constraints::{
    assemble_qp, cbf_lane, cbf_lead, clf_eval, ClfGains, GoalState, QpInputs, QpWeights,
    RoadGeometry, RobustOptions, ROW_CLF,
};
use fxts_overtake::qp::{solve_qp, QpStatus};
use fxts_overtake::vehicle::{drift, InputLimits, Vec4, VehicleState};
use proptest::prelude::*;
use rand::Rng;

const H: f64 = 1e-6;

fn central_difference(f: impl Fn(&VehicleState) -> f64, q: &VehicleState) -> Vec4 {
    std::array::from_fn(|i| {
        let mut hi = q.to_array();
        let mut lo = q.to_array();
        hi[i] += H;
        lo[i] -= H;
        (f(&VehicleState::from_array(hi)) - f(&VehicleState::from_array(lo))) / (2.0 * H)
    })
}

fn rel_err(analytic: &Vec4, numeric: &Vec4) -> f64 {
    let diff = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    diff / scale.max(1e-12)
}

#[test]
fn gradients_match_central_differences() {
    let mut rng = common::rng(11);
    let gains = ClfGains::default();
    let road = RoadGeometry::default();
    let mut worst = [0.0f64; 3];
    for _ in 0..1000 {
        let q = road_state(&mut rng);
        let goal = GoalState {
            xg: rng.random_range(-100.0..100.0),
            yg: rng.random_range(1.5..4.5),
            thetag: rng.random_range(-0.2..0.2),
            vg: rng.random_range(15.0..25.0),
        };
        let lead = VehicleState::new(
            q.x + rng.random_range(-60.0..60.0),
            rng.random_range(1.5..4.5),
            0.0,
            17.0,
        );
        let v = clf_eval(&q, &goal, &gains).grad;
        let v_fd = central_difference(|s| clf_eval(s, &goal, &gains).value, &q);
        let lane = cbf_lane(&q, &road).grad;
        let lane_fd = central_difference(|s| cbf_lane(s, &road).value, &q);
        let lead_g = cbf_lead(&q, &lead, &road).unwrap().grad_ego;
        let lead_fd = central_difference(|s| cbf_lead(s, &lead, &road).unwrap().value, &q);
        worst[0] = worst[0].max(rel_err(&v, &v_fd));
        worst[1] = worst[1].max(rel_err(&lane, &lane_fd));
        worst[2] = worst[2].max(rel_err(&lead_g, &lead_fd));
    }
    assert!(worst.iter().all(|&e| e <= 1e-6), "{worst:?}");
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(500))]

    #[test]
    fn lane_barrier_sign_matches_band(
        y in -1.0f64..7.0,
        theta in -0.6f64..0.6,
        v in 0.0f64..30.0,
    ) {
        let road = RoadGeometry::default();
        let q = VehicleState::new(0.0, y, theta, v);
        let shrink = v * (1.0 - theta.cos()) / road.omega_max;
        let e1 = 0.5 * road.car_width + shrink;
        let e2 = 2.0 * road.lane_width - 0.5 * road.car_width - shrink;
        // the product form only separates a non-empty band
        prop_assume!(e1 < e2);
        let h = cbf_lane(&q, &road).value;
        prop_assume!((y - e1).abs() > 1e-9 && (y - e2).abs() > 1e-9);
        prop_assert_eq!(h >= 0.0, e1 <= y && y <= e2);
    }

    #[test]
    fn lead_barrier_sign_matches_ellipse(
        dx in -80.0f64..80.0,
        dy in -6.0f64..6.0,
        v in 0.0f64..30.0,
        theta in -0.5f64..0.5,
    ) {
        let road = RoadGeometry::default();
        let ego = VehicleState::new(0.0, 1.5, theta, v);
        let lead = VehicleState::new(dx, 1.5 + dy, 0.0, 17.0);
        let sdx = v * road.tau * theta.cos() + road.car_length;
        let sdy = road.lane_width - 0.5 * road.car_width;
        let inside = (dx / sdx).powi(2) + (dy / sdy).powi(2) < 1.0;
        let h = cbf_lead(&ego, &lead, &road).unwrap().value;
        prop_assume!(h.abs() > 1e-9);
        prop_assert_eq!(h >= 0.0, !inside);
    }

    /// The CLF row, evaluated at the optimum, bounds the finite-difference
    /// rate of V along the closed loop.
    #[test]
    fn clf_row_holds_at_optimum(seed in any::<u64>()) {
        let mut rng = common::rng(seed);
        let ego = VehicleState::new(
            rng.random_range(-40.0..-20.0),
            rng.random_range(1.3..4.0),
            rng.random_range(-0.1..0.1),
            rng.random_range(12.0..22.0),
        );
        let lead = VehicleState::new(ego.x + 61.2, 1.5, 0.0, 17.0);
        let goal = GoalState { xg: ego.x + 60.0, yg: 4.5, thetag: 0.05, vg: 25.0 };
        let (gains, road) = (ClfGains::default(), RoadGeometry::default());
        let weights = QpWeights::default();
        let limits = InputLimits::default();
        let robust = RobustOptions { enabled: true, phi_inf: rng.random_range(0.0..1.0), quasi_static: false };
        let lead_rate = drift(&lead);
        let goal_rate = [0.0; 4];
        let prob = assemble_qp(&QpInputs {
            ego: &ego, lead_est: &lead, lead_rate_est: &lead_rate, goal: &goal,
            goal_rate: &goal_rate, gains: &gains, road: &road, weights: &weights,
            limits: &limits, robust: &robust,
        }).unwrap();
        let sol = solve_qp(&prob).unwrap();
        prop_assert_eq!(sol.status, QpStatus::Optimal);
        let z = &sol.z;
        let f = drift(&ego);
        let xdot = [f[0], f[1], z[0], z[1]];
        let dt = 1e-7;
        let ahead = VehicleState::from_array(std::array::from_fn(|i| ego.to_array()[i] + dt * xdot[i]));
        let behind = VehicleState::from_array(std::array::from_fn(|i| ego.to_array()[i] - dt * xdot[i]));
        let vdot = (clf_eval(&ahead, &goal, &gains).value - clf_eval(&behind, &goal, &gains).value) / (2.0 * dt);
        let clf = clf_eval(&ego, &goal, &gains);
        let vp = clf.value.max(0.0);
        let alpha = weights.alpha();
        let gnorm = clf.grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        let rhs = z[2] - alpha * (vp.powf(weights.gamma1()) + vp.powf(weights.gamma2())) - gnorm * robust.phi_inf;
        prop_assert!(vdot <= rhs + 1e-7 * (1.0 + rhs.abs()), "{vdot} > {rhs}");
        let row: f64 = (0..5).map(|j| prob.a[(ROW_CLF, j)] * z[j]).sum();
        prop_assert!(row <= prob.b[ROW_CLF] + 1e-8 * prob.q.norm().max(1.0));
    }
}

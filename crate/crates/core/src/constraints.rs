//! CLF and CBF evaluation for the overtaking case study and assembly of the
//! robust fixed-time CLF-CBF QP.
//!
//! Decision vector is `z = (omega, a, delta1, delta2, delta3)`. Rows are
//! ordered: four input-box rows, the CLF row, the lane-barrier row and the
//! lead-barrier row. Both barriers use the convention `h >= 0` on the safe
//! side.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::QpProblem;
use crate::vehicle::{drift, InputLimits, Vec4, VehicleState};

pub const N_VARS: usize = 5;
pub const N_ROWS: usize = 7;
pub const ROW_CLF: usize = 4;
pub const ROW_LANE: usize = 5;
pub const ROW_LEAD: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClfGains {
    #[serde(rename = "K")]
    pub k: f64,
    pub kx: f64,
    pub ky: f64,
    pub ktheta: f64,
    pub kv: f64,
    pub kxv: f64,
    pub kytheta: f64,
}

impl Default for ClfGains {
    fn default() -> Self {
        ClfGains {
            k: 1e-4,
            kx: 1.0 / 3600.0,
            ky: 100.0,
            ktheta: 400.0,
            kv: 1.0,
            kxv: 1.0 / 1200.0,
            kytheta: 100.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GoalState {
    pub xg: f64,
    pub yg: f64,
    pub thetag: f64,
    pub vg: f64,
}

impl GoalState {
    pub fn to_array(self) -> Vec4 {
        [self.xg, self.yg, self.thetag, self.vg]
    }
}

/// Heading-dependent offset of the lane edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LaneMargin {
    /// `v (1 - cos theta) / omega_max`: lateral distance covered while
    /// turning back to a zero heading at the maximum rate.
    #[default]
    StoppingDistance,
    /// `v omega_max (1 - cos theta)`.
    RateProduct,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RoadGeometry {
    pub lane_width: f64,
    pub car_width: f64,
    pub car_length: f64,
    /// Steering-rate bound entering the lane-edge offsets.
    pub omega_max: f64,
    /// Time headway of the lead safety ellipse.
    pub tau: f64,
    pub lane_margin: LaneMargin,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        RoadGeometry {
            lane_width: 3.0,
            car_width: 2.27,
            car_length: 5.05,
            omega_max: PI / 18.0,
            tau: 1.8,
            lane_margin: LaneMargin::StoppingDistance,
        }
    }
}

impl RoadGeometry {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("road.lane_width", self.lane_width),
            ("road.car_width", self.car_width),
            ("road.car_length", self.car_length),
            ("road.omega_max", self.omega_max),
            ("road.tau", self.tau),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Validation {
                    field: name.into(),
                    reason: format!("must be positive, got {v}"),
                });
            }
        }
        if self.car_width >= self.lane_width {
            return Err(Error::Validation {
                field: "road.car_width".into(),
                reason: "must be narrower than the lane".into(),
            });
        }
        Ok(())
    }

    /// Lateral semi-axis of the lead safety ellipse.
    pub fn s_dy(&self) -> f64 {
        self.lane_width - 0.5 * self.car_width
    }

    /// Longitudinal semi-axis `v tau cos(theta) + l_c` for the ego state.
    pub fn s_dx(&self, ego: &VehicleState) -> f64 {
        ego.v * self.tau * ego.theta.cos() + self.car_length
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QpWeights {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub q1: f64,
    pub mu: f64,
    /// Fixed-time window of the current phase.
    pub t_phase: f64,
}

impl Default for QpWeights {
    fn default() -> Self {
        QpWeights {
            p1: 1200.0,
            p2: 1.0,
            p3: 1.0,
            q1: 1000.0,
            mu: 5.0,
            t_phase: 10.0,
        }
    }
}

impl QpWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("weights.p1", self.p1),
            ("weights.p2", self.p2),
            ("weights.p3", self.p3),
            ("weights.q1", self.q1),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Validation {
                    field: name.into(),
                    reason: format!("must be nonnegative, got {v}"),
                });
            }
        }
        if !(self.mu > 1.0) {
            return Err(Error::Validation {
                field: "weights.mu".into(),
                reason: format!("must exceed 1, got {}", self.mu),
            });
        }
        if !(self.t_phase > 0.0) {
            return Err(Error::Validation {
                field: "weights.t_phase".into(),
                reason: format!("must be positive, got {}", self.t_phase),
            });
        }
        Ok(())
    }

    pub fn gamma1(&self) -> f64 {
        1.0 + 1.0 / self.mu
    }

    pub fn gamma2(&self) -> f64 {
        1.0 - 1.0 / self.mu
    }

    /// `alpha = pi mu / (2 T)`, shared by both CLF decay terms.
    pub fn alpha(&self) -> f64 {
        PI * self.mu / (2.0 * self.t_phase)
    }

    pub fn with_window(self, t_phase: f64) -> Self {
        QpWeights { t_phase, ..self }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RobustOptions {
    /// Tighten rows by gradient norm times `phi_inf`.
    pub enabled: bool,
    pub phi_inf: f64,
    /// Drop lead- and goal-motion terms, keeping only the printed rows.
    pub quasi_static: bool,
}

/// Value and gradient of a scalar function of the ego state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluated {
    pub value: f64,
    pub grad: Vec4,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeadBarrier {
    pub value: f64,
    pub grad_ego: Vec4,
    pub grad_lead: Vec4,
}

pub fn check_gains(gains: &ClfGains) -> bool {
    let positive = [gains.k, gains.kx, gains.ky, gains.ktheta, gains.kv]
        .iter()
        .all(|&g| g > 0.0);
    positive
        && gains.kxv > 0.0
        && gains.kxv < 2.0 * (gains.kx * gains.kv).sqrt()
        && gains.kytheta > 0.0
        && gains.kytheta < 2.0 * (gains.ky * gains.ktheta).sqrt()
}

pub fn clf_eval(q: &VehicleState, g: &GoalState, gains: &ClfGains) -> Evaluated {
    let ex = q.x - g.xg;
    let ey = q.y - g.yg;
    let et = q.theta - g.thetag;
    let ev = q.v - g.vg;
    let k = gains.k;
    let value = k
        * (gains.kx * ex * ex
            + gains.kv * ev * ev
            + gains.kxv * ex * ev
            + gains.ky * ey * ey
            + gains.ktheta * et * et
            + gains.kytheta * ey * et
            - 1.0);
    let grad = [
        k * (2.0 * gains.kx * ex + gains.kxv * ev),
        k * (2.0 * gains.ky * ey + gains.kytheta * et),
        k * (2.0 * gains.ktheta * et + gains.kytheta * ey),
        k * (2.0 * gains.kv * ev + gains.kxv * ex),
    ];
    Evaluated { value, grad }
}

/// Lane-keeping barrier `(y - e1)(e2 - y)`.
pub fn cbf_lane(q: &VehicleState, road: &RoadGeometry) -> Evaluated {
    let (s, c) = q.theta.sin_cos();
    // shrink = scale * v * (1 - cos theta)
    let scale = match road.lane_margin {
        LaneMargin::StoppingDistance => 1.0 / road.omega_max,
        LaneMargin::RateProduct => road.omega_max,
    };
    let shrink = scale * q.v * (1.0 - c);
    let e1 = 0.5 * road.car_width + shrink;
    let e2 = 2.0 * road.lane_width - 0.5 * road.car_width - shrink;
    let value = (q.y - e1) * (e2 - q.y);
    let width = e2 - e1;
    let grad = [
        0.0,
        e1 + e2 - 2.0 * q.y,
        -width * scale * q.v * s,
        -width * scale * (1.0 - c),
    ];
    Evaluated { value, grad }
}

/// Lead-distance barrier `(dx / s_dx)^2 + (dy / s_dy)^2 - 1`.
pub fn cbf_lead(qe: &VehicleState, ql: &VehicleState, road: &RoadGeometry) -> Result<LeadBarrier> {
    let sdx = road.s_dx(qe);
    if !(sdx > 0.0) {
        return Err(Error::Geometry(format!("s_dx = {sdx} is not positive")));
    }
    let sdy = road.s_dy();
    let dx = ql.x - qe.x;
    let dy = ql.y - qe.y;
    let value = (dx / sdx).powi(2) + (dy / sdy).powi(2) - 1.0;
    let d_sdx = -2.0 * dx * dx / sdx.powi(3);
    let (s, c) = qe.theta.sin_cos();
    let grad_ego = [
        -2.0 * dx / (sdx * sdx),
        -2.0 * dy / (sdy * sdy),
        d_sdx * (-qe.v * road.tau * s),
        d_sdx * (road.tau * c),
    ];
    let grad_lead = [2.0 * dx / (sdx * sdx), 2.0 * dy / (sdy * sdy), 0.0, 0.0];
    Ok(LeadBarrier {
        value,
        grad_ego,
        grad_lead,
    })
}

fn dot(a: &Vec4, b: &Vec4) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &Vec4) -> f64 {
    dot(a, a).sqrt()
}

/// Everything needed to build one QP instance.
#[derive(Debug, Clone, Copy)]
pub struct QpInputs<'a> {
    pub ego: &'a VehicleState,
    pub lead_est: &'a VehicleState,
    pub lead_rate_est: &'a Vec4,
    pub goal: &'a GoalState,
    pub goal_rate: &'a Vec4,
    pub gains: &'a ClfGains,
    pub road: &'a RoadGeometry,
    pub weights: &'a QpWeights,
    pub limits: &'a InputLimits,
    pub robust: &'a RobustOptions,
}

pub fn assemble_qp(inp: &QpInputs<'_>) -> Result<QpProblem> {
    inp.road.validate()?;
    inp.weights.validate()?;
    inp.limits.validate()?;
    let w = inp.weights;
    let mut p = DMatrix::zeros(N_VARS, N_VARS);
    for (i, d) in [1.0, 1.0, 2.0 * w.p1, 2.0 * w.p2, 2.0 * w.p3].into_iter().enumerate() {
        p[(i, i)] = d;
    }
    let mut q = DVector::zeros(N_VARS);
    q[2] = w.q1;

    let mut a = DMatrix::zeros(N_ROWS, N_VARS);
    let mut b = DVector::zeros(N_ROWS);
    let lim = inp.limits;
    a[(0, 0)] = 1.0;
    b[0] = lim.omega_max;
    a[(1, 0)] = -1.0;
    b[1] = -lim.omega_min;
    a[(2, 1)] = 1.0;
    b[2] = lim.a_max;
    a[(3, 1)] = -1.0;
    b[3] = -lim.a_min;

    let f = drift(inp.ego);
    let phi = if inp.robust.enabled {
        inp.robust.phi_inf
    } else {
        0.0
    };
    let moving = !inp.robust.quasi_static;

    // dV/dt = grad V . (f + g u - goal_rate) <= delta1 - alpha (V+^g1 + V+^g2) - |grad V| phi
    let clf = clf_eval(inp.ego, inp.goal, inp.gains);
    let mut lf_v = dot(&clf.grad, &f);
    if moving {
        lf_v -= dot(&clf.grad, inp.goal_rate);
    }
    let vpos = clf.value.max(0.0);
    let alpha = w.alpha();
    let decay = alpha * vpos.powf(w.gamma1()) + alpha * vpos.powf(w.gamma2());
    a[(ROW_CLF, 0)] = clf.grad[2];
    a[(ROW_CLF, 1)] = clf.grad[3];
    a[(ROW_CLF, 2)] = -1.0;
    b[ROW_CLF] = -decay - lf_v - norm(&clf.grad) * phi;

    // -(Lf h + Lg h u) - delta h <= -rho
    let lane = cbf_lane(inp.ego, inp.road);
    let lf_lane = dot(&lane.grad, &f);
    a[(ROW_LANE, 0)] = -lane.grad[2];
    a[(ROW_LANE, 1)] = -lane.grad[3];
    a[(ROW_LANE, 3)] = -lane.value;
    b[ROW_LANE] = lf_lane - norm(&lane.grad) * phi;

    let lead = cbf_lead(inp.ego, inp.lead_est, inp.road)?;
    let mut lf_lead = dot(&lead.grad_ego, &f);
    if moving {
        lf_lead += dot(&lead.grad_lead, inp.lead_rate_est);
    }
    a[(ROW_LEAD, 0)] = -lead.grad_ego[2];
    a[(ROW_LEAD, 1)] = -lead.grad_ego[3];
    a[(ROW_LEAD, 4)] = -lead.value;
    b[ROW_LEAD] = lf_lead - norm(&lead.grad_ego) * phi;

    QpProblem::new(p, q, a, b)
}

/// Largest `|grad V|` over the error box `|e_i| <= half_widths[i]`.
///
/// The gradient is linear in the error, so its norm is convex and the
/// maximum sits at a vertex of the box.
pub fn clf_gradient_bound(gains: &ClfGains, half_widths: &Vec4) -> f64 {
    let goal = GoalState::default();
    (0..16u32)
        .map(|mask| {
            let e: Vec4 = std::array::from_fn(|i| {
                if mask & (1 << i) != 0 {
                    half_widths[i]
                } else {
                    -half_widths[i]
                }
            });
            norm(&clf_eval(&VehicleState::from_array(e), &goal, gains).grad)
        })
        .fold(0.0, f64::max)
}

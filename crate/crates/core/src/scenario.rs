//! The four-phase overtaking scenario: Follow, MergeOut, Pass, MergeBack.
//!
//! The ego car runs the robust fixed-time CLF-CBF QP against a goal that is
//! rebuilt every control step from its estimate of the lead car. Lead and
//! oncoming cars hold their speed and heading. A go/no-go check compares the
//! gap to the oncoming car with the distance closed during the summed
//! per-phase settling-time bounds.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::constraints::{
    assemble_qp, cbf_lane, cbf_lead, check_gains, clf_eval, clf_gradient_bound, ClfGains,
    GoalState, QpInputs, QpWeights, RoadGeometry, RobustOptions,
};
use crate::error::{Error, Result};
use crate::fxts::{self, FxtsParams, K2Variant, OracleOptions, Regime};
use crate::qp::{solve_qp_with, QpStatus, SolverOptions};
use crate::vehicle::{
    drift, sample_disturbance, sense, step_with, ControlInput, DisturbanceModel, InputLimits,
    Integrator, SensingModel, Vec4, VehicleState,
};

const SALT_EGO: u64 = 1;
const SALT_LEAD: u64 = 2;
const SALT_ONCOMING: u64 = 3;

/// Barrier values below this count as a safety violation.
pub const SAFETY_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    Follow,
    MergeOut,
    Pass,
    MergeBack,
}

impl Phase {
    pub const OVERTAKE: [Phase; 3] = [Phase::MergeOut, Phase::Pass, Phase::MergeBack];

    pub fn next(self) -> Option<Phase> {
        match self {
            Phase::Follow => Some(Phase::MergeOut),
            Phase::MergeOut => Some(Phase::Pass),
            Phase::Pass => Some(Phase::MergeBack),
            Phase::MergeBack => None,
        }
    }

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn name(self) -> &'static str {
        match self {
            Phase::Follow => "follow",
            Phase::MergeOut => "merge_out",
            Phase::Pass => "pass",
            Phase::MergeBack => "merge_back",
        }
    }
}

/// Weights shared by every phase; the window `T` comes from the phase budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightConfig {
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    pub q1: f64,
    pub mu: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        let w = QpWeights::default();
        WeightConfig {
            p1: w.p1,
            p2: w.p2,
            p3: w.p3,
            q1: w.q1,
            mu: w.mu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PhaseBudgets {
    /// Window used for the CLF row while following; not a deadline.
    pub follow_window: f64,
    pub merge_out: f64,
    /// `None` derives `2 tau v_l(0) / (v_g - v_l(0)) + 4`.
    pub pass: Option<f64>,
    pub merge_back: f64,
}

impl Default for PhaseBudgets {
    fn default() -> Self {
        PhaseBudgets {
            follow_window: 10.0,
            merge_out: 10.0,
            pass: None,
            merge_back: 6.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioParams {
    pub v_lead0: f64,
    /// Time until the oncoming car passes the ego car.
    pub t_p: f64,
    pub vg_overtake: f64,
    pub v_oncoming: f64,
    pub dt: f64,
    pub budgets: PhaseBudgets,
    /// Multiplies every phase budget (used by the parameter sweep).
    pub budget_scale: f64,
    pub k: f64,
    /// `2 max delta1*` used for the settling-time estimate.
    pub c3_star: f64,
    pub k2_variant: K2Variant,
    /// Starting level for the oracle when a phase is supercritical.
    pub horizon_v0: f64,
    /// Half-widths of the (x, y, theta, v) error box bounding `|grad V|`.
    pub clf_error_box: Vec4,
    pub max_time: f64,
    /// A phase is abandoned after `timeout_factor * budget`.
    pub timeout_factor: f64,
    pub integrator: Integrator,
    pub robust: bool,
    pub quasi_static: bool,
    /// Apply disturbances to lead and oncoming cars too.
    pub disturb_others: bool,
    pub seed: u64,
}

impl Default for ScenarioParams {
    fn default() -> Self {
        ScenarioParams {
            v_lead0: 17.0,
            t_p: 2.0,
            vg_overtake: 25.0,
            v_oncoming: 25.0,
            dt: 0.001,
            budgets: PhaseBudgets::default(),
            budget_scale: 1.0,
            k: fxts::DEFAULT_MARGIN,
            c3_star: 0.638,
            k2_variant: K2Variant::LemmaK2,
            horizon_v0: 1e3,
            clf_error_box: [100.0, 6.0, PI / 6.0, 10.0],
            max_time: 120.0,
            timeout_factor: 2.0,
            integrator: Integrator::Euler,
            robust: true,
            quasi_static: false,
            disturb_others: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub gains: ClfGains,
    pub road: RoadGeometry,
    pub limits: InputLimits,
    pub weights: WeightConfig,
    pub disturbance: DisturbanceModel,
    pub sensing: SensingModel,
    pub scenario: ScenarioParams,
    pub solver: SolverOptions,
}

fn invalid(field: &str, reason: impl Into<String>) -> Error {
    Error::Validation {
        field: field.into(),
        reason: reason.into(),
    }
}

/// splitmix64 finalizer, used to derive independent seeds.
pub fn mix_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        if !check_gains(&self.gains) {
            return Err(invalid(
                "gains",
                "need positive gains with kxv < 2 sqrt(kx kv) and kytheta < 2 sqrt(ky ktheta)",
            ));
        }
        self.road.validate()?;
        self.limits.validate()?;
        self.phase_weights(Phase::MergeOut)?.validate()?;
        if !(self.disturbance.phi_inf >= 0.0) {
            return Err(invalid("disturbance.phi_inf", "must be nonnegative"));
        }
        if !(self.sensing.eps >= 0.0) {
            return Err(invalid("sensing.eps", "must be nonnegative"));
        }
        let s = &self.scenario;
        for (name, v) in [
            ("scenario.v_lead0", s.v_lead0),
            ("scenario.t_p", s.t_p),
            ("scenario.vg_overtake", s.vg_overtake),
            ("scenario.v_oncoming", s.v_oncoming),
            ("scenario.dt", s.dt),
            ("scenario.budget_scale", s.budget_scale),
            ("scenario.max_time", s.max_time),
            ("scenario.timeout_factor", s.timeout_factor),
            ("scenario.horizon_v0", s.horizon_v0),
            ("scenario.budgets.follow_window", s.budgets.follow_window),
            ("scenario.budgets.merge_out", s.budgets.merge_out),
            ("scenario.budgets.merge_back", s.budgets.merge_back),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(name, format!("must be positive, got {v}")));
            }
        }
        if let Some(p) = s.budgets.pass {
            if !(p > 0.0) {
                return Err(invalid("scenario.budgets.pass", "must be positive"));
            }
        }
        if !(s.k > 1.0) {
            return Err(invalid("scenario.k", "must exceed 1"));
        }
        if !(s.c3_star.is_finite()) {
            return Err(invalid("scenario.c3_star", "must be finite"));
        }
        if s.clf_error_box.iter().any(|&w| !(w >= 0.0)) {
            return Err(invalid("scenario.clf_error_box", "must be nonnegative"));
        }
        phase_time_budget(Phase::Pass, self)?;
        Ok(())
    }

    /// Sets the master seed and derives the disturbance and sensing seeds.
    pub fn reseed(&mut self, master: u64) {
        self.scenario.seed = master;
        self.disturbance.seed = mix_seed(master, 1);
        self.sensing.seed = mix_seed(master, 2);
    }

    pub fn phase_weights(&self, phase: Phase) -> Result<QpWeights> {
        let t = match phase_time_budget(phase, self)? {
            Some(t) => t,
            None => self.scenario.budgets.follow_window * self.scenario.budget_scale,
        };
        Ok(QpWeights {
            p1: self.weights.p1,
            p2: self.weights.p2,
            p3: self.weights.p3,
            q1: self.weights.q1,
            mu: self.weights.mu,
            t_phase: t,
        })
    }

    pub fn robust_options(&self) -> RobustOptions {
        RobustOptions {
            enabled: self.scenario.robust,
            phi_inf: self.disturbance.phi_inf,
            quasi_static: self.scenario.quasi_static,
        }
    }

    /// Sum of the MergeOut, Pass and MergeBack budgets.
    pub fn total_budget(&self) -> Result<f64> {
        Phase::OVERTAKE
            .iter()
            .map(|&p| phase_time_budget(p, self).map(|t| t.unwrap_or(0.0)))
            .sum()
    }
}

/// Fixed-time window for `phase`; `None` while following.
pub fn phase_time_budget(phase: Phase, cfg: &ScenarioConfig) -> Result<Option<f64>> {
    let s = &cfg.scenario;
    let base = match phase {
        Phase::Follow => return Ok(None),
        Phase::MergeOut => s.budgets.merge_out,
        Phase::Pass => match s.budgets.pass {
            Some(t) => t,
            None => {
                if !(s.vg_overtake > s.v_lead0) {
                    return Err(Error::Budget(format!(
                        "overtake speed {} does not exceed lead speed {}",
                        s.vg_overtake, s.v_lead0
                    )));
                }
                2.0 * cfg.road.tau * s.v_lead0 / (s.vg_overtake - s.v_lead0) + 4.0
            }
        },
        Phase::MergeBack => s.budgets.merge_back,
    };
    Ok(Some(base * s.budget_scale))
}

/// Goal state for `phase` and its time derivative induced by lead motion.
pub fn phase_goal(
    phase: Phase,
    ego: &VehicleState,
    lead_est: &VehicleState,
    cfg: &ScenarioConfig,
) -> (GoalState, Vec4) {
    let tau = cfg.road.tau;
    let w_l = cfg.road.lane_width;
    let gap = 1.5 * tau * lead_est.v;
    let (xg, yg, vg) = match phase {
        Phase::Follow => (lead_est.x - gap + 50.0, lead_est.y, lead_est.v),
        Phase::MergeOut => (
            lead_est.x - gap + 50.0,
            lead_est.y + w_l,
            cfg.scenario.vg_overtake,
        ),
        Phase::Pass => (
            lead_est.x + gap + 50.0,
            lead_est.y + w_l,
            cfg.scenario.vg_overtake,
        ),
        Phase::MergeBack => (lead_est.x + gap + 50.0, lead_est.y, cfg.scenario.vg_overtake),
    };
    let dx = xg - ego.x;
    let dy = yg - ego.y;
    let thetag = if dx != 0.0 { (dy / dx).atan() } else { 0.0 };

    // lead speed and heading are held, so only its position moves the goal
    let lead_rate = drift(lead_est);
    let (xg_dot, yg_dot) = (lead_rate[0], lead_rate[1]);
    let r2 = dx * dx + dy * dy;
    let thetag_dot = if r2 > 0.0 {
        (dx * yg_dot - dy * xg_dot) / r2
    } else {
        0.0
    };
    (
        GoalState {
            xg,
            yg,
            thetag,
            vg,
        },
        [xg_dot, yg_dot, thetag_dot, 0.0],
    )
}

/// Distance closed on the oncoming car over `t_est`.
pub fn overtake_horizon(ego: &VehicleState, oncoming_est: &VehicleState, t_est: f64) -> f64 {
    (ego.v * ego.theta.cos() - oncoming_est.v * oncoming_est.theta.cos()) * t_est
}

/// `c3` used for the go/no-go estimate: the nominal `2 max delta1*` plus the
/// disturbance margin `L |phi|_inf`.
pub fn decision_c3(cfg: &ScenarioConfig) -> f64 {
    let l = clf_gradient_bound(&cfg.gains, &cfg.scenario.clf_error_box);
    cfg.scenario.c3_star + fxts::robust_margin(l, cfg.disturbance.phi_inf)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate {
    pub phase: Phase,
    pub alpha: f64,
    pub regime: Regime,
    pub time: f64,
}

/// Settling-time estimate of one overtaking phase for a given `c3`.
pub fn phase_settling_estimate(cfg: &ScenarioConfig, phase: Phase, c3: f64) -> Result<PhaseEstimate> {
    let alpha = cfg.phase_weights(phase)?.alpha();
    let p = FxtsParams::with_margin(alpha, alpha, c3, cfg.weights.mu, cfg.scenario.k)?;
    let regime = fxts::classify_regime(&p)?;
    let time = match regime {
        Regime::Supercritical => {
            let opts = OracleOptions {
                horizon: 1e4,
                ..Default::default()
            };
            match fxts::numeric_settling_time(&p, cfg.scenario.horizon_v0, &opts) {
                Ok(t) => t,
                Err(Error::Timeout { .. }) => f64::INFINITY,
                Err(e) => return Err(e),
            }
        }
        _ => fxts::settling_time_bound(&p, cfg.scenario.k2_variant)?.value,
    };
    Ok(PhaseEstimate {
        phase,
        alpha,
        regime,
        time,
    })
}

/// Summed settling-time estimate over MergeOut, Pass and MergeBack.
pub fn settling_estimate(cfg: &ScenarioConfig, c3: f64) -> Result<f64> {
    Phase::OVERTAKE
        .iter()
        .map(|&p| phase_settling_estimate(cfg, p, c3).map(|e| e.time))
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub t: f64,
    pub gap: f64,
    pub horizon: f64,
    pub t_est: f64,
    pub c3: f64,
    pub go: bool,
}

/// Go/no-go: the oncoming car must be behind the ego car or farther ahead
/// than the overtaking horizon.
pub fn decide_overtake(
    ego: &VehicleState,
    oncoming_est: &VehicleState,
    t_est: f64,
) -> (bool, f64, f64) {
    let gap = oncoming_est.x - ego.x;
    let horizon = overtake_horizon(ego, oncoming_est, t_est);
    let go = gap <= 0.0 || gap > horizon;
    (go, gap, horizon)
}

pub fn evaluate_decision(
    t: f64,
    ego: &VehicleState,
    oncoming_est: &VehicleState,
    cfg: &ScenarioConfig,
) -> Result<Decision> {
    let c3 = decision_c3(cfg);
    let t_est = settling_estimate(cfg, c3)?;
    let (go, gap, horizon) = decide_overtake(ego, oncoming_est, t_est);
    Ok(Decision {
        t,
        gap,
        horizon,
        t_est,
        c3,
        go,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub ego: VehicleState,
    pub lead: VehicleState,
    pub oncoming: VehicleState,
    pub lead_est: VehicleState,
    pub oncoming_est: VehicleState,
    pub u: ControlInput,
    pub delta: [f64; 3],
    pub v: f64,
    pub h_lane: f64,
    pub h_lead: f64,
    pub phase: Phase,
    pub qp_status: QpStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhaseSummary {
    pub phase: Phase,
    pub t_budget: f64,
    pub t_start: Option<f64>,
    pub t_actual: Option<f64>,
    pub converged: bool,
}

impl PhaseSummary {
    pub fn within_budget(&self) -> bool {
        self.converged && self.t_actual.is_some_and(|t| t <= self.t_budget)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EpisodeStatus {
    Completed,
    SafetyViolation,
    QpInfeasible,
    QpDegenerate,
    PhaseTimeout,
    HorizonReached,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub t: f64,
    pub h_lane: f64,
    pub h_lead: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub status: EpisodeStatus,
    pub phases: Vec<PhaseSummary>,
    /// Largest `delta1*` over the overtaking phases.
    pub max_delta1: f64,
    pub c3_star: f64,
    pub min_h_lane: f64,
    pub min_h_lead: f64,
    pub max_abs_omega: f64,
    pub max_abs_a: f64,
    pub infeasible_solves: usize,
    pub overtake_started: Option<f64>,
    pub decisions: Vec<Decision>,
    pub violation: Option<Violation>,
    pub disturbance_seed: u64,
    pub sensing_seed: u64,
    pub duration: f64,
}

impl EpisodeSummary {
    pub fn phase(&self, phase: Phase) -> Option<&PhaseSummary> {
        self.phases.iter().find(|p| p.phase == phase)
    }

    pub fn all_within_budget(&self) -> bool {
        Phase::OVERTAKE
            .iter()
            .all(|&p| self.phase(p).is_some_and(PhaseSummary::within_budget))
    }

    pub fn safe(&self) -> bool {
        self.violation.is_none()
            && self.min_h_lane >= -SAFETY_TOLERANCE
            && self.min_h_lead >= -SAFETY_TOLERANCE
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub records: Vec<StepRecord>,
    pub summary: EpisodeSummary,
}

/// Initial (ego, lead, oncoming) states.
pub fn initial_states(cfg: &ScenarioConfig) -> (VehicleState, VehicleState, VehicleState) {
    let s = &cfg.scenario;
    let tau = cfg.road.tau;
    let w_l = cfg.road.lane_width;
    let ego = VehicleState::new(-tau * s.v_lead0, 0.5 * w_l, 0.0, s.v_lead0);
    let lead = VehicleState::new(tau * s.v_lead0, 0.5 * w_l, 0.0, s.v_lead0);
    let oncoming = VehicleState::new(
        ego.x + 2.0 * s.v_lead0 * s.t_p,
        1.5 * w_l,
        -PI,
        s.v_oncoming,
    );
    (ego, lead, oncoming)
}

fn true_barriers(ego: &VehicleState, lead: &VehicleState, road: &RoadGeometry) -> (f64, f64) {
    let lane = cbf_lane(ego, road).value;
    let lead = cbf_lead(ego, lead, road).map(|b| b.value).unwrap_or(f64::NEG_INFINITY);
    (lane, lead)
}

enum DecisionState {
    Pending,
    Deferred,
    Done,
}

pub fn run_episode(cfg: &ScenarioConfig) -> Result<TrajectoryLog> {
    cfg.validate()?;
    let s = &cfg.scenario;
    let dt = s.dt;
    let robust = cfg.robust_options();
    let (mut ego, mut lead, mut oncoming) = initial_states(cfg);

    let mut phases: Vec<PhaseSummary> = Phase::OVERTAKE
        .iter()
        .map(|&p| {
            Ok(PhaseSummary {
                phase: p,
                t_budget: phase_time_budget(p, cfg)?.unwrap_or(f64::INFINITY),
                t_start: None,
                t_actual: None,
                converged: false,
            })
        })
        .collect::<Result<_>>()?;
    let slot = |p: Phase| p.index() as usize - 1;

    let mut records = Vec::with_capacity((s.max_time / dt).min(2e5) as usize);
    let mut decisions = Vec::new();
    let mut decision_state = DecisionState::Pending;
    let mut phase = Phase::Follow;
    let mut phase_start = 0.0;
    let mut status = EpisodeStatus::HorizonReached;
    let mut violation = None;
    let mut max_delta1 = f64::NEG_INFINITY;
    let mut infeasible = 0usize;
    let mut overtake_started = None;

    let (h0_lane, h0_lead) = true_barriers(&ego, &lead, &cfg.road);
    let mut min_h_lane = h0_lane;
    let mut min_h_lead = h0_lead;
    let mut max_abs_omega = 0.0f64;
    let mut max_abs_a = 0.0f64;
    if h0_lane < -SAFETY_TOLERANCE || h0_lead < -SAFETY_TOLERANCE {
        violation = Some(Violation {
            t: 0.0,
            h_lane: h0_lane,
            h_lead: h0_lead,
        });
        status = EpisodeStatus::SafetyViolation;
    }

    let n_steps = (s.max_time / dt).ceil() as u64;
    let mut k: u64 = 0;
    'episode: while violation.is_none() && k < n_steps {
        let t = k as f64 * dt;
        let lead_est = sense(&lead, &cfg.sensing, SALT_LEAD, k);
        let oncoming_est = sense(&oncoming, &cfg.sensing, SALT_ONCOMING, k);

        if phase == Phase::Follow {
            let evaluate = match decision_state {
                DecisionState::Pending => true,
                DecisionState::Deferred => oncoming_est.x < ego.x,
                DecisionState::Done => false,
            };
            if evaluate {
                let d = evaluate_decision(t, &ego, &oncoming_est, cfg)?;
                let go = d.go;
                decisions.push(d);
                if go {
                    decision_state = DecisionState::Done;
                    phase = Phase::MergeOut;
                    phase_start = t;
                    overtake_started = Some(t);
                    phases[slot(phase)].t_start = Some(t);
                } else {
                    decision_state = DecisionState::Deferred;
                }
            }
        }

        if phase != Phase::Follow {
            let (goal, _) = phase_goal(phase, &ego, &lead_est, cfg);
            let elapsed = t - phase_start;
            if clf_eval(&ego, &goal, &cfg.gains).value <= 0.0 {
                let ps = &mut phases[slot(phase)];
                ps.t_actual = Some(elapsed);
                ps.converged = true;
                match phase.next() {
                    Some(next) => {
                        phase = next;
                        phase_start = t;
                        phases[slot(phase)].t_start = Some(t);
                    }
                    None => {
                        status = EpisodeStatus::Completed;
                        break 'episode;
                    }
                }
            } else if elapsed > s.timeout_factor * phases[slot(phase)].t_budget {
                status = EpisodeStatus::PhaseTimeout;
                break 'episode;
            }
        }
        let (goal, goal_rate) = phase_goal(phase, &ego, &lead_est, cfg);
        let clf_value = clf_eval(&ego, &goal, &cfg.gains).value;

        let weights = cfg.phase_weights(phase)?;
        let lead_rate = drift(&lead_est);
        let prob = assemble_qp(&QpInputs {
            ego: &ego,
            lead_est: &lead_est,
            lead_rate_est: &lead_rate,
            goal: &goal,
            goal_rate: &goal_rate,
            gains: &cfg.gains,
            road: &cfg.road,
            weights: &weights,
            limits: &cfg.limits,
            robust: &robust,
        })?;
        let sol = solve_qp_with(&prob, &cfg.solver)?;
        let (h_lane, h_lead) = true_barriers(&ego, &lead, &cfg.road);
        let (u, delta) = match sol.status {
            QpStatus::Optimal => (
                cfg.limits.saturate(ControlInput {
                    omega: sol.z[0],
                    a: sol.z[1],
                }),
                [sol.z[2], sol.z[3], sol.z[4]],
            ),
            _ => (ControlInput::ZERO, [f64::NAN; 3]),
        };
        records.push(StepRecord {
            t,
            ego,
            lead,
            oncoming,
            lead_est,
            oncoming_est,
            u,
            delta,
            v: clf_value,
            h_lane,
            h_lead,
            phase,
            qp_status: sol.status,
        });
        match sol.status {
            QpStatus::Optimal => {}
            QpStatus::Infeasible => {
                infeasible += 1;
                status = EpisodeStatus::QpInfeasible;
                break 'episode;
            }
            QpStatus::Degenerate => {
                status = EpisodeStatus::QpDegenerate;
                break 'episode;
            }
        }
        if phase != Phase::Follow {
            max_delta1 = max_delta1.max(delta[0]);
        }
        max_abs_omega = max_abs_omega.max(u.omega.abs());
        max_abs_a = max_abs_a.max(u.a.abs());

        let phi_ego = sample_disturbance(&cfg.disturbance, SALT_EGO, k);
        let (phi_lead, phi_onc) = if s.disturb_others {
            (
                sample_disturbance(&cfg.disturbance, SALT_LEAD, k),
                sample_disturbance(&cfg.disturbance, SALT_ONCOMING, k),
            )
        } else {
            ([0.0; 4], [0.0; 4])
        };
        ego = step_with(s.integrator, &ego, u, &phi_ego, dt);
        lead = step_with(s.integrator, &lead, ControlInput::ZERO, &phi_lead, dt);
        oncoming = step_with(s.integrator, &oncoming, ControlInput::ZERO, &phi_onc, dt);
        k += 1;

        let (h_lane, h_lead) = true_barriers(&ego, &lead, &cfg.road);
        min_h_lane = min_h_lane.min(h_lane);
        min_h_lead = min_h_lead.min(h_lead);
        if h_lane < -SAFETY_TOLERANCE || h_lead < -SAFETY_TOLERANCE || !ego.is_finite() {
            violation = Some(Violation {
                t: k as f64 * dt,
                h_lane,
                h_lead,
            });
            status = EpisodeStatus::SafetyViolation;
        }
    }

    let max_delta1 = if max_delta1.is_finite() { max_delta1 } else { 0.0 };
    let summary = EpisodeSummary {
        status,
        phases,
        max_delta1,
        c3_star: 2.0 * max_delta1,
        min_h_lane,
        min_h_lead,
        max_abs_omega,
        max_abs_a,
        infeasible_solves: infeasible,
        overtake_started,
        decisions,
        violation,
        disturbance_seed: cfg.disturbance.seed,
        sensing_seed: cfg.sensing.seed,
        duration: k as f64 * dt,
    };
    Ok(TrajectoryLog { records, summary })
}

/// Parameter grid for the `2 max delta1*` sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    pub k: Vec<f64>,
    /// Total fixed-time window; phase budgets are scaled proportionally.
    pub t_total: Vec<f64>,
    pub omega_max: Vec<f64>,
    pub a_max: Vec<f64>,
}

impl Default for SweepGrid {
    fn default() -> Self {
        SweepGrid {
            k: vec![1e-4],
            t_total: vec![13.15, 17.65, 22.65, 27.65, 30.65],
            omega_max: vec![0.1745, 1.745],
            a_max: vec![2.45, 24.525],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub k: f64,
    pub t_total: f64,
    pub omega_max: f64,
    pub a_max: f64,
    pub c3_star: f64,
    pub status: EpisodeStatus,
    pub within_budget: bool,
}

/// Nominal copy of `cfg` with the given gain, window and input bounds.
pub fn sweep_point(cfg: &ScenarioConfig, k: f64, t_total: f64, omega_max: f64, a_max: f64) -> Result<ScenarioConfig> {
    let mut c = cfg.clone();
    c.disturbance.phi_inf = 0.0;
    c.sensing.eps = 0.0;
    c.scenario.budget_scale = 1.0;
    let nominal_total = c.total_budget()?;
    c.scenario.budget_scale = t_total / nominal_total;
    c.gains.k = k;
    c.limits = InputLimits::symmetric(omega_max, a_max);
    c.road.omega_max = omega_max;
    Ok(c)
}

/// Runs a nominal episode per grid point and reports `2 max delta1*`.
///
/// The first return value is the estimate for `cfg` itself (with
/// disturbances switched off).
pub fn estimate_c3(cfg: &ScenarioConfig, grid: &SweepGrid) -> Result<(f64, Vec<SweepRow>)> {
    let mut points = Vec::new();
    for &k in &grid.k {
        for &t in &grid.t_total {
            for &w in &grid.omega_max {
                for &a in &grid.a_max {
                    points.push((k, t, w, a));
                }
            }
        }
    }
    let rows = points
        .par_iter()
        .map(|&(k, t, w, a)| {
            let c = sweep_point(cfg, k, t, w, a)?;
            let (c3_star, status, within_budget) = match run_episode(&c) {
                Ok(log) => (
                    log.summary.c3_star,
                    log.summary.status,
                    log.summary.all_within_budget(),
                ),
                Err(Error::Validation { .. }) | Err(Error::Geometry(_)) => {
                    (f64::NAN, EpisodeStatus::QpInfeasible, false)
                }
                Err(e) => return Err(e),
            };
            Ok(SweepRow {
                k,
                t_total: t,
                omega_max: w,
                a_max: a,
                c3_star,
                status,
                within_budget,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut nominal = cfg.clone();
    nominal.disturbance.phi_inf = 0.0;
    nominal.sensing.eps = 0.0;
    let c3 = run_episode(&nominal)?.summary.c3_star;
    Ok((c3, rows))
}


//! Kinematic bicycle model with additive bounded disturbances and
//! bounded-error state sensing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec4 = [f64; 4];

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub v: f64,
}

impl VehicleState {
    pub const fn new(x: f64, y: f64, theta: f64, v: f64) -> Self {
        VehicleState { x, y, theta, v }
    }

    pub fn to_array(self) -> Vec4 {
        [self.x, self.y, self.theta, self.v]
    }

    pub fn from_array(a: Vec4) -> Self {
        VehicleState::new(a[0], a[1], a[2], a[3])
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|c| c.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub omega: f64,
    pub a: f64,
}

impl ControlInput {
    pub const ZERO: ControlInput = ControlInput { omega: 0.0, a: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputLimits {
    pub omega_min: f64,
    pub omega_max: f64,
    pub a_min: f64,
    pub a_max: f64,
}

impl Default for InputLimits {
    fn default() -> Self {
        let w = std::f64::consts::PI / 18.0;
        let a = 0.25 * 9.81;
        InputLimits {
            omega_min: -w,
            omega_max: w,
            a_min: -a,
            a_max: a,
        }
    }
}

impl InputLimits {
    pub fn symmetric(omega_max: f64, a_max: f64) -> Self {
        InputLimits {
            omega_min: -omega_max,
            omega_max,
            a_min: -a_max,
            a_max,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega_min < self.omega_max) {
            return Err(Error::Validation {
                field: "limits.omega_min".into(),
                reason: "must be below omega_max".into(),
            });
        }
        if !(self.a_min < self.a_max) {
            return Err(Error::Validation {
                field: "limits.a_min".into(),
                reason: "must be below a_max".into(),
            });
        }
        Ok(())
    }

    pub fn saturate(&self, u: ControlInput) -> ControlInput {
        ControlInput {
            omega: u.omega.clamp(self.omega_min, self.omega_max),
            a: u.a.clamp(self.a_min, self.a_max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum DisturbanceDistribution {
    /// Zero-mean Gaussian with `3 sigma = phi_inf`, clipped at `+-phi_inf`.
    #[default]
    SaturatedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DisturbanceModel {
    pub phi_inf: f64,
    /// Per-channel multipliers of `phi_inf` for (x, y, theta, v).
    pub channel_scale: Vec4,
    pub seed: u64,
    pub distribution: DisturbanceDistribution,
}

impl Default for DisturbanceModel {
    fn default() -> Self {
        DisturbanceModel {
            phi_inf: 0.0,
            channel_scale: [1.0; 4],
            seed: 0,
            distribution: DisturbanceDistribution::SaturatedGaussian,
        }
    }
}

impl DisturbanceModel {
    pub fn bounds(&self) -> Vec4 {
        self.channel_scale.map(|s| s.abs() * self.phi_inf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensingModel {
    pub eps: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Integrator {
    #[default]
    Euler,
    Rk4,
}

/// Deterministic RNG for draw `index` of stream `salt` under `seed`.
fn stream_rng(seed: u64, salt: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    rng.set_stream(index);
    rng
}

/// Drift term `f(q) = (v cos theta, v sin theta, 0, 0)`.
pub fn drift(q: &VehicleState) -> Vec4 {
    let (s, c) = q.theta.sin_cos();
    [q.v * c, q.v * s, 0.0, 0.0]
}

fn derivative(q: &VehicleState, u: ControlInput, phi: &Vec4) -> Vec4 {
    let f = drift(q);
    [
        f[0] + phi[0],
        f[1] + phi[1],
        u.omega + phi[2],
        u.a + phi[3],
    ]
}

fn offset(q: &VehicleState, d: &Vec4, h: f64) -> VehicleState {
    VehicleState::new(
        q.x + h * d[0],
        q.y + h * d[1],
        q.theta + h * d[2],
        q.v + h * d[3],
    )
}

fn clamp_speed(mut q: VehicleState) -> VehicleState {
    if q.v < 0.0 {
        log::warn!("speed {:.3e} clamped to zero", q.v);
        q.v = 0.0;
    }
    q
}

/// One explicit-Euler step with `u` and `phi` held over `dt`.
pub fn step(q: &VehicleState, u: ControlInput, phi: &Vec4, dt: f64) -> VehicleState {
    clamp_speed(offset(q, &derivative(q, u, phi), dt))
}

/// Classical RK4 step under the same zero-order hold.
pub fn step_rk4(q: &VehicleState, u: ControlInput, phi: &Vec4, dt: f64) -> VehicleState {
    let k1 = derivative(q, u, phi);
    let k2 = derivative(&offset(q, &k1, 0.5 * dt), u, phi);
    let k3 = derivative(&offset(q, &k2, 0.5 * dt), u, phi);
    let k4 = derivative(&offset(q, &k3, dt), u, phi);
    let mut d = [0.0; 4];
    for i in 0..4 {
        d[i] = (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) / 6.0;
    }
    clamp_speed(offset(q, &d, dt))
}

pub fn step_with(
    integrator: Integrator,
    q: &VehicleState,
    u: ControlInput,
    phi: &Vec4,
    dt: f64,
) -> VehicleState {
    match integrator {
        Integrator::Euler => step(q, u, phi, dt),
        Integrator::Rk4 => step_rk4(q, u, phi, dt),
    }
}

/// Disturbance draw `index` for stream `salt` (one stream per vehicle).
pub fn sample_disturbance(m: &DisturbanceModel, salt: u64, index: u64) -> Vec4 {
    let bounds = m.bounds();
    if bounds.iter().all(|&b| b == 0.0) {
        return [0.0; 4];
    }
    let mut rng = stream_rng(m.seed, salt, index);
    let mut phi = [0.0; 4];
    for (p, &bound) in phi.iter_mut().zip(bounds.iter()) {
        let n: f64 = StandardNormal.sample(&mut rng);
        *p = (n * bound / 3.0).clamp(-bound, bound);
    }
    phi
}

/// Noisy estimate of `q_true` with Euclidean error at most `eps`.
pub fn sense(q_true: &VehicleState, m: &SensingModel, salt: u64, index: u64) -> VehicleState {
    if m.eps <= 0.0 {
        return *q_true;
    }
    let mut rng = stream_rng(m.seed, salt, index);
    let mut dir = [0.0f64; 4];
    let mut norm = 0.0;
    while norm < 1e-12 {
        for d in dir.iter_mut() {
            *d = StandardNormal.sample(&mut rng);
        }
        norm = dir.iter().map(|d| d * d).sum::<f64>().sqrt();
    }
    let radius = m.eps * rng.random::<f64>();
    let mut out = q_true.to_array();
    for (o, d) in out.iter_mut().zip(dir.iter()) {
        *o += radius * d / norm;
    }
    VehicleState::from_array(out)
}

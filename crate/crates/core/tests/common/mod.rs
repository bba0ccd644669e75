#![allow(dead_code)]

use fxts_overtake::qp::QpProblem;
use fxts_overtake::vehicle::VehicleState;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Strictly convex QP with a strictly feasible point.
pub fn random_qp(rng: &mut ChaCha8Rng, n: usize, m: usize) -> QpProblem {
    let l = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let p = &l * l.transpose() + DMatrix::identity(n, n) * 0.1;
    let q = DVector::from_fn(n, |_, _| rng.random_range(-5.0..5.0));
    let a = DMatrix::from_fn(m, n, |_, _| rng.random_range(-1.0..1.0));
    let z0 = DVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
    let b = &a * z0 + DVector::from_fn(m, |_, _| rng.random_range(0.01..1.0));
    QpProblem::new(p, q, a, b).unwrap()
}

pub fn objective(prob: &QpProblem, z: &DVector<f64>) -> f64 {
    0.5 * z.dot(&(&prob.p * z)) + prob.q.dot(z)
}

/// Composite 5-point Gauss-Legendre rule, refined until two levels agree.
pub fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    const X: [f64; 5] = [
        0.0,
        -0.538_469_310_105_683_1,
        0.538_469_310_105_683_1,
        -0.906_179_845_938_664,
        0.906_179_845_938_664,
    ];
    const W: [f64; 5] = [
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
        0.236_926_885_056_189_1,
    ];
    let rule = |panels: usize| {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|i| {
                let (lo, hi) = (a + i as f64 * h, a + (i + 1) as f64 * h);
                let (c, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
                r * X.iter().zip(W).map(|(x, w)| w * f(c + r * x)).sum::<f64>()
            })
            .sum::<f64>()
    };
    let mut panels = 16;
    let mut prev = rule(panels);
    loop {
        panels *= 2;
        let cur = rule(panels);
        if (cur - prev).abs() <= 1e-12 * cur.abs().max(1.0) || panels >= 1 << 16 {
            return cur;
        }
        prev = cur;
    }
}

/// Random ego state inside the road box.
pub fn road_state(rng: &mut ChaCha8Rng) -> VehicleState {
    VehicleState::new(
        rng.random_range(-100.0..100.0),
        rng.random_range(1.2..4.8),
        rng.random_range(-0.5..0.5),
        rng.random_range(0.0..30.0),
    )
}

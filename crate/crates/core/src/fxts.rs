//! Fixed-time stability bounds for Lyapunov inequalities with a
//! non-vanishing positive term,
//!
//! ```text
//!     dV/dt <= -c1 V^(1 + 1/mu) - c2 V^(1 - 1/mu) + c3,
//! ```
//!
//! together with a scalar ODE oracle that integrates the comparison system
//! to check the closed forms numerically.

use std::f64::consts::{FRAC_PI_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default margin `k > 1` applied to the supercritical domain level.
pub const DEFAULT_MARGIN: f64 = 1.05;

/// Coefficients of the Lyapunov differential inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FxtsParams {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub mu: f64,
    /// Margin used only when `c3 >= 2 sqrt(c1 c2)`.
    pub k: f64,
}

impl FxtsParams {
    pub fn new(c1: f64, c2: f64, c3: f64, mu: f64) -> Result<Self> {
        Self::with_margin(c1, c2, c3, mu, DEFAULT_MARGIN)
    }

    pub fn with_margin(c1: f64, c2: f64, c3: f64, mu: f64, k: f64) -> Result<Self> {
        let p = FxtsParams { c1, c2, c3, mu, k };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c1 > 0.0 && self.c1.is_finite()) {
            return Err(Error::param("c1", format!("must be positive, got {}", self.c1)));
        }
        if !(self.c2 > 0.0 && self.c2.is_finite()) {
            return Err(Error::param("c2", format!("must be positive, got {}", self.c2)));
        }
        if !self.c3.is_finite() {
            return Err(Error::param("c3", "must be finite"));
        }
        if !(self.mu > 1.0 && self.mu.is_finite()) {
            return Err(Error::param("mu", format!("must exceed 1, got {}", self.mu)));
        }
        if !(self.k > 1.0 && self.k.is_finite()) {
            return Err(Error::param("k", format!("must exceed 1, got {}", self.k)));
        }
        Ok(())
    }

    /// Exponent `1 + 1/mu`.
    pub fn a1(&self) -> f64 {
        1.0 + 1.0 / self.mu
    }

    /// Exponent `1 - 1/mu`.
    pub fn a2(&self) -> f64 {
        1.0 - 1.0 / self.mu
    }

    /// Threshold `2 sqrt(c1 c2)` separating the sub- and supercritical cases.
    pub fn critical_c3(&self) -> f64 {
        2.0 * (self.c1 * self.c2).sqrt()
    }

    /// Right-hand side of the comparison ODE, with V clamped at zero.
    pub fn rate(&self, v: f64) -> f64 {
        let v = v.max(0.0);
        -self.c1 * v.powf(self.a1()) - self.c2 * v.powf(self.a2()) + self.c3
    }

    /// Roots `a <= b` of `c1 s^2 - c3 s + c2`, when real.
    pub fn gamma_roots(&self) -> Option<(f64, f64)> {
        let disc = self.c3 * self.c3 - 4.0 * self.c1 * self.c2;
        if disc < 0.0 {
            return None;
        }
        let s = disc.sqrt();
        Some((
            (self.c3 - s) / (2.0 * self.c1),
            (self.c3 + s) / (2.0 * self.c1),
        ))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Regime {
    /// `c3 <= 0`
    NonPositive,
    /// `0 < c3 < 2 sqrt(c1 c2)`
    Subcritical,
    /// `c3 >= 2 sqrt(c1 c2)`
    Supercritical,
}

/// Which `k2` constant to use in the subcritical arctan bound.
///
/// `TheoremK2` uses `-c3 / sqrt(4 c1 c2 - c3^2)` and bounds the whole
/// integral over `(0, inf)` of the comparison system; `LemmaK2` uses
/// `(2 c1 - c3) / sqrt(4 c1 c2 - c3^2)` and bounds the time to reach `V = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum K2Variant {
    TheoremK2,
    #[default]
    LemmaK2,
}

/// A closed-form time value plus whether it is usable as an upper bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeBound {
    pub value: f64,
    pub valid: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceEstimate {
    pub domain_level: f64,
    pub time_bound: f64,
    pub regime: Regime,
    pub valid: bool,
}

pub fn classify_regime(p: &FxtsParams) -> Result<Regime> {
    p.validate()?;
    Ok(if p.c3 <= 0.0 {
        Regime::NonPositive
    } else if p.c3 < p.critical_c3() {
        Regime::Subcritical
    } else {
        Regime::Supercritical
    })
}

/// Sublevel value of V defining the convergence domain.
pub fn domain_bound(p: &FxtsParams) -> Result<f64> {
    Ok(match classify_regime(p)? {
        Regime::NonPositive => 0.0,
        Regime::Subcritical => p.c3 / p.critical_c3(),
        Regime::Supercritical => {
            let (_, b) = p.gamma_roots().unwrap_or((0.0, p.c3 / (2.0 * p.c1)));
            p.k * b.powf(p.mu)
        }
    })
}

fn subcritical_bound(p: &FxtsParams, variant: K2Variant) -> f64 {
    let disc = 4.0 * p.c1 * p.c2 - p.c3 * p.c3;
    let k1 = (disc / (4.0 * p.c1 * p.c1)).sqrt();
    let k2 = match variant {
        K2Variant::TheoremK2 => -p.c3 / disc.sqrt(),
        K2Variant::LemmaK2 => (2.0 * p.c1 - p.c3) / disc.sqrt(),
    };
    p.mu / (p.c1 * k1) * (FRAC_PI_2 - k2.atan())
}

fn supercritical_bound(p: &FxtsParams) -> Result<TimeBound> {
    let (a, b) = p
        .gamma_roots()
        .unwrap_or((p.c3 / (2.0 * p.c1), p.c3 / (2.0 * p.c1)));
    let num = p.k * b - b;
    let den = p.k * b - a;
    if !(num > 0.0) || !(den > 0.0) {
        return Err(Error::DegenerateBound(format!(
            "log argument ({num})/({den}) is not positive"
        )));
    }
    let gap = b - a;
    let value = if gap <= 1e-12 * b.abs().max(1.0) {
        // limit of log(1 - gap/den)/gap as the roots coincide
        -p.mu / (p.c1 * den)
    } else {
        p.mu / (p.c1 * gap) * (num / den).ln()
    };
    if !value.is_finite() {
        return Err(Error::DegenerateBound(format!("bound evaluates to {value}")));
    }
    Ok(TimeBound {
        value,
        valid: value > 0.0,
    })
}

/// Closed-form upper bound on the time to reach the convergence domain.
///
/// In the supercritical case the printed expression is returned as is;
/// it is negative whenever the two roots differ, so `valid` is false and
/// [`numeric_settling_time`] should be used instead.
pub fn settling_time_bound(p: &FxtsParams, variant: K2Variant) -> Result<TimeBound> {
    match classify_regime(p)? {
        Regime::NonPositive => Ok(TimeBound {
            value: p.mu * PI / (2.0 * (p.c1 * p.c2).sqrt()),
            valid: true,
        }),
        Regime::Subcritical => Ok(TimeBound {
            value: subcritical_bound(p, variant),
            valid: true,
        }),
        Regime::Supercritical => supercritical_bound(p),
    }
}

/// Closed-form bound on `I = int_{V0}^{Vbar} dV / (-c1 V^a1 - c2 V^a2 + c3)`.
///
/// `Vbar` is 1 in the subcritical case and `k b^mu` in the supercritical case;
/// `v0` must not lie below it.
pub fn lemma3_integral_bound(p: &FxtsParams, v0: f64) -> Result<TimeBound> {
    match classify_regime(p)? {
        Regime::NonPositive => settling_time_bound(p, K2Variant::LemmaK2),
        Regime::Subcritical => {
            if !(v0 >= 1.0) {
                return Err(Error::Precondition(format!(
                    "subcritical integral bound needs V0 >= 1, got {v0}"
                )));
            }
            Ok(TimeBound {
                value: subcritical_bound(p, K2Variant::LemmaK2),
                valid: true,
            })
        }
        Regime::Supercritical => {
            let floor = domain_bound(p)?;
            if !(v0 >= floor) {
                return Err(Error::Precondition(format!(
                    "supercritical integral bound needs V0 >= {floor}, got {v0}"
                )));
            }
            supercritical_bound(p)
        }
    }
}

/// Settings for the fixed-step scalar ODE oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleOptions {
    pub dt: f64,
    /// Event localization tolerance on V.
    pub v_tol: f64,
    /// Integration horizon before reporting a timeout.
    pub horizon: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            dt: 1e-4,
            v_tol: 1e-10,
            horizon: 1e3,
        }
    }
}

fn rk4(p: &FxtsParams, v: f64, h: f64) -> f64 {
    let k1 = p.rate(v);
    let k2 = p.rate(v + 0.5 * h * k1);
    let k3 = p.rate(v + 0.5 * h * k2);
    let k4 = p.rate(v + h * k3);
    v + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
}

/// First time the integrated `V(t)` reaches `target`, starting from `v0`.
pub fn time_to_level(p: &FxtsParams, v0: f64, target: f64, opts: &OracleOptions) -> Result<f64> {
    p.validate()?;
    if !(opts.dt > 0.0) {
        return Err(Error::param("dt", "must be positive"));
    }
    if v0 <= target {
        return Ok(0.0);
    }
    let mut t = 0.0;
    let mut v = v0;
    let max_steps = (opts.horizon / opts.dt).ceil() as u64;
    for _ in 0..max_steps {
        let next = rk4(p, v, opts.dt);
        if next <= target {
            // bisection on the sub-step length inside the crossing step
            let (mut lo, mut hi) = (0.0, opts.dt);
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let vm = rk4(p, v, mid);
                if (vm - target).abs() <= opts.v_tol {
                    return Ok(t + mid);
                }
                if vm > target {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo <= f64::EPSILON * opts.dt {
                    break;
                }
            }
            return Ok(t + hi);
        }
        v = next;
        t += opts.dt;
    }
    Err(Error::Timeout {
        horizon: opts.horizon,
    })
}

/// Time for the comparison system to enter the convergence domain.
pub fn numeric_settling_time(p: &FxtsParams, v0: f64, opts: &OracleOptions) -> Result<f64> {
    let level = domain_bound(p)?;
    time_to_level(p, v0, level, opts)
}

/// The `c3` contribution `L * |phi|_inf` of a bounded additive disturbance.
pub fn robust_margin(grad_bound: f64, phi_inf: f64) -> f64 {
    debug_assert!(grad_bound >= 0.0 && phi_inf >= 0.0);
    grad_bound.max(0.0) * phi_inf.max(0.0)
}

pub fn convergence_estimate(p: &FxtsParams, variant: K2Variant) -> Result<ConvergenceEstimate> {
    let regime = classify_regime(p)?;
    let domain_level = domain_bound(p)?;
    let (time_bound, valid) = match settling_time_bound(p, variant) {
        Ok(tb) => (tb.value, tb.valid),
        Err(Error::DegenerateBound(_)) => (f64::INFINITY, false),
        Err(e) => return Err(e),
    };
    Ok(ConvergenceEstimate {
        domain_level,
        time_bound,
        regime,
        valid,
    })
}

/// Classical fixed-time bound for `dV/dt <= -a V^p - b V^q`, `0 < p < 1 < q`.
pub fn nominal_fixed_time_bound(a: f64, b: f64, p: f64, q: f64) -> f64 {
    1.0 / (a * (1.0 - p)) + 1.0 / (b * (q - 1.0))
}

/// Comparison of the supercritical closed form against the ODE oracle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SupercriticalDiagnosis {
    pub closed_form: f64,
    /// Infinite when the oracle did not reach the level within its horizon.
    pub oracle_time: f64,
    /// True only when the closed form is positive and not below the oracle.
    pub valid: bool,
}

pub fn diagnose_supercritical(
    p: &FxtsParams,
    v0: f64,
    opts: &OracleOptions,
) -> Result<SupercriticalDiagnosis> {
    if classify_regime(p)? != Regime::Supercritical {
        return Err(Error::Precondition("parameters are not supercritical".into()));
    }
    let closed_form = match supercritical_bound(p) {
        Ok(tb) => tb.value,
        Err(Error::DegenerateBound(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    let oracle_time = match numeric_settling_time(p, v0, opts) {
        Err(Error::Timeout { .. }) => f64::INFINITY,
        other => other?,
    };
    let valid = closed_form.is_finite() && closed_form > 0.0 && closed_form >= oracle_time;
    Ok(SupercriticalDiagnosis {
        closed_form,
        oracle_time,
        valid,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre (5 points) over `[a, b]`, refined until stable.
    fn quad(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        const X: [f64; 5] = [
            0.0,
            -0.538_469_310_105_683,
            0.538_469_310_105_683,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
            0.236_926_885_056_189,
        ];
        let eval = |n: usize| {
            let h = (b - a) / n as f64;
            (0..n)
                .map(|i| {
                    let m = a + (i as f64 + 0.5) * h;
                    X.iter()
                        .zip(W)
                        .map(|(x, w)| w * f(m + 0.5 * h * x))
                        .sum::<f64>()
                        * 0.5
                        * h
                })
                .sum::<f64>()
        };
        let mut n = 64;
        let mut prev = eval(n);
        loop {
            n *= 2;
            let cur = eval(n);
            if (cur - prev).abs() <= 1e-12 * cur.abs().max(1.0) || n > 1 << 20 {
                return cur;
            }
            prev = cur;
        }
    }

    /// `mu * int_lo^inf dw / (c1 w^2 - c3 w + c2)` via `w = tan(s)`.
    fn arctan_integral(p: &FxtsParams, w_lo: f64) -> f64 {
        let g = |w: f64| p.c1 * w * w - p.c3 * w + p.c2;
        p.mu * quad(
            |s| {
                let w = s.tan();
                (1.0 + w * w) / g(w)
            },
            w_lo.atan(),
            FRAC_PI_2,
        )
    }

    fn p(c1: f64, c2: f64, c3: f64, mu: f64) -> FxtsParams {
        FxtsParams::new(c1, c2, c3, mu).unwrap()
    }

    #[test]
    fn regimes() {
        assert_eq!(classify_regime(&p(1.0, 1.0, 0.0, 2.0)).unwrap(), Regime::NonPositive);
        assert_eq!(classify_regime(&p(1.0, 1.0, 1.0, 2.0)).unwrap(), Regime::Subcritical);
        assert_eq!(classify_regime(&p(1.0, 1.0, 2.5, 2.0)).unwrap(), Regime::Supercritical);
        assert_eq!(classify_regime(&p(1.0, 1.0, 2.0, 2.0)).unwrap(), Regime::Supercritical);
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(FxtsParams::new(0.0, 1.0, 0.0, 2.0).is_err());
        assert!(FxtsParams::new(1.0, -1.0, 0.0, 2.0).is_err());
        assert!(FxtsParams::new(1.0, 1.0, 0.0, 1.0).is_err());
        assert!(FxtsParams::with_margin(1.0, 1.0, 0.0, 2.0, 1.0).is_err());
        let raw = FxtsParams {
            c1: 1.0,
            c2: 1.0,
            c3: 0.0,
            mu: 0.5,
            k: 1.05,
        };
        assert!(matches!(
            classify_regime(&raw),
            Err(Error::InvalidParameter { name: "mu", .. })
        ));
    }

    #[test]
    fn domain_levels() {
        assert_eq!(domain_bound(&p(1.0, 1.0, 0.0, 2.0)).unwrap(), 0.0);
        assert!((domain_bound(&p(1.0, 1.0, 1.0, 2.0)).unwrap() - 0.5).abs() < 1e-15);
        let sup = FxtsParams::with_margin(1.0, 1.0, 2.5, 2.0, 1.05).unwrap();
        assert!((domain_bound(&sup).unwrap() - 4.2).abs() < 1e-12);
    }

    #[test]
    fn closed_form_values() {
        let np = settling_time_bound(&p(1.0, 1.0, 0.0, 2.0), K2Variant::LemmaK2).unwrap();
        assert!((np.value - PI).abs() < 1e-12);
        // k1 = sqrt(3)/2, k2 = -+1/sqrt(3): 2/k1 * (pi/2 +- pi/6)
        let th = settling_time_bound(&p(1.0, 1.0, 1.0, 2.0), K2Variant::TheoremK2).unwrap();
        let lm = settling_time_bound(&p(1.0, 1.0, 1.0, 2.0), K2Variant::LemmaK2).unwrap();
        assert!((th.value - 4.836_798).abs() < 1e-5, "{}", th.value);
        assert!((lm.value - 2.418_399).abs() < 1e-5, "{}", lm.value);
    }

    #[test]
    fn closed_forms_match_quadrature() {
        for &(c1, c2, c3, mu) in &[
            (1.0, 1.0, 1.0, 2.0),
            (0.3, 4.0, 1.5, 5.0),
            (7.0, 0.2, -0.4, 1.7),
            (2.0, 2.0, 3.9, 3.0),
        ] {
            let q = p(c1, c2, c3, mu);
            let th = settling_time_bound(&q, K2Variant::TheoremK2).unwrap().value;
            let lm = settling_time_bound(&q, K2Variant::LemmaK2).unwrap().value;
            let full = arctan_integral(&q, 0.0);
            let tail = arctan_integral(&q, 1.0);
            if c3 > 0.0 {
                assert!((th - full).abs() < 1e-8 * full, "{th} vs {full}");
                assert!((lm - tail).abs() < 1e-8 * tail, "{lm} vs {tail}");
            } else {
                // mu*pi/(2 sqrt(c1 c2)) is the c3 = 0 integral, an upper bound for c3 < 0
                assert!(full <= th + 1e-9);
            }
        }
    }

    #[test]
    fn lemma3_bound_dominates_quadrature() {
        let q = p(1.0, 1.0, 1.0, 2.0);
        let at_one = lemma3_integral_bound(&q, 1.0).unwrap();
        assert!(at_one.value >= 0.0 && at_one.valid);
        let integrand = |v: f64| 1.0 / (q.c1 * v.powf(q.a1()) + q.c2 * v.powf(q.a2()) - q.c3);
        // I over [1, 1] is empty
        assert_eq!(quad(integrand, 1.0, 1.0), 0.0);
        let i100 = quad(integrand, 1.0, 100.0);
        let bound = lemma3_integral_bound(&q, 100.0).unwrap();
        assert!(i100 <= bound.value + 1e-8, "{i100} > {}", bound.value);
        assert!(matches!(
            lemma3_integral_bound(&q, 0.5),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn supercritical_case_is_flagged() {
        let q = FxtsParams::with_margin(1.0, 1.0, 2.5, 2.0, 1.05).unwrap();
        let tb = lemma3_integral_bound(&q, 10.0).unwrap();
        // mu/(b-a) * ln((kb-b)/(kb-a)) with a = 0.5, b = 2
        let expect = 2.0 / 1.5 * (0.1f64 / 1.6).ln();
        assert!((tb.value - expect).abs() < 1e-12);
        assert!(!tb.valid);
        let level = domain_bound(&q).unwrap();
        let oracle = time_to_level(&q, 10.0, level, &OracleOptions::default()).unwrap();
        let integrand = |v: f64| 1.0 / (q.c1 * v.powf(q.a1()) + q.c2 * v.powf(q.a2()) - q.c3);
        let reference = quad(integrand, level, 10.0);
        assert!((oracle - reference).abs() < 1e-6, "{oracle} vs {reference}");
        assert!(lemma3_integral_bound(&q, 4.0).is_err());
    }

    #[test]
    fn repeated_roots_use_limit() {
        let q = FxtsParams::with_margin(1.0, 1.0, 2.0, 2.0, 1.5).unwrap();
        let tb = settling_time_bound(&q, K2Variant::LemmaK2).unwrap();
        // a = b = 1: -mu / (c1 (k b - a)) = -2 / 0.5
        assert!((tb.value + 4.0).abs() < 1e-9);
        assert!(!tb.valid);
    }

    #[test]
    fn oracle_examples() {
        let opts = OracleOptions::default();
        assert_eq!(numeric_settling_time(&p(1.0, 1.0, 1.0, 2.0), 0.5, &opts).unwrap(), 0.0);
        let t0 = numeric_settling_time(&p(1.0, 1.0, 0.0, 2.0), 100.0, &opts).unwrap();
        assert!(t0 > 0.0 && t0 <= PI, "{t0}");
        let t1 = numeric_settling_time(&p(1.0, 1.0, 1.0, 2.0), 10.0, &opts).unwrap();
        assert!(t1 > 0.0 && t1 <= 4.836_798, "{t1}");
    }

    #[test]
    fn oracle_matches_quadrature_of_travel_time() {
        let q = p(2.0, 0.5, 0.3, 3.0);
        let level = domain_bound(&q).unwrap();
        let t = numeric_settling_time(&q, 50.0, &OracleOptions::default()).unwrap();
        let integrand = |v: f64| 1.0 / (q.c1 * v.powf(q.a1()) + q.c2 * v.powf(q.a2()) - q.c3);
        let reference = quad(integrand, level, 50.0);
        assert!((t - reference).abs() < 1e-6, "{t} vs {reference}");
    }

    /// The domain level is an equilibrium when `c1 V^a1 = c2 V^a2 = c3/2`
    /// there; the oracle then never enters the domain.
    #[test]
    fn tangent_equilibrium_times_out() {
        let q = p(4.0, 1.0, 1.0, 2.0);
        assert!((domain_bound(&q).unwrap() - 0.25).abs() < 1e-15);
        assert!(q.rate(0.25).abs() < 1e-15);
        let opts = OracleOptions {
            horizon: 50.0,
            ..Default::default()
        };
        assert!(matches!(
            numeric_settling_time(&q, 10.0, &opts),
            Err(Error::Timeout { .. })
        ));
    }

    #[test]
    fn reduces_to_nominal_bound() {
        for &(c1, c2, mu) in &[(1.0, 1.0, 2.0), (0.2, 3.0, 4.0), (9.0, 0.4, 1.5)] {
            let q = p(c1, c2, 0.0, mu);
            let tb = settling_time_bound(&q, K2Variant::TheoremK2).unwrap().value;
            // V^a2 carries c2, V^a1 carries c1
            let nominal = nominal_fixed_time_bound(c2, c1, q.a2(), q.a1());
            assert!((nominal - (mu / c1 + mu / c2)).abs() < 1e-12);
            assert!(tb <= nominal);
            let t = numeric_settling_time(&q, 1e3, &OracleOptions::default()).unwrap();
            assert!(t <= tb);
        }
    }

    #[test]
    fn regime_boundary_continuity() {
        let (c1, c2, mu, k) = (2.0, 0.5, 3.0, 1.05);
        let crit = 2.0 * (c1 * c2 as f64).sqrt();
        let below = FxtsParams::with_margin(c1, c2, crit * (1.0 - 1e-9), mu, k).unwrap();
        assert!((domain_bound(&below).unwrap() - 1.0).abs() < 1e-8);
        let at = FxtsParams::with_margin(c1, c2, crit, mu, k).unwrap();
        let expect = k * (c2 / c1).sqrt().powf(mu);
        assert!((domain_bound(&at).unwrap() - expect).abs() < 1e-12);
    }

    #[test]
    fn margin_is_product() {
        assert_eq!(robust_margin(2.0, 3.0), 6.0);
        assert_eq!(robust_margin(0.0, 5.0), 0.0);
    }
}

mod common;

use common::quad;
use fxts_overtake::fxts::{
    classify_regime, diagnose_supercritical, domain_bound, lemma3_integral_bound,
    numeric_settling_time, settling_time_bound, FxtsParams, K2Variant, OracleOptions, Regime,
};
use proptest::prelude::*;

/// Distance of the convergence level from the tangent family on which it is
/// an equilibrium of the comparison system.
fn tangency_gap(p: &FxtsParams) -> f64 {
    let d = domain_bound(p).unwrap();
    let net = p.c1 * d.powf(p.a1()) + p.c2 * d.powf(p.a2()) - p.c3;
    net / p.c3.abs().max(1e-12)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn oracle_never_exceeds_theorem_bound(
        c1 in 0.1f64..10.0,
        c2 in 0.1f64..10.0,
        frac in -1.0f64..0.999,
        mu in 1.5f64..10.0,
        t in 0.0f64..1.0,
    ) {
        let crit = 2.0 * (c1 * c2).sqrt();
        let p = FxtsParams::new(c1, c2, frac * crit, mu).unwrap();
        prop_assume!(p.c3 <= 0.0 || tangency_gap(&p) > 1e-2);
        let d = domain_bound(&p).unwrap();
        let lo = (d * 1.01).max(1e-3);
        let v0 = lo + t * (1e3 - lo);
        let bound = settling_time_bound(&p, K2Variant::TheoremK2).unwrap();
        let time = numeric_settling_time(&p, v0, &OracleOptions::default()).unwrap();
        prop_assert!(bound.valid);
        prop_assert!(time <= bound.value, "{time} > {}", bound.value);
    }

    #[test]
    fn domain_nondecreasing_in_c3(
        c1 in 0.1f64..10.0,
        c2 in 0.1f64..10.0,
        mu in 1.5f64..10.0,
        x in -5.0f64..20.0,
        dx in 0.0f64..5.0,
    ) {
        let a = FxtsParams::new(c1, c2, x, mu).unwrap();
        let b = FxtsParams::new(c1, c2, x + dx, mu).unwrap();
        prop_assert!(domain_bound(&a).unwrap() <= domain_bound(&b).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn lemma_bound_dominates_quadrature(
        c1 in 0.1f64..10.0,
        c2 in 0.1f64..10.0,
        frac in 0.01f64..0.99,
        mu in 1.5f64..10.0,
        v0 in 1.0f64..1e3,
    ) {
        let p = FxtsParams::new(c1, c2, frac * 2.0 * (c1 * c2).sqrt(), mu).unwrap();
        let integral = quad(
            |v| 1.0 / (p.c1 * v.powf(p.a1()) + p.c2 * v.powf(p.a2()) - p.c3),
            1.0,
            v0,
        );
        let bound = lemma3_integral_bound(&p, v0).unwrap().value;
        prop_assert!(integral <= bound + 1e-8, "{integral} > {bound}");
    }
}

#[test]
fn regime_examples() {
    let r = |c3| classify_regime(&FxtsParams::new(1.0, 1.0, c3, 2.0).unwrap()).unwrap();
    assert_eq!(r(0.0), Regime::NonPositive);
    assert_eq!(r(1.0), Regime::Subcritical);
    assert_eq!(r(2.0), Regime::Supercritical);
    assert_eq!(r(2.5), Regime::Supercritical);
}

#[test]
fn supercritical_flag_matches_oracle() {
    let mut rng = common::rng(7);
    use rand::Rng;
    for _ in 0..20 {
        let c1: f64 = rng.random_range(0.1..10.0);
        let c2: f64 = rng.random_range(0.1..10.0);
        let c3 = 2.0 * (c1 * c2).sqrt() * rng.random_range(1.01..3.0);
        let p = FxtsParams::new(c1, c2, c3, rng.random_range(1.5..10.0)).unwrap();
        let v0 = domain_bound(&p).unwrap() * 10.0;
        let opts = OracleOptions {
            horizon: 1e4,
            ..Default::default()
        };
        let d = diagnose_supercritical(&p, v0, &opts).unwrap();
        let expect = d.closed_form > 0.0 && d.closed_form >= d.oracle_time;
        assert_eq!(d.valid, expect);
    }
}

mod common;

use std::f64::consts::{PI, TAU};

use common::*;
use toricost_core::quadrature::bessel_j0;
use toricost_core::{
    make_cost, oracle, periodicity_cost, periodicity_cost_quadrature, SystemParams, TimeVector,
};

const TIMES: [f64; 5] = [0.0, 1.0, PI, TAU, 7.0];

fn within(est: f64, se: f64, truth: f64, k: f64) -> bool {
    (est - truth).abs() <= k * se + 1e-9 * truth.abs().max(1.0)
}

#[test]
fn library_oracles_agree_with_independent_ones() {
    let p = SystemParams::default();
    for &t in &TIMES {
        let tv = TimeVector::new(vec![t]);
        let a = oracle("s2-spin", &p, &tv).unwrap().unwrap();
        assert!(
            (a - sphere_rotation_oracle(t)).abs() < 1e-10,
            "s2-spin t={t}"
        );
        let a = oracle("s2-spin-halfspeed", &p, &tv).unwrap().unwrap();
        assert!((a - sphere_rotation_oracle(t / 2.0)).abs() < 1e-10);
        let a = oracle("t2-cos", &p, &tv).unwrap().unwrap();
        assert!(
            (a - 8.0 * PI * PI * (1.0 - j0_series(t))).abs() < 1e-9,
            "t2-cos t={t}"
        );
        for eps in [0.0, 0.1, 0.3] {
            let q = SystemParams::default().with("epsilon", eps);
            let a = oracle("s2-spin-perturbed", &q, &tv).unwrap().unwrap();
            assert!(
                (a - perturbed_oracle(eps, t)).abs() < 1e-7,
                "perturbed eps={eps} t={t}"
            );
        }
    }
    for x in [0.0, 0.5, 1.0, 2.404825557695773, 5.0, 10.0] {
        assert!((bessel_j0(x) - j0_series(x)).abs() < 1e-12, "J0({x})");
    }
}

#[test]
fn estimates_match_oracles() {
    let cfg = cfg();
    for id in [
        "s2-spin",
        "s2-spin-halfspeed",
        "s2-spin-perturbed",
        "s2-xspin",
        "t2-cos",
    ] {
        let s = sys(id);
        let c = make_cost("chordal-sq", &s.chart).unwrap();
        for &t in &TIMES {
            let tv = TimeVector::new(vec![t]);
            let truth = oracle(id, &SystemParams::default(), &tv).unwrap().unwrap();
            let e = periodicity_cost(&s, &tv, &c, 20_000, 11, &cfg).unwrap();
            assert!(
                within(e.value, e.std_error, truth, 4.0),
                "{id} t={t}: {} ± {} vs {truth}",
                e.value,
                e.std_error
            );
        }
    }
}

#[test]
fn product_oracle_is_additive() {
    let s = sys("s2xs2-toric");
    let c = make_cost("chordal-sq", &s.chart).unwrap();
    for t in [
        [0.0, 0.0],
        [1.0, 0.0],
        [PI, 2.0],
        [TAU, 1.0],
        [TAU, TAU],
        [7.0, -3.0],
    ] {
        let tv = TimeVector::new(t.to_vec());
        let truth = 4.0 * PI * (sphere_rotation_oracle(t[0]) + sphere_rotation_oracle(t[1]));
        let lib = oracle("s2xs2-toric", &SystemParams::default(), &tv)
            .unwrap()
            .unwrap();
        assert!((lib - truth).abs() < 1e-9);
        let e = periodicity_cost(&s, &tv, &c, 20_000, 3, &cfg()).unwrap();
        assert!(
            within(e.value, e.std_error, truth, 4.0),
            "{t:?}: {} vs {truth}",
            e.value
        );
    }
}

#[test]
fn three_sigma_coverage() {
    // a 3σ interval should contain the truth about 99.7% of the time
    let s = sys("s2-spin");
    let c = make_cost("chordal-sq", &s.chart).unwrap();
    let tv = TimeVector::new(vec![1.0]);
    let truth = sphere_rotation_oracle(1.0);
    let hits = (0..100u64)
        .filter(|&seed| {
            let e = periodicity_cost(&s, &tv, &c, 1_000, seed, &cfg()).unwrap();
            (e.value - truth).abs() <= 3.0 * e.std_error
        })
        .count();
    assert!(hits >= 95, "{hits}/100 intervals cover the truth");
}

#[test]
fn cost_is_even_in_time() {
    let cfg = cfg();
    for id in ["s2-spin", "s2-spin-perturbed", "t2-cos", "s2-xspin"] {
        let s = sys(id);
        let c = make_cost("chordal", &s.chart).unwrap();
        for t in [0.3, 2.0, 5.5] {
            let a = periodicity_cost(&s, &TimeVector::new(vec![t]), &c, 20_000, 8, &cfg).unwrap();
            let b = periodicity_cost(&s, &TimeVector::new(vec![-t]), &c, 20_000, 8, &cfg).unwrap();
            let se = a.std_error.hypot(b.std_error);
            assert!((a.value - b.value).abs() <= 5.0 * se + 1e-12, "{id} t={t}");
        }
    }
}

#[test]
fn quadrature_cross_check() {
    let cfg = cfg();
    for (id, t) in [("s2-spin", PI), ("s2-spin-perturbed", TAU), ("t2-cos", 2.0)] {
        let s = sys(id);
        let c = make_cost("chordal-sq", &s.chart).unwrap();
        let tv = TimeVector::new(vec![t]);
        let truth = oracle(id, &SystemParams::default(), &tv).unwrap().unwrap();
        let q = periodicity_cost_quadrature(&s, &tv, &c, 400, &cfg).unwrap();
        assert!((q - truth).abs() < 2e-3 * truth, "{id}: {q} vs {truth}");
    }
}

#[test]
fn brute_force_sphere_rotation() {
    let (v, se) = sphere_rotation_brute_force(PI, 1_000_000, 99);
    assert!((v - 32.0 * PI / 3.0).abs() < 4.0 * se, "{v} ± {se}");
}

//! The two-rarefaction wavespeed estimate against an exact Riemann solver.

mod common;

use magep::eos::Eos;
use magep::hyperbolic::wavespeed::max_wavespeed;
use magep::State64;
use proptest::prelude::*;

use common::{exact_max_wavespeed, star_pressure, Side};

fn state(gamma: f64, b: f64, s: &Side) -> State64 {
    let eps = s.p * (1.0 - b * s.rho) / (gamma - 1.0);
    State64::new(s.rho, [s.rho * s.v, 0.0], eps + 0.5 * s.rho * s.v * s.v)
}

#[test]
fn sod_star_pressure() {
    let l = Side { rho: 1.0, v: 0.0, p: 1.0 };
    let r = Side { rho: 0.125, v: 0.0, p: 0.1 };
    let p = star_pressure(1.4, 0.0, &l, &r);
    assert!((p - 0.30313).abs() < 1e-5, "p* = {p}");
}

#[test]
fn symmetric_collision_is_two_shocks() {
    // Equal and opposite streams stop at the interface; both waves are shocks.
    let l = Side { rho: 1.0, v: 1.0, p: 1.0 };
    let r = Side { rho: 1.0, v: -1.0, p: 1.0 };
    let p = star_pressure(1.4, 0.0, &l, &r);
    assert!(p > 1.0);
    let lambda = exact_max_wavespeed(1.4, 0.0, &l, &r);
    let est = max_wavespeed(&Eos::Covolume { gamma: 1.4, b: 0.0 }, &state(1.4, 0.0, &l), &state(1.4, 0.0, &r), [1.0, 0.0]).unwrap();
    assert!(est >= lambda * (1.0 - 1e-12), "{est} < {lambda}");
}

#[test]
fn vacuum_forming_rarefactions() {
    let l = Side { rho: 1.0, v: -10.0, p: 0.1 };
    let r = Side { rho: 1.0, v: 10.0, p: 0.1 };
    assert_eq!(star_pressure(1.4, 0.0, &l, &r), 0.0);
}

proptest! {
    #[test]
    fn estimate_bounds_exact_speed(
        gamma in 1.01f64..=5.0 / 3.0,
        b in 0.0f64..0.5,
        (rl, rr) in (0.01f64..1.8, 0.01f64..1.8),
        (vl, vr) in (-3.0f64..3.0, -3.0f64..3.0),
        (pl, pr) in (0.01f64..10.0, 0.01f64..10.0),
    ) {
        let cap = 0.9 / b.max(1e-12);
        let l = Side { rho: rl.min(cap), v: vl, p: pl };
        let r = Side { rho: rr.min(cap), v: vr, p: pr };
        let eos = Eos::Covolume { gamma, b };
        let est = max_wavespeed(&eos, &state(gamma, b, &l), &state(gamma, b, &r), [1.0, 0.0]).unwrap();
        let exact = exact_max_wavespeed(gamma, b, &l, &r);
        prop_assert!(est >= exact * (1.0 - 1e-12), "estimate {} below exact {}", est, exact);
    }
}

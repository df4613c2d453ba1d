//! Upper bounds on the maximum wavespeed of one-dimensional Riemann problems.

use crate::eos::{Eos, Primitive};
use crate::scalar::{dot, Real, Vec2};

/// Node data reused by every pair the node takes part in.
#[derive(Clone, Copy, Debug, Default)]
pub struct WaveData<T> {
    pub rho: T,
    pub v: Vec2<T>,
    pub p: T,
    pub c: T,
    /// `c (1 − bρ)`
    pub cb: T,
    /// `p^{−(γ−1)/(2γ)}`
    pub p_pow: T,
}

impl<T: Real> WaveData<T> {
    pub fn new(eos: &Eos<T>, w: &Primitive<T>) -> Self {
        match *eos {
            Eos::Covolume { gamma, b } => {
                let e1 = (gamma - T::one()) / (T::lit(2.0) * gamma);
                Self {
                    rho: w.rho,
                    v: w.v,
                    p: w.p,
                    c: w.c,
                    cb: w.c * (T::one() - b * w.rho),
                    p_pow: w.p.powf(-e1),
                }
            }
            Eos::Isothermal { .. } => Self {
                rho: w.rho,
                v: w.v,
                p: w.p,
                c: w.c,
                cb: w.c,
                p_pow: T::one(),
            },
        }
    }
}

/// `x^e`, through repeated multiplication when `e` is a small integer
/// (γ = 7/5 gives 7).
#[inline]
fn pow_exponent<T: Real>(x: T, e: T) -> T {
    let r = e.round();
    if (e - r).abs() <= T::lit(1e-12) * e && r >= T::one() && r <= T::lit(64.0) {
        x.powi(r.to_i32().unwrap_or(1))
    } else {
        x.powf(e)
    }
}

/// Two-rarefaction bound for the covolume closure.
pub fn lambda_covolume<T: Real>(gamma: T, l: &WaveData<T>, r: &WaveData<T>, n: Vec2<T>) -> T {
    let one = T::one();
    let two = T::lit(2.0);
    let vl = dot(l.v, n);
    let vr = dot(r.v, n);
    let num = l.cb + r.cb - (gamma - one) / two * (vr - vl);
    let den = l.cb * l.p_pow + r.cb * r.p_pow;
    let p_star = pow_exponent(num.pos() / den, two * gamma / (gamma - one));
    let k = (gamma + one) / (two * gamma);
    let lam1 = vl - l.c * (one + k * ((p_star - l.p) / l.p).pos()).sqrt();
    let lam3 = vr + r.c * (one + k * ((p_star - r.p) / r.p).pos()).sqrt();
    lam1.neg_part().max(lam3.pos())
}

/// `max{|v_L·n|, |v_R·n|} + max{c_L, c_R}`
pub fn lambda_barotropic<T: Real>(l: &WaveData<T>, r: &WaveData<T>, n: Vec2<T>) -> T {
    dot(l.v, n).abs().max(dot(r.v, n).abs()) + l.c.max(r.c)
}

#[inline]
pub fn lambda_max<T: Real>(eos: &Eos<T>, l: &WaveData<T>, r: &WaveData<T>, n: Vec2<T>) -> T {
    match *eos {
        Eos::Covolume { gamma, .. } => lambda_covolume(gamma, l, r, n),
        Eos::Isothermal { .. } => lambda_barotropic(l, r, n),
    }
}

/// Wavespeed bound from conserved states, validating admissibility.
pub fn max_wavespeed<T: Real>(
    eos: &Eos<T>,
    ul: &crate::eos::State<T>,
    ur: &crate::eos::State<T>,
    n: Vec2<T>,
) -> Result<T, crate::error::EosError> {
    let l = WaveData::new(eos, &eos.primitive(ul)?);
    let r = WaveData::new(eos, &eos.primitive(ur)?);
    Ok(lambda_max(eos, &l, &r, n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eos::State;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn ideal() -> Eos<f64> {
        Eos::Covolume { gamma: 1.4, b: 0.0 }
    }

    fn prim_state(rho: f64, v: [f64; 2], p: f64) -> State<f64> {
        let e = p / (0.4 * rho);
        State::new(rho, [rho * v[0], rho * v[1]], rho * e + 0.5 * rho * (v[0] * v[0] + v[1] * v[1]))
    }

    #[test]
    fn equal_states_at_rest() {
        let u = prim_state(1.0, [0.0, 0.0], 1.0);
        let l = max_wavespeed(&ideal(), &u, &u, [1.0, 0.0]).unwrap();
        assert_relative_eq!(l, 1.4f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn uniform_supersonic_flow() {
        let u = prim_state(1.0, [3.0, 0.0], 1.0);
        let l = max_wavespeed(&ideal(), &u, &u, [1.0, 0.0]).unwrap();
        assert_relative_eq!(l, 3.0 + 1.4f64.sqrt(), max_relative = 1e-14);
    }

    #[test]
    fn barotropic_examples() {
        let eos = Eos::Isothermal { theta: 1.0 };
        let u = State::new(2.0, [0.0, 0.0], 0.0);
        assert_eq!(max_wavespeed(&eos, &u, &u, [0.0, 1.0]).unwrap(), 1.0);
        let cold = Eos::Isothermal { theta: 0.0 };
        let a = State::new(1.0, [2.0, 0.0], 0.0);
        let b = State::new(1.0, [-3.0, 0.0], 0.0);
        assert_eq!(max_wavespeed(&cold, &a, &b, [1.0, 0.0]).unwrap(), 3.0);
        assert!(max_wavespeed(&cold, &State::new(0.0, [0.0; 2], 0.0), &a, [1.0, 0.0]).is_err());
    }

    proptest! {
        #[test]
        fn barotropic_bound_dominates_velocities(r1 in 0.01f64..10.0, r2 in 0.01f64..10.0,
                                                 m in proptest::array::uniform4(-5.0f64..5.0),
                                                 t in 0.0f64..6.3, th in 0.0f64..2.0) {
            let eos = Eos::Isothermal { theta: th };
            let a = State::new(r1, [m[0], m[1]], 0.0);
            let b = State::new(r2, [m[2], m[3]], 0.0);
            let n = [t.cos(), t.sin()];
            let l = max_wavespeed(&eos, &a, &b, n).unwrap();
            prop_assert!(l >= dot(a.velocity(), n).abs() && l >= dot(b.velocity(), n).abs());
        }

        #[test]
        fn covolume_bound_is_swap_symmetric(r1 in 0.1f64..5.0, r2 in 0.1f64..5.0,
                                            v in proptest::array::uniform4(-3.0f64..3.0),
                                            p1 in 0.01f64..5.0, p2 in 0.01f64..5.0,
                                            t in 0.0f64..6.3, g in 1.05f64..1.66) {
            let eos = Eos::Covolume { gamma: g, b: 0.05 };
            let mk = |rho: f64, vel: [f64; 2], p: f64| {
                let e = p * (1.0 - 0.05 * rho) / ((g - 1.0) * rho);
                State::new(rho, [rho * vel[0], rho * vel[1]], rho * e + 0.5 * rho * (vel[0] * vel[0] + vel[1] * vel[1]))
            };
            let a = mk(r1, [v[0], v[1]], p1);
            let b = mk(r2, [v[2], v[3]], p2);
            let n = [t.cos(), t.sin()];
            let lab = max_wavespeed(&eos, &a, &b, n).unwrap();
            let lba = max_wavespeed(&eos, &b, &a, [-n[0], -n[1]]).unwrap();
            prop_assert!((lab - lba).abs() <= 1e-12 * lab.max(1.0));
        }
    }
}

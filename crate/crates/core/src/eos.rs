//! Equations of state, fluxes and entropies.

use crate::error::EosError;
use crate::scalar::{dot, norm_sq, Real, Vec2};

/// Closure relation of the fluid.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Eos<T> {
    /// `p (1 - bρ) = (γ - 1) e ρ`, full state `[ρ, m, E]`.
    Covolume { gamma: T, b: T },
    /// `p = θ_T ρ`, barotropic state `[ρ, m]`.
    Isothermal { theta: T },
}

/// Conserved variables at one collocation point. `energy` is the total
/// energy density and stays zero for barotropic closures.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct State<T> {
    pub rho: T,
    pub m: Vec2<T>,
    pub energy: T,
}

impl<T: Real> State<T> {
    pub fn new(rho: T, m: Vec2<T>, energy: T) -> Self {
        Self { rho, m, energy }
    }

    pub fn velocity(&self) -> Vec2<T> {
        [self.m[0] / self.rho, self.m[1] / self.rho]
    }

    pub fn kinetic_energy(&self) -> T {
        norm_sq(self.m) / (T::lit(2.0) * self.rho)
    }

    /// `a·self + b·other`
    pub fn axpby(a: T, x: &Self, b: T, y: &Self) -> Self {
        Self {
            rho: a * x.rho + b * y.rho,
            m: [a * x.m[0] + b * y.m[0], a * x.m[1] + b * y.m[1]],
            energy: a * x.energy + b * y.energy,
        }
    }

    pub fn as_array(&self) -> [T; 4] {
        [self.rho, self.m[0], self.m[1], self.energy]
    }

    pub fn from_array(a: [T; 4]) -> Self {
        Self {
            rho: a[0],
            m: [a[1], a[2]],
            energy: a[3],
        }
    }
}

/// Flux of one state: row `k` is the flux of component `k` in `[ρ, m₁, m₂, E]`.
pub type Flux<T> = [Vec2<T>; 4];

/// Primitive quantities used by the wavespeed estimates.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Primitive<T> {
    pub rho: T,
    pub v: Vec2<T>,
    pub p: T,
    pub c: T,
}

fn inadmissible<T: Real>(rho: T, e: T) -> EosError {
    EosError::Inadmissible {
        rho: rho.as_f64(),
        e: e.as_f64(),
    }
}

impl<T: Real> Eos<T> {
    /// Validates the closure parameters.
    pub fn validate(&self) -> Result<(), EosError> {
        match *self {
            Eos::Covolume { gamma, b } => {
                if !(gamma > T::one() && gamma <= T::lit(5.0 / 3.0) + T::epsilon()) {
                    return Err(EosError::InvalidParameter {
                        name: "gamma",
                        value: gamma.as_f64(),
                    });
                }
                if !(b >= T::zero()) {
                    return Err(EosError::InvalidParameter {
                        name: "b",
                        value: b.as_f64(),
                    });
                }
            }
            Eos::Isothermal { theta } => {
                if !(theta >= T::zero()) {
                    return Err(EosError::InvalidParameter {
                        name: "theta",
                        value: theta.as_f64(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn is_barotropic(&self) -> bool {
        matches!(self, Eos::Isothermal { .. })
    }

    /// Number of conserved components.
    pub fn n_components(&self) -> usize {
        if self.is_barotropic() {
            3
        } else {
            4
        }
    }

    /// `e(u) = E/ρ − |m|²/(2ρ²)` for the covolume closure, `θ_T ln ρ` for the
    /// isothermal one.
    pub fn specific_internal_energy(&self, u: &State<T>) -> Result<T, EosError> {
        if !(u.rho > T::zero()) {
            return Err(inadmissible(u.rho, T::nan()));
        }
        Ok(match *self {
            Eos::Covolume { .. } => u.energy / u.rho - norm_sq(u.m) / (T::lit(2.0) * u.rho * u.rho),
            Eos::Isothermal { theta } => theta * u.rho.ln(),
        })
    }

    /// Admissibility: `ρ > 0`, and in covolume mode `e > 0` and `bρ < 1`.
    pub fn is_admissible(&self, u: &State<T>) -> bool {
        if !(u.rho > T::zero()) {
            return false;
        }
        match *self {
            Eos::Covolume { b, .. } => {
                let e = u.energy / u.rho - norm_sq(u.m) / (T::lit(2.0) * u.rho * u.rho);
                e > T::zero() && b * u.rho < T::one()
            }
            Eos::Isothermal { .. } => u.m[0].is_finite() && u.m[1].is_finite(),
        }
    }

    pub fn check(&self, u: &State<T>) -> Result<(), EosError> {
        if self.is_admissible(u) {
            Ok(())
        } else {
            let e = if self.is_barotropic() {
                T::zero()
            } else {
                u.energy / u.rho - norm_sq(u.m) / (T::lit(2.0) * u.rho * u.rho)
            };
            Err(inadmissible(u.rho, e))
        }
    }

    pub fn pressure(&self, u: &State<T>) -> Result<T, EosError> {
        self.check(u)?;
        Ok(self.pressure_unchecked(u))
    }

    #[inline]
    pub fn pressure_unchecked(&self, u: &State<T>) -> T {
        match *self {
            Eos::Covolume { gamma, b } => {
                let e = u.energy / u.rho - norm_sq(u.m) / (T::lit(2.0) * u.rho * u.rho);
                (gamma - T::one()) * e * u.rho / (T::one() - b * u.rho)
            }
            Eos::Isothermal { theta } => theta * u.rho,
        }
    }

    pub fn sound_speed(&self, u: &State<T>) -> Result<T, EosError> {
        self.check(u)?;
        Ok(self.sound_speed_from(u.rho, self.pressure_unchecked(u)))
    }

    #[inline]
    fn sound_speed_from(&self, rho: T, p: T) -> T {
        match *self {
            Eos::Covolume { gamma, b } => (gamma * p / (rho * (T::one() - b * rho))).sqrt(),
            Eos::Isothermal { theta } => theta.sqrt(),
        }
    }

    pub fn primitive(&self, u: &State<T>) -> Result<Primitive<T>, EosError> {
        self.check(u)?;
        Ok(self.primitive_unchecked(u))
    }

    #[inline]
    pub fn primitive_unchecked(&self, u: &State<T>) -> Primitive<T> {
        let p = self.pressure_unchecked(u);
        Primitive {
            rho: u.rho,
            v: u.velocity(),
            p,
            c: self.sound_speed_from(u.rho, p),
        }
    }

    /// Euler flux of `u`.
    #[inline]
    pub fn flux(&self, u: &State<T>) -> Flux<T> {
        let v = u.velocity();
        let p = self.pressure_unchecked(u);
        let ef = if self.is_barotropic() {
            [T::zero(); 2]
        } else {
            [v[0] * (u.energy + p), v[1] * (u.energy + p)]
        };
        [
            u.m,
            [u.m[0] * v[0] + p, u.m[0] * v[1]],
            [u.m[1] * v[0], u.m[1] * v[1] + p],
            ef,
        ]
    }

    /// Mathematical entropy `η(u)`. Convex, decreasing along admissible
    /// dissipative evolutions.
    pub fn entropy(&self, u: &State<T>) -> Result<T, EosError> {
        self.check(u)?;
        Ok(match *self {
            Eos::Covolume { gamma, b } => {
                let e = u.energy / u.rho - norm_sq(u.m) / (T::lit(2.0) * u.rho * u.rho);
                let s = (e.powf(T::one() / (gamma - T::one())) * (T::one() / u.rho - b)).ln();
                -u.rho * s
            }
            Eos::Isothermal { theta } => {
                norm_sq(u.m) / (T::lit(2.0) * u.rho) + u.rho * theta * u.rho.ln()
            }
        })
    }

    /// Entropy flux `q(u)`.
    pub fn entropy_flux(&self, u: &State<T>) -> Result<Vec2<T>, EosError> {
        let eta = self.entropy(u)?;
        let v = u.velocity();
        let w = match self {
            Eos::Covolume { .. } => eta,
            Eos::Isothermal { .. } => eta + self.pressure_unchecked(u),
        };
        Ok([w * v[0], w * v[1]])
    }

    /// Reflects the normal momentum across a wall with unit normal `n`.
    pub fn mirror(u: &State<T>, n: Vec2<T>) -> State<T> {
        let mn = dot(u.m, n);
        let two = T::lit(2.0);
        State {
            rho: u.rho,
            m: [u.m[0] - two * mn * n[0], u.m[1] - two * mn * n[1]],
            energy: u.energy,
        }
    }
}

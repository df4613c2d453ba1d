//! Initial and exact data for the isentropic vortex and the diocotron
//! annulus.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::eos::{Eos, State};
use crate::error::Error;
use crate::scalar::{Real, Vec2};
use crate::source_update::{solve_gauss_law, PotentialSolver};

/// Translating isentropic vortex on a box, neutralized by a background
/// density equal to the exact density.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VortexParams {
    pub lower: [f64; 2],
    pub upper: [f64; 2],
    /// Translation velocity.
    pub speed: [f64; 2],
    /// Vortex strength.
    pub beta: f64,
    pub center: [f64; 2],
    pub gamma: f64,
    pub alpha: f64,
}

impl Default for VortexParams {
    fn default() -> Self {
        Self {
            lower: [-5.0, -5.0],
            upper: [5.0, 5.0],
            speed: [1.0, 1.0],
            beta: 5.0,
            center: [-1.0, -1.0],
            gamma: 1.4,
            alpha: 1.0,
        }
    }
}

impl VortexParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.beta > 0.0) {
            return Err(Error::Invalid(format!("vortex beta must be positive, got {}", self.beta)));
        }
        if !(self.lower[0] < self.upper[0] && self.lower[1] < self.upper[1]) {
            return Err(Error::Invalid("vortex box bounds are not ordered".into()));
        }
        Ok(())
    }

    pub fn eos<T: Real>(&self) -> Eos<T> {
        Eos::Covolume {
            gamma: T::lit(self.gamma),
            b: T::zero(),
        }
    }
}

/// Exact conserved state of the vortex at `x` and time `t`.
pub fn vortex_exact<T: Real>(x: Vec2<T>, t: T, p: &VortexParams) -> State<T> {
    let g = T::lit(p.gamma);
    let beta = T::lit(p.beta);
    let pi = T::lit(PI);
    let xb = [
        x[0] - T::lit(p.center[0]) - T::lit(p.speed[0]) * t,
        x[1] - T::lit(p.center[1]) - T::lit(p.speed[1]) * t,
    ];
    let r2 = xb[0] * xb[0] + xb[1] * xb[1];
    let e = (T::one() - r2).exp();
    let temp = T::one() - (g - T::one()) * beta * beta / (T::lit(8.0) * g * pi * pi) * e;
    let rho = temp.powf(T::one() / (g - T::one()));
    let s = beta / (T::lit(2.0) * pi) * (e.sqrt());
    let v = [T::lit(p.speed[0]) - s * xb[1], T::lit(p.speed[1]) + s * xb[0]];
    // p = ρ^γ = ρ T
    let pressure = rho * temp;
    let kinetic = T::lit(0.5) * rho * (v[0] * v[0] + v[1] * v[1]);
    State::new(rho, [rho * v[0], rho * v[1]], pressure / (g - T::one()) + kinetic)
}

/// Diocotron annulus in a disk.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiocotronParams {
    pub r0: f64,
    pub r1: f64,
    pub radius: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    /// Scaling of the plasma and cyclotron frequencies.
    pub beta: f64,
    pub delta: f64,
    pub mode: u32,
    /// Isothermal temperature.
    pub temperature: f64,
}

impl Default for DiocotronParams {
    fn default() -> Self {
        Self {
            r0: 6.0,
            r1: 8.0,
            radius: 16.0,
            rho_min: 1e-6,
            rho_max: 1.0,
            beta: 1e6,
            delta: 0.1,
            mode: 3,
            temperature: 1e-4,
        }
    }
}

impl DiocotronParams {
    pub fn validate(&self) -> Result<(), Error> {
        if !(0.0 < self.r0 && self.r0 < self.r1 && self.r1 < self.radius) {
            return Err(Error::Invalid(format!(
                "radii must satisfy 0 < r0 < r1 < R, got {}, {}, {}",
                self.r0, self.r1, self.radius
            )));
        }
        if !(0.0 <= self.delta && self.delta < 0.5) {
            return Err(Error::Invalid(format!("delta must lie in [0, 1/2), got {}", self.delta)));
        }
        if !(0.0 < self.rho_min && self.rho_min <= self.rho_max) {
            return Err(Error::Invalid("densities must satisfy 0 < rho_min <= rho_max".into()));
        }
        if !(self.beta > 0.0) {
            return Err(Error::Invalid("beta must be positive".into()));
        }
        if !(self.temperature >= 0.0) {
            return Err(Error::Invalid("temperature must be non-negative".into()));
        }
        Ok(())
    }

    pub fn alpha(&self) -> f64 {
        self.beta * self.beta / self.rho_max
    }

    pub fn omega(&self) -> f64 {
        self.beta * self.beta
    }

    pub fn eos<T: Real>(&self) -> Eos<T> {
        Eos::Isothermal {
            theta: T::lit(self.temperature),
        }
    }
}

pub fn diocotron_initial_density<T: Real>(x: Vec2<T>, p: &DiocotronParams) -> T {
    let r = (x[0] * x[0] + x[1] * x[1]).sqrt();
    if r <= T::lit(p.r0) || r >= T::lit(p.r1) {
        return T::lit(p.rho_min);
    }
    let angle = x[1].atan2(x[0]);
    let d = T::lit(p.delta);
    T::lit(p.rho_max) * (T::one() - d + d * (T::lit(p.mode as f64) * angle).sin())
}

/// Nodal density, Gauss-law potential with homogeneous Dirichlet data, and
/// the drift velocity `v = −(∇φ × Ω)/|Ω|²` from cell-local gradients.
pub fn diocotron_initialize<T: Real>(
    disc: &Discretization<T>,
    p: &DiocotronParams,
    solver: &mut PotentialSolver<T>,
) -> Result<(Vec<State<T>>, Vec<T>), Error> {
    p.validate()?;
    let rho: Vec<T> = disc.dg.interpolate(|x| diocotron_initial_density(x, p));
    let mut phi = vec![T::zero(); disc.n_cg()];
    solve_gauss_law(disc, &rho, None, T::lit(p.alpha()), solver, &mut phi, None)?;
    let omega = T::lit(p.omega());
    let grads = disc.gradient_at_dg_nodes(&phi);
    let u = rho
        .iter()
        .zip(&grads)
        .map(|(&r, g)| {
            let v = [-g[1] / omega, g[0] / omega];
            State::new(r, [r * v[0], r * v[1]], T::zero())
        })
        .collect();
    Ok((u, phi))
}

/// Cyclotron, plasma and diocotron frequencies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timescales {
    pub omega_c: f64,
    pub omega_p: f64,
    /// Infinite when there is no magnetic field.
    pub omega_d: f64,
}

pub fn timescale_report(rho: f64, alpha: f64, omega: f64) -> Timescales {
    let omega_c = omega.abs();
    let omega_p = (rho * alpha).sqrt();
    let omega_d = if omega_c > 0.0 {
        omega_p * omega_p / omega_c
    } else {
        f64::INFINITY
    };
    Timescales {
        omega_c,
        omega_p,
        omega_d,
    }
}

impl DiocotronParams {
    pub fn timescales(&self) -> Timescales {
        timescale_report(self.rho_max, self.alpha(), self.omega())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{MeshHierarchy, PointLocator};
    use crate::source_update::SolverSettings;

    #[test]
    fn vortex_far_field_is_background() {
        let p = VortexParams::default();
        let s = vortex_exact([40.0f64, -35.0], 0.0, &p);
        assert!((s.rho - 1.0).abs() < 1e-14);
        assert!((s.m[0] - 1.0).abs() < 1e-14 && (s.m[1] - 1.0).abs() < 1e-14);
        assert!((s.energy - (1.0 / 0.4 + 1.0)).abs() < 1e-13);
    }

    #[test]
    fn vortex_translates() {
        let p = VortexParams::default();
        let a = vortex_exact([-1.3f64, -0.8], 0.0, &p);
        let b = vortex_exact([-0.3f64, 0.2], 1.0, &p);
        assert!((a.rho - b.rho).abs() < 1e-15);
        assert!((a.energy - b.energy).abs() < 1e-14);
    }

    #[test]
    fn vortex_density_matches_direct_formula() {
        let p = VortexParams::default();
        for k in 0..10 {
            let x: [f64; 2] = [-1.0 + 0.3 * k as f64, -1.0 - 0.2 * k as f64];
            let r2 = (x[0] + 1.0).powi(2) + (x[1] + 1.0).powi(2);
            let t = 1.0 - 0.4 * 25.0 / (8.0 * 1.4 * PI * PI) * (1.0 - r2).exp();
            let rho = t.powf(2.5);
            assert!((vortex_exact(x, 0.0, &p).rho - rho).abs() < 1e-15);
        }
        // Center minimum.
        let c = vortex_exact([-1.0f64, -1.0], 0.0, &p).rho;
        assert!(c < vortex_exact([-0.9, -1.0], 0.0, &p).rho);
    }

    #[test]
    fn diocotron_density_examples() {
        let p = DiocotronParams::default();
        assert!((diocotron_initial_density([7.0f64, 0.0], &p) - 0.9).abs() < 1e-15);
        assert_eq!(diocotron_initial_density([3.0, 0.0], &p), 1e-6);
        let a = PI / 6.0;
        let x = [7.0 * a.cos(), 7.0 * a.sin()];
        assert!((diocotron_initial_density(x, &p) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn timescales() {
        let t = DiocotronParams::default().timescales();
        assert_eq!(t.omega_c, 1e12);
        assert!((t.omega_p - 1e6).abs() < 1e-6);
        assert!((t.omega_d - 1.0).abs() < 1e-12);
        assert!((t.omega_d * t.omega_c - t.omega_p * t.omega_p).abs() < 1e-3);
        assert!(timescale_report(1.0, 1.0, 0.0).omega_d.is_infinite());
    }

    #[test]
    fn axisymmetric_drift_velocity() {
        // δ = 0: the field at (7, 0) follows from the enclosed charge,
        // φ'(r) = −(α/r) ∫₀ʳ ρ s ds.
        let p = DiocotronParams {
            delta: 0.0,
            ..Default::default()
        };
        let h = MeshHierarchy::disk(p.radius, 5).unwrap();
        let d = Discretization::new(h.finest().clone()).unwrap();
        let mut solver = PotentialSolver::new(SolverSettings::default(), Some(&h));
        let (u, phi) = diocotron_initialize(&d, &p, &mut solver).unwrap();
        assert!(u.iter().all(|s| s.rho >= p.rho_min && s.rho <= p.rho_max));
        let expected = -(6.5 + 18e-6) / 7.0;
        // Average the cell-local velocities around the vertex (7, 0).
        let v = d
            .mesh
            .vertices
            .iter()
            .position(|x| (x[0] - 7.0).abs() < 1e-9 && x[1].abs() < 1e-9)
            .expect("vertex (7, 0) exists");
        let nodes = d.nodes_at_vertex(v);
        let vy: f64 = nodes.iter().map(|&j| u[j].velocity()[1]).sum::<f64>() / nodes.len() as f64;
        assert!((vy - expected).abs() < 0.05 * expected.abs(), "{vy} vs {expected}");
        let loc = PointLocator::new(&d.mesh);
        assert!(loc.locate([7.0, 0.0]).is_ok());
        assert!(phi.iter().all(|x| x.is_finite()));
    }
}

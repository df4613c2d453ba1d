//! First-order graph viscosity update of the Euler subsystem.

pub mod wavespeed;

use std::sync::Arc;

use rayon::prelude::*;

use crate::discretization::Discretization;
use crate::eos::{Eos, Flux, State};
use crate::error::HyperbolicError;
use crate::scalar::{det_sum, norm, Real, Vec2};

pub use wavespeed::{lambda_max, max_wavespeed, WaveData};

const NODE_CHUNK: usize = 2048;

/// Exterior state supplied at boundary collocation points.
#[derive(Clone)]
pub enum BoundaryCondition<T> {
    /// Prescribed state `g(x, t)`.
    Dirichlet(Arc<dyn Fn(Vec2<T>, T) -> State<T> + Send + Sync>),
    /// Mirror state with the normal momentum reversed.
    Reflecting,
}

impl<T> std::fmt::Debug for BoundaryCondition<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BoundaryCondition::Dirichlet(_) => f.write_str("Dirichlet"),
            BoundaryCondition::Reflecting => f.write_str("Reflecting"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimeIntegrator {
    ForwardEuler,
    SspRk3,
}

/// Graph viscosities aligned with the coupling graph entries.
#[derive(Clone, Debug)]
pub struct Viscosity<T> {
    pub dij: Vec<T>,
    pub di: Vec<T>,
    pub dii: Vec<T>,
}

/// Summary of one explicit advance.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AdvanceInfo<T> {
    pub steps: usize,
    pub retries: usize,
    /// Time-integrated boundary contribution to `Σ m_i u_i` per component.
    pub boundary_flux: [T; 4],
}

#[derive(Clone, Debug)]
pub struct HyperbolicSolver<T> {
    pub eos: Eos<T>,
    pub cfl: T,
    pub integrator: TimeIntegrator,
    pub boundary: BoundaryCondition<T>,
}

#[inline]
fn flux_dot<T: Real>(f: &Flux<T>, c: Vec2<T>) -> [T; 4] {
    [
        f[0][0] * c[0] + f[0][1] * c[1],
        f[1][0] * c[0] + f[1][1] * c[1],
        f[2][0] * c[0] + f[2][1] * c[1],
        f[3][0] * c[0] + f[3][1] * c[1],
    ]
}

impl<T: Real> HyperbolicSolver<T> {
    pub fn new(eos: Eos<T>, cfl: T, integrator: TimeIntegrator, boundary: BoundaryCondition<T>) -> Self {
        Self {
            eos,
            cfl,
            integrator,
            boundary,
        }
    }

    /// Validates every node and returns the per-node wave data.
    fn wave_data(&self, u: &[State<T>]) -> Result<Vec<WaveData<T>>, HyperbolicError> {
        let eos = &self.eos;
        let out: Vec<Option<WaveData<T>>> = u
            .par_iter()
            .map(|s| eos.primitive(s).ok().map(|w| WaveData::new(eos, &w)))
            .collect();
        out.into_iter()
            .enumerate()
            .map(|(i, w)| {
                w.ok_or_else(|| {
                    let e = self.eos.specific_internal_energy(&u[i]).unwrap_or(T::nan());
                    HyperbolicError::LostAdmissibility {
                        node: i,
                        rho: u[i].rho.as_f64(),
                        e: e.as_f64(),
                    }
                })
            })
            .collect()
    }

    /// Exterior states at every node (meaningful only on boundary nodes).
    pub fn boundary_states(&self, disc: &Discretization<T>, u: &[State<T>], t: T) -> Vec<State<T>> {
        let g = &disc.graph;
        let mut out = vec![State::default(); u.len()];
        for &i in &g.boundary_nodes {
            out[i] = match &self.boundary {
                BoundaryCondition::Dirichlet(f) => f(disc.dg.coords[i], t),
                BoundaryCondition::Reflecting => {
                    let c = g.c_boundary[i];
                    let n = norm(c);
                    Eos::mirror(&u[i], [c[0] / n, c[1] / n])
                }
            };
        }
        out
    }

    fn viscosities_from(
        &self,
        disc: &Discretization<T>,
        w: &[WaveData<T>],
        wb: &[WaveData<T>],
    ) -> Viscosity<T> {
        let g = &disc.graph;
        let n = g.n_rows();
        let nnz = g.cols.len();
        let eos = &self.eos;
        let mut dij = vec![T::zero(); nnz];
        // Upper triangle first, then mirror: the bound is symmetric under
        // (uL, uR, n) → (uR, uL, −n) and c_ji = −c_ij.
        {
            // Split `dij` into per-row slices so rows fill in parallel.
            let mut rows: Vec<(usize, &mut [T])> = Vec::with_capacity(n);
            let mut rest = dij.as_mut_slice();
            for i in 0..n {
                let (head, tail) = rest.split_at_mut(g.row_ptr[i + 1] - g.row_ptr[i]);
                rows.push((i, head));
                rest = tail;
            }
            rows.par_iter_mut().with_min_len(NODE_CHUNK).for_each(|(i, row)| {
                let i = *i;
                let wi = &w[i];
                for (p, d) in g.row(i).zip(row.iter_mut()) {
                    let j = g.cols[p];
                    if j > i {
                        let c = g.c[p];
                        let cn = g.c_norm[p];
                        *d = cn * lambda_max(eos, wi, &w[j], [c[0] / cn, c[1] / cn]);
                    }
                }
            });
        }
        for i in 0..n {
            for p in g.row(i) {
                if g.cols[p] < i {
                    dij[p] = dij[g.transpose[p]];
                }
            }
        }
        let mut di = vec![T::zero(); n];
        for &i in &g.boundary_nodes {
            let c = g.c_boundary[i];
            let cn = norm(c);
            di[i] = cn * lambda_max(eos, &w[i], &wb[i], [c[0] / cn, c[1] / cn]);
        }
        let dii: Vec<T> = (0..n)
            .map(|i| {
                let s = g.row(i).fold(T::zero(), |s, p| s + dij[p]);
                -s - di[i]
            })
            .collect();
        Viscosity { dij, di, dii }
    }

    /// Graph viscosities for the state `u` with boundary data at time `t`.
    pub fn viscosities(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        t: T,
    ) -> Result<(Viscosity<T>, Vec<State<T>>), HyperbolicError> {
        let ub = self.boundary_states(disc, u, t);
        let w = self.wave_data(u)?;
        let wb = self.boundary_wave_data(disc, &ub)?;
        Ok((self.viscosities_from(disc, &w, &wb), ub))
    }

    fn boundary_wave_data(&self, disc: &Discretization<T>, ub: &[State<T>]) -> Result<Vec<WaveData<T>>, HyperbolicError> {
        let mut wb = vec![WaveData::default(); ub.len()];
        for &i in &disc.graph.boundary_nodes {
            wb[i] = WaveData::new(&self.eos, &self.eos.primitive(&ub[i])?);
        }
        Ok(wb)
    }

    /// `CFL · min_i (−m_i / (2 d_ii))`, or infinity if every `d_ii` vanishes.
    pub fn cfl_timestep(dii: &[T], masses: &[T], cfl: T) -> T {
        let two = T::lit(2.0);
        let mut best = T::infinity();
        for (&d, &m) in dii.iter().zip(masses) {
            if d < T::zero() {
                best = best.min(-m / (two * d));
            }
        }
        cfl * best
    }

    /// Largest admissible step for `u` at time `t`.
    pub fn time_step_limit(&self, disc: &Discretization<T>, u: &[State<T>], t: T) -> Result<T, HyperbolicError> {
        let (v, _) = self.viscosities(disc, u, t)?;
        Ok(Self::cfl_timestep(&v.dii, &disc.dg.masses, self.cfl))
    }

    fn check_cfl(&self, disc: &Discretization<T>, v: &Viscosity<T>, tau: T) -> Result<(), HyperbolicError> {
        let two = T::lit(2.0);
        for (i, (&d, &m)) in v.dii.iter().zip(&disc.dg.masses).enumerate() {
            if m + two * tau * d < -T::epsilon() * m {
                return Err(HyperbolicError::CflViolation {
                    node: i,
                    tau: tau.as_f64(),
                    limit: (-m / (two * d)).as_f64(),
                });
            }
        }
        Ok(())
    }

    /// One forward Euler step in flux form. Returns the new state and the
    /// time-integrated boundary contribution to `Σ m_i u_i`.
    pub fn forward_euler(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        tau: T,
        t: T,
    ) -> Result<(Vec<State<T>>, [T; 4]), HyperbolicError> {
        let (v, ub) = self.viscosities(disc, u, t)?;
        self.forward_euler_with(disc, u, tau, &v, &ub)
    }

    fn forward_euler_with(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        tau: T,
        v: &Viscosity<T>,
        ub: &[State<T>],
    ) -> Result<(Vec<State<T>>, [T; 4]), HyperbolicError> {
        self.check_cfl(disc, v, tau)?;
        let g = &disc.graph;
        let eos = &self.eos;
        let fluxes: Vec<Flux<T>> = u.par_iter().map(|s| eos.flux(s)).collect();
        let new: Vec<State<T>> = (0..u.len())
            .into_par_iter()
            .with_min_len(NODE_CHUNK)
            .map(|i| {
                let ui = u[i].as_array();
                let mut r = [T::zero(); 4];
                for p in g.row(i) {
                    let j = g.cols[p];
                    let fc = flux_dot(&fluxes[j], g.c[p]);
                    let uj = u[j].as_array();
                    let d = v.dij[p];
                    for k in 0..4 {
                        r[k] += d * (uj[k] - ui[k]) - fc[k];
                    }
                }
                if v.di[i] > T::zero() || g.c_boundary[i] != [T::zero(); 2] {
                    let fb = flux_dot(&eos.flux(&ub[i]), g.c_boundary[i]);
                    let b = ub[i].as_array();
                    for k in 0..4 {
                        r[k] += v.di[i] * (b[k] - ui[k]) - fb[k];
                    }
                }
                let s = tau / disc.dg.masses[i];
                let mut out = [T::zero(); 4];
                for k in 0..4 {
                    out[k] = ui[k] + s * r[k];
                }
                State::from_array(out)
            })
            .collect();
        let mut bflux = [T::zero(); 4];
        for &i in &g.boundary_nodes {
            let fi = flux_dot(&fluxes[i], g.c_boundary[i]);
            let fb = flux_dot(&eos.flux(&ub[i]), g.c_boundary[i]);
            let (a, b) = (u[i].as_array(), ub[i].as_array());
            for k in 0..4 {
                bflux[k] += tau * (v.di[i] * (b[k] - a[k]) - fi[k] - fb[k]);
            }
        }
        self.check_admissible(&new)?;
        Ok((new, bflux))
    }

    /// The same step written as a convex combination of bar states.
    pub fn forward_euler_convex(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        tau: T,
        t: T,
    ) -> Result<Vec<State<T>>, HyperbolicError> {
        let (v, ub) = self.viscosities(disc, u, t)?;
        self.check_cfl(disc, &v, tau)?;
        let g = &disc.graph;
        let two = T::lit(2.0);
        let new: Vec<State<T>> = (0..u.len())
            .into_par_iter()
            .with_min_len(NODE_CHUNK)
            .map(|i| {
                let m = disc.dg.masses[i];
                let ui = u[i].as_array();
                let mut out = [T::zero(); 4];
                let w0 = T::one() + two * tau * v.dii[i] / m;
                for k in 0..4 {
                    out[k] = w0 * ui[k];
                }
                for p in g.row(i) {
                    let d = v.dij[p];
                    if d == T::zero() {
                        continue;
                    }
                    let bar = bar_state(&self.eos, &u[i], &u[g.cols[p]], g.c[p], d);
                    let wgt = two * tau * d / m;
                    for k in 0..4 {
                        out[k] += wgt * bar[k];
                    }
                }
                if v.di[i] > T::zero() {
                    let bar = bar_state(&self.eos, &u[i], &ub[i], g.c_boundary[i], v.di[i]);
                    let wgt = two * tau * v.di[i] / m;
                    for k in 0..4 {
                        out[k] += wgt * bar[k];
                    }
                }
                State::from_array(out)
            })
            .collect();
        self.check_admissible(&new)?;
        Ok(new)
    }

    fn check_admissible(&self, u: &[State<T>]) -> Result<(), HyperbolicError> {
        match u.iter().position(|s| !self.eos.is_admissible(s)) {
            None => Ok(()),
            Some(i) => Err(HyperbolicError::LostAdmissibility {
                node: i,
                rho: u[i].rho.as_f64(),
                e: self.eos.specific_internal_energy(&u[i]).unwrap_or(T::nan()).as_f64(),
            }),
        }
    }

    /// One step of the configured explicit integrator.
    pub fn step(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        tau: T,
        t: T,
    ) -> Result<(Vec<State<T>>, [T; 4]), HyperbolicError> {
        match self.integrator {
            TimeIntegrator::ForwardEuler => self.forward_euler(disc, u, tau, t),
            TimeIntegrator::SspRk3 => self.ssp_rk3(disc, u, tau, t),
        }
    }

    /// Three-stage SSP Runge-Kutta step built from forward Euler stages.
    pub fn ssp_rk3(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        tau: T,
        t: T,
    ) -> Result<(Vec<State<T>>, [T; 4]), HyperbolicError> {
        let (v, ub) = self.viscosities(disc, u, t)?;
        self.ssp_rk3_with(disc, u, tau, t, &v, &ub)
    }

    fn ssp_rk3_with(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        tau: T,
        t: T,
        v: &Viscosity<T>,
        ub: &[State<T>],
    ) -> Result<(Vec<State<T>>, [T; 4]), HyperbolicError> {
        let (q, r) = (T::lit(0.75), T::lit(0.25));
        let (a, b) = (T::one() / T::lit(3.0), T::lit(2.0) / T::lit(3.0));
        let (u1, b0) = self.forward_euler_with(disc, u, tau, v, ub)?;
        let (f1, b1) = self.forward_euler(disc, &u1, tau, t + tau)?;
        let u2: Vec<State<T>> = u.iter().zip(&f1).map(|(x, y)| State::axpby(q, x, r, y)).collect();
        let (f2, b2) = self.forward_euler(disc, &u2, tau, t + T::lit(0.5) * tau)?;
        let u3: Vec<State<T>> = u.iter().zip(&f2).map(|(x, y)| State::axpby(a, x, b, y)).collect();
        self.check_admissible(&u3)?;
        let sixth = T::one() / T::lit(6.0);
        let mut bf = [T::zero(); 4];
        for k in 0..4 {
            bf[k] = sixth * b0[k] + sixth * b1[k] + b * b2[k];
        }
        Ok((u3, bf))
    }

    /// One step of size `min(CFL limit, max_dt)`, halving it while later
    /// stages violate the limit. Returns the state and the step taken.
    pub fn step_capped(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        t: T,
        max_dt: T,
    ) -> Result<(Vec<State<T>>, T, AdvanceInfo<T>), HyperbolicError> {
        let mut info = AdvanceInfo::default();
        let (v, ub) = self.viscosities(disc, u, t)?;
        let limit = Self::cfl_timestep(&v.dii, &disc.dg.masses, self.cfl);
        let mut tau = if limit >= max_dt { max_dt } else { limit };
        loop {
            let attempt = match self.integrator {
                TimeIntegrator::ForwardEuler => self.forward_euler_with(disc, u, tau, &v, &ub),
                TimeIntegrator::SspRk3 => self.ssp_rk3_with(disc, u, tau, t, &v, &ub),
            };
            match attempt {
                Ok((next, bf)) => {
                    info.steps = 1;
                    info.boundary_flux = bf;
                    return Ok((next, tau, info));
                }
                Err(HyperbolicError::CflViolation { .. }) if info.retries < 64 => {
                    info.retries += 1;
                    tau = tau * T::lit(0.5);
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Advances by exactly `dt`, sub-stepping when `dt` exceeds the CFL
    /// limit.
    pub fn advance(
        &self,
        disc: &Discretization<T>,
        u: &[State<T>],
        t: T,
        dt: T,
    ) -> Result<(Vec<State<T>>, AdvanceInfo<T>), HyperbolicError> {
        let mut info = AdvanceInfo::default();
        let mut state = u.to_vec();
        let mut elapsed = T::zero();
        let slack = T::lit(1e-12) * dt;
        while dt - elapsed > slack {
            let (next, tau, step) = self.step_capped(disc, &state, t + elapsed, dt - elapsed)?;
            state = next;
            for k in 0..4 {
                info.boundary_flux[k] += step.boundary_flux[k];
            }
            info.retries += step.retries;
            info.steps += 1;
            elapsed += tau;
        }
        Ok((state, info))
    }
}

/// `ū = ½(u_i + u_j) − (f(u_j) − f(u_i)) c / (2 d)`.
pub fn bar_state<T: Real>(eos: &Eos<T>, ui: &State<T>, uj: &State<T>, c: Vec2<T>, d: T) -> [T; 4] {
    let fi = flux_dot(&eos.flux(ui), c);
    let fj = flux_dot(&eos.flux(uj), c);
    let (a, b) = (ui.as_array(), uj.as_array());
    let half = T::lit(0.5);
    let mut out = [T::zero(); 4];
    for k in 0..4 {
        out[k] = half * (a[k] + b[k]) - (fj[k] - fi[k]) / (T::lit(2.0) * d);
    }
    out
}

/// `Σ m_i u_i` per component.
pub fn conserved_totals<T: Real>(masses: &[T], u: &[State<T>]) -> [T; 4] {
    let mut out = [T::zero(); 4];
    for k in 0..4 {
        let terms: Vec<T> = masses.iter().zip(u).map(|(&m, s)| m * s.as_array()[k]).collect();
        out[k] = det_sum(&terms);
    }
    out
}

/// `Σ m_i η(u_i)`.
pub fn entropy_tally<T: Real>(eos: &Eos<T>, masses: &[T], u: &[State<T>]) -> Result<T, HyperbolicError> {
    let mut terms = Vec::with_capacity(u.len());
    for (m, s) in masses.iter().zip(u) {
        terms.push(*m * eos.entropy(s)?);
    }
    Ok(det_sum(&terms))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_disk_mesh, build_rectangle_mesh};
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ideal() -> Eos<f64> {
        Eos::Covolume { gamma: 1.4, b: 0.0 }
    }

    fn solver(eos: Eos<f64>, integrator: TimeIntegrator) -> HyperbolicSolver<f64> {
        HyperbolicSolver::new(eos, 0.5, integrator, BoundaryCondition::Reflecting)
    }

    fn disk(r: usize) -> Discretization<f64> {
        Discretization::new(build_disk_mesh(1.0, r).unwrap()).unwrap()
    }

    fn random_state(rng: &mut ChaCha8Rng, eos: &Eos<f64>) -> State<f64> {
        let rho = rng.gen_range(0.5..2.0);
        let v = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let m = [rho * v[0], rho * v[1]];
        let energy = if eos.is_barotropic() {
            0.0
        } else {
            rho * rng.gen_range(0.5..3.0) + 0.5 * rho * (v[0] * v[0] + v[1] * v[1])
        };
        State::new(rho, m, energy)
    }

    #[test]
    fn cfl_formula() {
        assert_eq!(HyperbolicSolver::cfl_timestep(&[-2.0], &[1.0], 0.5), 0.125);
        let a = HyperbolicSolver::cfl_timestep(&[-2.0, -3.0], &[1.0, 2.0], 0.5);
        let b = HyperbolicSolver::cfl_timestep(&[-4.0, -6.0], &[1.0, 2.0], 0.5);
        assert_relative_eq!(a, 2.0 * b);
        assert_eq!(HyperbolicSolver::cfl_timestep(&[0.0], &[1.0], 0.5), f64::INFINITY);
    }

    #[test]
    fn viscosity_examples() {
        let d = disk(2);
        let iso = solver(Eos::Isothermal { theta: 1.0 }, TimeIntegrator::ForwardEuler);
        let u = vec![State::new(1.0, [0.0, 0.0], 0.0); d.n_dg()];
        let (v, _) = iso.viscosities(&d, &u, 0.0).unwrap();
        for (p, &dij) in v.dij.iter().enumerate() {
            assert_relative_eq!(dij, d.graph.c_norm[p], max_relative = 1e-14);
        }
        let cold = solver(Eos::Isothermal { theta: 0.0 }, TimeIntegrator::ForwardEuler);
        let (v, _) = cold.viscosities(&d, &u, 0.0).unwrap();
        assert!(v.dij.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn viscosities_are_symmetric() {
        let d = disk(2);
        let eos = ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u: Vec<State<f64>> = (0..d.n_dg()).map(|_| random_state(&mut rng, &eos)).collect();
        let (v, _) = solver(eos, TimeIntegrator::ForwardEuler).viscosities(&d, &u, 0.0).unwrap();
        for p in 0..v.dij.len() {
            assert_eq!(v.dij[p], v.dij[d.graph.transpose[p]]);
            assert!(v.dij[p] >= 0.0);
        }
        assert!(v.dii.iter().all(|&x| x <= 0.0));
    }

    #[test]
    fn constant_rest_state_is_fixed_point() {
        let d = disk(2);
        for eos in [ideal(), Eos::Isothermal { theta: 0.3 }] {
            let u = vec![State::new(1.3, [0.0, 0.0], if eos.is_barotropic() { 0.0 } else { 2.0 }); d.n_dg()];
            for integ in [TimeIntegrator::ForwardEuler, TimeIntegrator::SspRk3] {
                let s = solver(eos, integ);
                let tau = s.time_step_limit(&d, &u, 0.0).unwrap();
                let (w, _) = s.step(&d, &u, tau, 0.0).unwrap();
                for (a, b) in u.iter().zip(&w) {
                    assert!((a.rho - b.rho).abs() < 1e-13);
                    assert!(b.m[0].abs() < 1e-13 && b.m[1].abs() < 1e-13);
                    assert!((a.energy - b.energy).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn mass_changes_only_by_boundary_flux() {
        let d = Discretization::new(build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], [6, 6]).unwrap()).unwrap();
        let eos = ideal();
        let f = Arc::new(|x: Vec2<f64>, _t: f64| {
            let rho = 1.0 + 0.3 * x[0];
            State::new(rho, [rho * 0.7, rho * 0.2], rho * 2.0 + 0.5 * rho * 0.53)
        });
        let s = HyperbolicSolver::new(eos, 0.5, TimeIntegrator::ForwardEuler, BoundaryCondition::Dirichlet(f.clone()));
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let u: Vec<State<f64>> = d
            .dg
            .coords
            .iter()
            .map(|&x| {
                let mut st = f(x, 0.0);
                st.rho *= 1.0 + 0.1 * rng.gen_range(-1.0..1.0);
                st
            })
            .collect();
        let tau = s.time_step_limit(&d, &u, 0.0).unwrap();
        let before = conserved_totals(&d.dg.masses, &u);
        let (w, bf) = s.forward_euler(&d, &u, tau, 0.0).unwrap();
        let after = conserved_totals(&d.dg.masses, &w);
        for k in 0..4 {
            assert!((after[k] - before[k] - bf[k]).abs() <= 1e-13 * before[k].abs().max(1.0));
        }
    }

    #[test]
    fn flux_and_convex_forms_agree() {
        let d = Discretization::new(build_rectangle_mesh([0.0, 0.0], [2.0, 1.0], [2, 1]).unwrap()).unwrap();
        let eos = ideal();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u: Vec<State<f64>> = (0..d.n_dg()).map(|_| random_state(&mut rng, &eos)).collect();
        let s = solver(eos, TimeIntegrator::ForwardEuler);
        let tau = s.time_step_limit(&d, &u, 0.0).unwrap();
        let (a, _) = s.forward_euler(&d, &u, tau, 0.0).unwrap();
        let b = s.forward_euler_convex(&d, &u, tau, 0.0).unwrap();
        for (x, y) in a.iter().zip(&b) {
            let (x, y) = (x.as_array(), y.as_array());
            for k in 0..4 {
                assert!((x[k] - y[k]).abs() <= 1e-13 * x[k].abs().max(1.0));
            }
        }
    }

    #[test]
    fn bar_state_matches_direct_formula() {
        let eos = ideal();
        let ul = State::new(1.0, [0.0, 0.0], 2.5);
        let ur = State::new(0.125, [0.0, 0.0], 0.25);
        let c = [0.5, 0.0];
        let d = 0.9;
        let bar = bar_state(&eos, &ul, &ur, c, d);
        // Fluxes along x at rest: [0, p, 0, 0].
        let (pl, pr) = (1.0, 0.1);
        assert_relative_eq!(bar[0], 0.5625, max_relative = 1e-15);
        assert_relative_eq!(bar[1], -(pr - pl) * 0.5 / (2.0 * d), max_relative = 1e-14);
        assert_relative_eq!(bar[3], 0.5 * (2.5 + 0.25), max_relative = 1e-15);
    }

    #[test]
    fn rk3_preserves_admissibility_on_random_fields() {
        let d = disk(2);
        let eos = ideal();
        let s = HyperbolicSolver::new(eos, 0.9, TimeIntegrator::SspRk3, BoundaryCondition::Reflecting);
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..100 {
            let u: Vec<State<f64>> = (0..d.n_dg()).map(|_| random_state(&mut rng, &eos)).collect();
            let dt = s.time_step_limit(&d, &u, 0.0).unwrap();
            let (w, _) = s.advance(&d, &u, 0.0, dt).unwrap();
            assert!(w.iter().all(|x| eos.is_admissible(x)));
        }
    }

    #[test]
    fn entropy_does_not_increase_with_walls() {
        let d = disk(3);
        let eos = ideal();
        let s = solver(eos, TimeIntegrator::ForwardEuler);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut u: Vec<State<f64>> = (0..d.n_dg()).map(|_| random_state(&mut rng, &eos)).collect();
        let mut eta = entropy_tally(&eos, &d.dg.masses, &u).unwrap();
        for _ in 0..5 {
            let tau = s.time_step_limit(&d, &u, 0.0).unwrap();
            u = s.forward_euler(&d, &u, tau, 0.0).unwrap().0;
            let next = entropy_tally(&eos, &d.dg.masses, &u).unwrap();
            assert!(next <= eta + 1e-12 * eta.abs());
            eta = next;
        }
    }

    #[test]
    fn entropy_tally_examples() {
        let eos = Eos::Isothermal { theta: 1.0 };
        let u = vec![State::new(1.0, [0.0, 0.0], 0.0); 4];
        assert_eq!(entropy_tally(&eos, &[0.25; 4], &u).unwrap(), 0.0);
        let v = vec![State::new(2.0, [1.0, 0.0], 0.0); 4];
        let a = entropy_tally(&eos, &[0.25; 2], &v[..2]).unwrap();
        let b = entropy_tally(&eos, &[0.25; 4], &v).unwrap();
        assert_relative_eq!(2.0 * a, b, max_relative = 1e-15);
    }

    #[test]
    fn timestep_scales_with_mesh_size() {
        let eos = ideal();
        let u0 = State::new(1.0, [0.5, 0.25], 3.0);
        let taus: Vec<f64> = [8, 16]
            .iter()
            .map(|&n| {
                let d = Discretization::new(build_rectangle_mesh([0.0, 0.0], [1.0, 1.0], [n, n]).unwrap()).unwrap();
                let u = vec![u0; d.n_dg()];
                solver(eos, TimeIntegrator::ForwardEuler).time_step_limit(&d, &u, 0.0).unwrap()
            })
            .collect();
        assert!((taus[0] / taus[1] - 2.0).abs() < 0.02);
    }
}

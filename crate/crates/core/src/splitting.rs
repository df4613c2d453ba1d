//! Strang splitting of the hyperbolic and source subsystems, time-step
//! selection and Gauss-law restarts.

use std::sync::Arc;

use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::diagnostics::{gauss_residual_norm, total_energy};
use crate::discretization::Discretization;
use crate::eos::{Eos, State};
use crate::error::Error;
use crate::hyperbolic::{BoundaryCondition, HyperbolicSolver, TimeIntegrator};
use crate::mesh::MeshHierarchy;
use crate::scalar::{det_sum, Real, Vec2};
use crate::scenarios::{diocotron_initialize, vortex_exact, DiocotronParams, VortexParams};
use crate::source_update::{solve_gauss_law, source_update_conserved, PotentialSolver, SolverSettings, ThetaParams};

/// Post-step treatment of the discrete Gauss law.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RestartMode {
    #[default]
    None,
    Full,
    Relaxation,
}

impl std::str::FromStr for RestartMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "none" => Ok(Self::None),
            "full" => Ok(Self::Full),
            "relaxation" => Ok(Self::Relaxation),
            _ => Err(Error::Invalid(format!("unknown restart mode `{s}`"))),
        }
    }
}

/// Diagnostics of one completed Strang step.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub step: usize,
    /// Time at the end of the step.
    pub t: f64,
    pub tau: f64,
    /// `Σ m E` (or `Σ m η`) plus the field energy.
    pub total_energy: f64,
    pub kinetic_energy: f64,
    pub field_energy: f64,
    pub gauss_residual: f64,
    pub iterations: usize,
    pub min_rho: f64,
    pub min_e: f64,
    pub mass: f64,
    /// Mass leaving through the boundary during the step.
    pub boundary_mass_flux: f64,
    pub hyperbolic_substeps: usize,
    /// Kinetic-energy scaling factor applied by a relaxation restart.
    pub relaxation_factor: f64,
}

/// Source-step and restart parameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceSettings<T> {
    pub theta: T,
    pub alpha: T,
    pub omega: T,
    pub restart: RestartMode,
    pub solver: SolverSettings<T>,
    /// Skip the source step and restart entirely.
    pub hyperbolic_only: bool,
}

/// Vortex background: density and momentum of the exact solution at the
/// dG nodes.
#[derive(Clone, Copy, Debug)]
pub struct Background {
    pub vortex: VortexParams,
}

impl Background {
    pub fn density<T: Real>(&self, disc: &Discretization<T>, t: T) -> Vec<T> {
        disc.dg.interpolate(|x| vortex_exact(x, t, &self.vortex).rho)
    }

    pub fn momentum<T: Real>(&self, disc: &Discretization<T>, t: T) -> Vec<Vec2<T>> {
        disc.dg.interpolate(|x| vortex_exact(x, t, &self.vortex).m)
    }
}

/// Complete simulation state.
pub struct Simulation<T> {
    pub disc: Discretization<T>,
    pub hyperbolic: HyperbolicSolver<T>,
    pub source: SourceSettings<T>,
    pub state: Vec<State<T>>,
    pub phi: Vec<T>,
    pub t: T,
    pub steps: usize,
    pub background: Option<Background>,
    source_solver: PotentialSolver<T>,
    gauss_solver: PotentialSolver<T>,
}

impl<T: Real> Simulation<T> {
    pub fn new(
        hierarchy: &MeshHierarchy<T>,
        hyperbolic: HyperbolicSolver<T>,
        source: SourceSettings<T>,
        state: Vec<State<T>>,
        phi: Vec<T>,
        background: Option<Background>,
    ) -> Result<Self, Error> {
        let disc = Discretization::new(hierarchy.finest().clone())?;
        Self::with_discretization(disc, Some(hierarchy), hyperbolic, source, state, phi, background)
    }

    pub fn with_discretization(
        disc: Discretization<T>,
        hierarchy: Option<&MeshHierarchy<T>>,
        hyperbolic: HyperbolicSolver<T>,
        source: SourceSettings<T>,
        state: Vec<State<T>>,
        phi: Vec<T>,
        background: Option<Background>,
    ) -> Result<Self, Error> {
        hyperbolic.eos.validate()?;
        if state.len() != disc.n_dg() || phi.len() != disc.n_cg() {
            return Err(Error::Invalid("initial fields do not match the discretization".into()));
        }
        for s in &state {
            hyperbolic.eos.check(s)?;
        }
        Ok(Self {
            hyperbolic,
            source,
            state,
            phi,
            t: T::zero(),
            steps: 0,
            background,
            source_solver: PotentialSolver::new(source.solver, hierarchy),
            gauss_solver: PotentialSolver::new(source.solver, hierarchy),
            disc,
        })
    }

    /// Vortex on an `n × n` box mesh with exact Dirichlet data.
    pub fn vortex(
        n: usize,
        params: &VortexParams,
        integrator: TimeIntegrator,
        cfl: T,
        theta: T,
        restart: RestartMode,
        solver: SolverSettings<T>,
    ) -> Result<Self, Error> {
        params.validate()?;
        let hierarchy = MeshHierarchy::rectangle(
            [T::lit(params.lower[0]), T::lit(params.lower[1])],
            [T::lit(params.upper[0]), T::lit(params.upper[1])],
            [n, n],
        )?;
        let p = *params;
        let boundary = BoundaryCondition::Dirichlet(Arc::new(move |x, t| vortex_exact(x, t, &p)));
        let hyperbolic = HyperbolicSolver::new(params.eos(), cfl, integrator, boundary);
        let source = SourceSettings {
            theta,
            alpha: T::lit(params.alpha),
            omega: T::zero(),
            restart,
            solver,
            hyperbolic_only: false,
        };
        let disc = Discretization::new(hierarchy.finest().clone())?;
        let state = disc.dg.interpolate(|x| vortex_exact(x, T::zero(), params));
        let phi = vec![T::zero(); disc.n_cg()];
        Self::with_discretization(
            disc,
            Some(&hierarchy),
            hyperbolic,
            source,
            state,
            phi,
            Some(Background { vortex: p }),
        )
    }

    /// Diocotron annulus on the disk at the given refinement level.
    pub fn diocotron(
        refinement: usize,
        params: &DiocotronParams,
        integrator: TimeIntegrator,
        cfl: T,
        theta: T,
        restart: RestartMode,
        solver: SolverSettings<T>,
    ) -> Result<Self, Error> {
        params.validate()?;
        let hierarchy = MeshHierarchy::disk(T::lit(params.radius), refinement)?;
        let disc = Discretization::new(hierarchy.finest().clone())?;
        let mut init_solver = PotentialSolver::new(solver, Some(&hierarchy));
        let (state, phi) = diocotron_initialize(&disc, params, &mut init_solver)?;
        let hyperbolic = HyperbolicSolver::new(params.eos(), cfl, integrator, BoundaryCondition::Reflecting);
        let source = SourceSettings {
            theta,
            alpha: T::lit(params.alpha()),
            omega: T::lit(params.omega()),
            restart,
            solver,
            hyperbolic_only: false,
        };
        Self::with_discretization(disc, Some(&hierarchy), hyperbolic, source, state, phi, None)
    }

    pub fn eos(&self) -> &Eos<T> {
        &self.hyperbolic.eos
    }

    pub fn density(&self) -> Vec<T> {
        self.state.iter().map(|s| s.rho).collect()
    }

    pub fn mass(&self) -> T {
        let terms: Vec<T> = self.disc.dg.masses.iter().zip(&self.state).map(|(&m, s)| m * s.rho).collect();
        det_sum(&terms)
    }

    fn background_density(&self, t: T) -> Option<Vec<T>> {
        self.background.map(|b| b.density(&self.disc, t))
    }

    pub fn gauss_residual(&self) -> T {
        let rho = self.density();
        let bg = self.background_density(self.t);
        gauss_residual_norm(&self.disc, &rho, bg.as_deref(), &self.phi, self.source.alpha)
    }

    /// Source step of size `tau` applied to the current fields at time `t`.
    pub fn source_step(&mut self, tau: T) -> Result<usize, Error> {
        let params = ThetaParams {
            theta: self.source.theta,
            tau,
            alpha: self.source.alpha,
            omega: self.source.omega,
        };
        let current = self
            .background
            .map(|b| b.momentum(&self.disc, self.t + T::lit(0.5) * tau));
        let (u, phi, it) = source_update_conserved(
            &self.disc,
            &self.hyperbolic.eos,
            &self.state,
            &self.phi,
            &params,
            &mut self.source_solver,
            current.as_deref(),
            None,
        )?;
        self.state = u;
        self.phi = phi;
        Ok(it)
    }

    /// Potential satisfying the discrete Gauss law for the current density.
    pub fn gauss_potential(&mut self) -> Result<(Vec<T>, usize), Error> {
        let rho = self.density();
        let bg = self.background_density(self.t);
        let mut phi = self.phi.clone();
        let it = solve_gauss_law(
            &self.disc,
            &rho,
            bg.as_deref(),
            self.source.alpha,
            &mut self.gauss_solver,
            &mut phi,
            None,
        )?;
        Ok((phi, it))
    }

    /// Replaces the potential by the Gauss-law solution.
    pub fn gauss_restart_full(&mut self) -> Result<usize, Error> {
        let (phi, it) = self.gauss_potential()?;
        self.phi = phi;
        Ok(it)
    }

    /// Replaces the potential and lowers the kinetic energy by the gain in
    /// field energy. Returns the momentum scaling factor.
    pub fn gauss_restart_relaxation(&mut self) -> Result<(T, usize), Error> {
        let (phi_new, it) = self.gauss_potential()?;
        let factor = self.relax_to(phi_new);
        Ok((factor, it))
    }

    fn relax_to(&mut self, phi_new: Vec<T>) -> T {
        let two = T::lit(2.0);
        let alpha = self.source.alpha;
        let delta = (self.disc.dirichlet_energy(&phi_new) - self.disc.dirichlet_energy(&self.phi)) / (two * alpha);
        let kin_terms: Vec<T> = self
            .disc
            .dg
            .masses
            .iter()
            .zip(&self.state)
            .map(|(&m, s)| m * s.kinetic_energy())
            .collect();
        let kin = det_sum(&kin_terms);
        let mut frac = if delta > T::zero() {
            if kin > T::zero() {
                delta / kin
            } else {
                T::infinity()
            }
        } else {
            T::zero()
        };
        if frac > T::one() {
            warn!(
                "relaxation restart clamped: field energy gain {:e} exceeds kinetic energy {:e}",
                delta.as_f64(),
                kin.as_f64()
            );
            frac = T::one();
        }
        let factor = (T::one() - frac).sqrt();
        self.phi = phi_new;
        if factor != T::one() {
            let barotropic = self.hyperbolic.eos.is_barotropic();
            for s in &mut self.state {
                let old_kin = s.kinetic_energy();
                s.m = [factor * s.m[0], factor * s.m[1]];
                if !barotropic {
                    s.energy = s.energy - old_kin + s.kinetic_energy();
                }
            }
        }
        factor
    }

    /// One Strang step, capped so as not to pass `t_end`.
    pub fn strang_step(&mut self, t_end: T) -> Result<StepRecord, Error> {
        let remaining = t_end - self.t;
        if !(remaining > T::zero()) {
            return Err(Error::Invalid("no time left to step".into()));
        }
        let half = T::lit(0.5);
        let (u1, tau_half, info1) = self
            .hyperbolic
            .step_capped(&self.disc, &self.state, self.t, half * remaining)?;
        let tau = tau_half + tau_half;
        let mut flux = info1.boundary_flux[0];
        let mut substeps = 1;
        self.state = u1;
        let t0 = self.t;
        let mut iterations = 0;
        if !self.source.hyperbolic_only {
            self.t = t0;
            iterations += self.source_step(tau)?;
        }
        let (u2, info2) = self.hyperbolic.advance(&self.disc, &self.state, t0 + tau_half, tau_half)?;
        self.state = u2;
        flux += info2.boundary_flux[0];
        substeps += info2.steps;
        self.t = t0 + tau;
        self.steps += 1;

        let mut relaxation_factor = T::one();
        if !self.source.hyperbolic_only {
            match self.source.restart {
                RestartMode::None => {}
                RestartMode::Full => iterations += self.gauss_restart_full()?,
                RestartMode::Relaxation => {
                    let (f, it) = self.gauss_restart_relaxation()?;
                    relaxation_factor = f;
                    iterations += it;
                }
            }
        }
        self.record(tau, iterations, flux, substeps, relaxation_factor)
    }

    fn record(&self, tau: T, iterations: usize, flux: T, substeps: usize, relax: T) -> Result<StepRecord, Error> {
        let e = total_energy(&self.disc, &self.hyperbolic.eos, &self.state, &self.phi, self.source.alpha)?;
        let mut min_rho = f64::INFINITY;
        let mut min_e = f64::INFINITY;
        for s in &self.state {
            min_rho = min_rho.min(s.rho.as_f64());
            min_e = min_e.min(self.hyperbolic.eos.specific_internal_energy(s)?.as_f64());
        }
        Ok(StepRecord {
            step: self.steps,
            t: self.t.as_f64(),
            tau: tau.as_f64(),
            total_energy: e.total().as_f64(),
            kinetic_energy: e.kinetic.as_f64(),
            field_energy: e.field.as_f64(),
            gauss_residual: self.gauss_residual().as_f64(),
            iterations,
            min_rho,
            min_e,
            mass: self.mass().as_f64(),
            boundary_mass_flux: -flux.as_f64(),
            hyperbolic_substeps: substeps,
            relaxation_factor: relax.as_f64(),
        })
    }

    /// Record describing the current state without stepping.
    pub fn initial_record(&self) -> Result<StepRecord, Error> {
        self.record(T::zero(), 0, T::zero(), 0, T::one())
    }
}

/// Steps to `t_final`, calling `observer` after every step.
pub fn run_simulation<T: Real, F>(sim: &mut Simulation<T>, t_final: T, mut observer: F) -> Result<Vec<StepRecord>, Error>
where
    F: FnMut(&Simulation<T>, &StepRecord) -> Result<(), Error>,
{
    let mut records = Vec::new();
    let slack = T::lit(1e-12) * t_final.abs().max(T::one());
    while t_final - sim.t > slack {
        let rec = sim.strang_step(t_final)?;
        observer(sim, &rec)?;
        if sim.steps % 100 == 0 {
            info!(
                "step {} t = {:.6} tau = {:.3e} iterations {}",
                rec.step, rec.t, rec.tau, rec.iterations
            );
        }
        records.push(rec);
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::l1_error_vortex;

    fn rest_simulation(restart: RestartMode) -> Simulation<f64> {
        let h = MeshHierarchy::rectangle([0.0, 0.0], [1.0, 1.0], [8, 8]).unwrap();
        let eos = Eos::Covolume { gamma: 1.4, b: 0.0 };
        let hyp = HyperbolicSolver::new(eos, 0.5, TimeIntegrator::SspRk3, BoundaryCondition::Reflecting);
        let n_dg = 4 * 64;
        let state = vec![State::new(1.0, [0.0; 2], 2.5); n_dg];
        let source = SourceSettings {
            theta: 0.5,
            alpha: 1.0,
            omega: 3.0,
            restart,
            solver: SolverSettings::default(),
            hyperbolic_only: false,
        };
        let d = Discretization::new(h.finest().clone()).unwrap();
        let mut phi = vec![0.0; d.n_cg()];
        let mut solver = PotentialSolver::new(SolverSettings::default(), Some(&h));
        solve_gauss_law(&d, &vec![1.0; n_dg], None, 1.0, &mut solver, &mut phi, None).unwrap();
        Simulation::new(&h, hyp, source, state, phi, None).unwrap()
    }

    #[test]
    fn full_restart_zeroes_residual() {
        let mut sim = rest_simulation(RestartMode::Full);
        for _ in 0..3 {
            let r = sim.strang_step(10.0).unwrap();
            assert!(r.gauss_residual < 1e-10, "{}", r.gauss_residual);
        }
    }

    #[test]
    fn restart_is_a_fixed_point_on_gauss_consistent_data() {
        let mut sim = rest_simulation(RestartMode::None);
        let before = sim.phi.clone();
        sim.gauss_restart_full().unwrap();
        for (a, b) in sim.phi.iter().zip(&before) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn relaxation_examples() {
        let mut sim = rest_simulation(RestartMode::Relaxation);
        for s in &mut sim.state {
            s.m = [0.3, -0.2];
            s.energy = 2.5 + s.kinetic_energy();
        }
        let e0 = total_energy(&sim.disc, sim.eos(), &sim.state, &sim.phi, 1.0).unwrap();
        // Lower field energy: no scaling.
        let smaller: Vec<f64> = sim.phi.iter().map(|p| 0.5 * p).collect();
        let m0 = sim.state[0].m;
        assert_eq!(sim.relax_to(smaller), 1.0);
        assert_eq!(sim.state[0].m, m0);
        // Field energy gain of half the kinetic energy scales by √½.
        let phi = sim.phi.clone();
        let target = e0.kinetic / 2.0 + sim.disc.dirichlet_energy(&phi) / 2.0;
        let s = (target * 2.0 / sim.disc.dirichlet_energy(&phi)).sqrt();
        let bigger: Vec<f64> = phi.iter().map(|p| s * p).collect();
        let f = sim.relax_to(bigger);
        assert!((f - 0.5f64.sqrt()).abs() < 1e-12, "{f}");
        // Total energy accounting.
        let e1 = total_energy(&sim.disc, sim.eos(), &sim.state, &sim.phi, 1.0).unwrap();
        assert!(e1.total() <= e0.total() * (1.0 + 1e-14));
    }

    #[test]
    fn uniform_rest_state_is_a_fixed_point() {
        // Neutral rest state: φ ≡ 0 and ρ balanced by nothing, Ω arbitrary.
        let h = MeshHierarchy::<f64>::rectangle([0.0, 0.0], [1.0, 1.0], [4, 4]).unwrap();
        let eos = Eos::Covolume { gamma: 1.4, b: 0.0 };
        let hyp = HyperbolicSolver::new(eos, 0.5, TimeIntegrator::SspRk3, BoundaryCondition::Reflecting);
        let source = SourceSettings {
            theta: 0.5,
            alpha: 1.0,
            omega: 2.0,
            restart: RestartMode::None,
            solver: SolverSettings::default(),
            hyperbolic_only: false,
        };
        let state = vec![State::new(1.0, [0.0; 2], 2.5); 64];
        let d = Discretization::new(h.finest().clone()).unwrap();
        let phi = vec![0.0; d.n_cg()];
        let mut sim = Simulation::new(&h, hyp, source, state.clone(), phi, None).unwrap();
        sim.strang_step(1.0).unwrap();
        for (a, b) in sim.state.iter().zip(&state) {
            assert!((a.rho - b.rho).abs() < 1e-14 && a.m[0].abs() < 1e-14 && (a.energy - b.energy).abs() < 1e-13);
        }
    }

    #[test]
    fn hyperbolic_only_matches_plain_advance() {
        let p = VortexParams::default();
        let mut sim = Simulation::<f64>::vortex(
            8,
            &p,
            TimeIntegrator::ForwardEuler,
            0.1,
            1.0,
            RestartMode::None,
            SolverSettings::default(),
        )
        .unwrap();
        sim.source.hyperbolic_only = true;
        let u0 = sim.state.clone();
        let r = sim.strang_step(1.0).unwrap();
        let (expect, _) = sim.hyperbolic.advance(&sim.disc, &u0, 0.0, r.tau).unwrap();
        for (a, b) in sim.state.iter().zip(&expect) {
            assert!((a.rho - b.rho).abs() < 1e-14);
        }
    }

    #[test]
    fn vortex_step_is_admissible_and_accurate() {
        let p = VortexParams::default();
        let mut sim = Simulation::<f64>::vortex(
            16,
            &p,
            TimeIntegrator::ForwardEuler,
            0.1,
            1.0,
            RestartMode::None,
            SolverSettings::default(),
        )
        .unwrap();
        let recs = run_simulation(&mut sim, 0.05, |_, _| Ok(())).unwrap();
        assert!(!recs.is_empty());
        assert!((sim.t - 0.05).abs() < 1e-12);
        assert!(recs.iter().all(|r| r.min_rho > 0.0 && r.min_e > 0.0));
        let err = l1_error_vortex(&sim.disc, &sim.state, sim.t, &p);
        assert!(err.is_finite() && err < 20.0);
    }

    #[test]
    fn zero_final_time_takes_no_steps() {
        let mut sim = rest_simulation(RestartMode::None);
        let recs = run_simulation(&mut sim, 0.0, |_, _| Ok(())).unwrap();
        assert!(recs.is_empty());
    }
}

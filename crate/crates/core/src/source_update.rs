//! Implicit θ-scheme for the potential, momentum and Lorentz-force sources.
//!
//! The coupled update is condensed into one elliptic solve for the
//! intermediate potential `φ^{n+θ}` with the bilinear form
//! `a(φ, ψ) = (∇φ, ∇ψ) + θ²τ²α ⟨ρ B⁻¹ ∇φ, ∇ψ⟩_h`, followed by a nodewise
//! velocity update and extrapolation to `t + τ`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretization::Discretization;
use crate::eos::{Eos, State};
use crate::error::{Error, SolverError};
use crate::linalg::{fgmres, Csr, FgmresSettings, Identity, Jacobi, LinearOperator, Multigrid, Preconditioner, Sgs};
use crate::mesh::{MeshHierarchy, VertexTransfer};
use crate::scalar::{norm_sq, Real, Vec2};

/// Parameters of one source step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ThetaParams<T> {
    pub theta: T,
    pub tau: T,
    pub alpha: T,
    /// Out-of-plane magnetic field component.
    pub omega: T,
}

impl<T: Real> ThetaParams<T> {
    pub fn validate(&self) -> Result<(), Error> {
        if !(self.theta > T::zero() && self.theta <= T::one()) {
            return Err(Error::Invalid(format!("theta must lie in (0, 1], got {}", self.theta.as_f64())));
        }
        if !(self.tau > T::zero()) || !self.tau.is_finite() {
            return Err(Error::Invalid(format!("time step must be positive, got {}", self.tau.as_f64())));
        }
        if !(self.alpha > T::zero()) || !self.alpha.is_finite() {
            return Err(Error::Invalid(format!("alpha must be positive, got {}", self.alpha.as_f64())));
        }
        if !self.omega.is_finite() {
            return Err(Error::Invalid("omega must be finite".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Rotation<T> {
        Rotation {
            x: self.theta * self.tau * self.omega,
        }
    }
}

/// `B v = v − x (v₂, −v₁)` with `x = θτΩ`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation<T> {
    pub x: T,
}

impl<T: Real> Rotation<T> {
    pub fn det(&self) -> T {
        T::one() + self.x * self.x
    }

    pub fn apply(&self, v: Vec2<T>) -> Vec2<T> {
        [v[0] - self.x * v[1], v[1] + self.x * v[0]]
    }

    pub fn inverse_apply(&self, v: Vec2<T>) -> Vec2<T> {
        let d = self.det();
        [(v[0] + self.x * v[1]) / d, (v[1] - self.x * v[0]) / d]
    }
}

pub fn b_apply<T: Real>(v: Vec2<T>, params: &ThetaParams<T>) -> Vec2<T> {
    params.rotation().apply(v)
}

pub fn b_inverse_apply<T: Real>(v: Vec2<T>, params: &ThetaParams<T>) -> Vec2<T> {
    params.rotation().inverse_apply(v)
}

/// Matrix-free action of the condensed operator. As a [`LinearOperator`] it
/// acts on the free nodes: Dirichlet rows are identity and Dirichlet columns
/// are dropped.
pub struct SchurOperator<'a, T> {
    disc: &'a Discretization<T>,
    rotation: Rotation<T>,
    /// `θ²τ²α m_j ρ_j` per dG node.
    weights: Vec<T>,
}

impl<'a, T: Real> SchurOperator<'a, T> {
    pub fn new(disc: &'a Discretization<T>, rho: &[T], params: &ThetaParams<T>) -> Self {
        let coef = params.theta * params.theta * params.tau * params.tau * params.alpha;
        Self::with_coefficient(disc, rho, coef, params.rotation())
    }

    /// Plain stiffness operator.
    pub fn stiffness(disc: &'a Discretization<T>) -> Self {
        Self {
            disc,
            rotation: Rotation { x: T::zero() },
            weights: vec![T::zero(); disc.n_dg()],
        }
    }

    fn with_coefficient(disc: &'a Discretization<T>, rho: &[T], coef: T, rotation: Rotation<T>) -> Self {
        assert_eq!(rho.len(), disc.n_dg());
        let weights = rho.par_iter().zip(&disc.dg.masses).map(|(&r, &m)| coef * m * r).collect();
        Self {
            disc,
            rotation,
            weights,
        }
    }

    fn scaled_gradients(&self, phi: &[T]) -> Vec<Vec2<T>> {
        let mut q = self.disc.gradient_at_dg_nodes(phi);
        q.par_iter_mut().zip(&self.weights).for_each(|(g, &w)| {
            let r = self.rotation.inverse_apply(*g);
            *g = [w * r[0], w * r[1]];
        });
        q
    }

    /// `a(φ, ψ_v)` for every CG vertex, without boundary treatment.
    pub fn apply_unconstrained(&self, phi: &[T], y: &mut [T]) {
        let q = self.scaled_gradients(phi);
        self.disc
            .rows_apply(y, |v| self.disc.stiffness_row(phi, v) + self.disc.weak_row(&q, v));
    }

    /// Assembled matrix of [`Self::apply_unconstrained`].
    pub fn assemble(&self) -> Csr<T> {
        let mesh = &self.disc.mesh;
        let mut trip = Vec::with_capacity(16 * mesh.n_cells());
        for (k, cell) in mesh.cells.iter().enumerate() {
            let kk = self.disc.cell_stiffness(k);
            let g = self.disc.cell_grads(k);
            for a in 0..4 {
                for b in 0..4 {
                    let mut s = kk[a][b];
                    for j in 0..4 {
                        let w = self.weights[4 * k + j];
                        if w != T::zero() {
                            let r = self.rotation.inverse_apply(g[j][b]);
                            s += w * (g[j][a][0] * r[0] + g[j][a][1] * r[1]);
                        }
                    }
                    trip.push((cell[a], cell[b], s));
                }
            }
        }
        Csr::from_triplets(self.disc.n_cg(), self.disc.n_cg(), trip)
    }
}

impl<T: Real> LinearOperator<T> for SchurOperator<'_, T> {
    fn dim(&self) -> usize {
        self.disc.n_cg()
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        let dir = &self.disc.cg.dirichlet;
        let x0: Vec<T> = x.iter().zip(dir).map(|(&v, &d)| if d { T::zero() } else { v }).collect();
        self.apply_unconstrained(&x0, y);
        for ((yi, &xi), &d) in y.iter_mut().zip(x).zip(dir) {
            if d {
                *yi = xi;
            }
        }
    }
}

/// Preconditioner for the potential solves.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PreconditionerKind {
    None,
    Jacobi,
    Sgs,
    #[default]
    Multigrid,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolverSettings<T> {
    pub preconditioner: PreconditionerKind,
    pub rel_tol: T,
    pub max_iterations: usize,
    pub restart: usize,
    /// Gauss-Seidel sweeps per level for the multigrid preconditioner.
    pub smoothing_sweeps: usize,
    /// A cached preconditioner is rebuilt once a solve needs more iterations.
    pub rebuild_after: usize,
}

impl<T: Real> Default for SolverSettings<T> {
    fn default() -> Self {
        Self {
            preconditioner: PreconditionerKind::Multigrid,
            rel_tol: T::lit(1e-12),
            max_iterations: 2000,
            restart: 50,
            smoothing_sweeps: 2,
            rebuild_after: 8,
        }
    }
}

/// Krylov solver for the condensed operator with a cached preconditioner.
pub struct PotentialSolver<T> {
    pub settings: SolverSettings<T>,
    /// Coarse-to-fine transfers, fine level first.
    prolongations: Vec<Csr<T>>,
    /// Dirichlet flags per level, fine level first.
    constrained: Vec<Vec<bool>>,
    cached: Option<Box<dyn Preconditioner<T> + Send>>,
    stale: bool,
    pub total_iterations: usize,
    pub rebuilds: usize,
}

fn transfer_to_csr<T: Real>(t: &VertexTransfer<T>) -> Csr<T> {
    let mut trip = Vec::with_capacity(t.weights.len());
    for i in 0..t.n_fine() {
        for k in t.row_ptr[i]..t.row_ptr[i + 1] {
            trip.push((i, t.cols[k], t.weights[k]));
        }
    }
    Csr::from_triplets(t.n_fine(), t.n_coarse, trip)
}

impl<T: Real> PotentialSolver<T> {
    /// Solver on the finest level of `hierarchy`, or on a single level when
    /// no hierarchy is available.
    pub fn new(settings: SolverSettings<T>, hierarchy: Option<&MeshHierarchy<T>>) -> Self {
        let (prolongations, constrained) = match hierarchy {
            Some(h) => (
                h.transfers.iter().rev().map(transfer_to_csr).collect(),
                h.levels.iter().rev().map(|m| m.boundary_vertex.clone()).collect(),
            ),
            None => (Vec::new(), Vec::new()),
        };
        Self {
            settings,
            prolongations,
            constrained,
            cached: None,
            stale: true,
            total_iterations: 0,
            rebuilds: 0,
        }
    }

    /// Forces a preconditioner rebuild on the next solve.
    pub fn invalidate(&mut self) {
        self.stale = true;
    }

    fn build(&mut self, op: &SchurOperator<'_, T>) {
        let dir = &op.disc.cg.dirichlet;
        let pc: Box<dyn Preconditioner<T> + Send> = match self.settings.preconditioner {
            PreconditionerKind::None => Box::new(Identity),
            PreconditionerKind::Jacobi => {
                let mut a = op.assemble();
                a.eliminate(dir);
                Box::new(Jacobi::new(a.diagonal()))
            }
            PreconditionerKind::Sgs => {
                let mut a = op.assemble();
                a.eliminate(dir);
                Box::new(Sgs::new(a))
            }
            PreconditionerKind::Multigrid => {
                let mut a = op.assemble();
                a.eliminate(dir);
                let usable = !self.constrained.is_empty() && self.constrained[0].len() == a.n_rows;
                if usable {
                    Box::new(Multigrid::new(a, &self.prolongations, &self.constrained, self.settings.smoothing_sweeps))
                } else {
                    Box::new(Multigrid::new(a, &[], &[dir.clone()], self.settings.smoothing_sweeps))
                }
            }
        };
        self.cached = Some(pc);
        self.stale = false;
        self.rebuilds += 1;
    }

    /// Solves `a(φ, ψ) = rhs(ψ)` for all free test functions with `φ = g` on
    /// Dirichlet nodes. `phi` holds the initial guess on entry; `dirichlet`
    /// gives `g` at every CG node (only constrained entries are read), or
    /// `None` for homogeneous data.
    pub fn solve(
        &mut self,
        op: &SchurOperator<'_, T>,
        rhs: &[T],
        phi: &mut [T],
        dirichlet: Option<&[T]>,
    ) -> Result<usize, SolverError> {
        let dir = &op.disc.cg.dirichlet;
        let n = op.dim();
        let mut b = rhs.to_vec();
        let mut lift = vec![T::zero(); n];
        if let Some(g) = dirichlet {
            for i in 0..n {
                if dir[i] {
                    lift[i] = g[i];
                }
            }
            if lift.iter().any(|&v| v != T::zero()) {
                let mut al = vec![T::zero(); n];
                op.apply_unconstrained(&lift, &mut al);
                for (bi, &a) in b.iter_mut().zip(&al) {
                    *bi -= a;
                }
            }
        }
        for i in 0..n {
            if dir[i] {
                b[i] = T::zero();
                phi[i] = T::zero();
            }
        }
        if self.stale || self.cached.is_none() {
            self.build(op);
        }
        let settings = FgmresSettings {
            restart: self.settings.restart,
            max_iterations: self.settings.max_iterations,
            rel_tol: self.settings.rel_tol,
        };
        let stats = fgmres(op, self.cached.as_deref().expect("built above"), &b, phi, &settings)?;
        self.total_iterations += stats.iterations;
        if stats.iterations > self.settings.rebuild_after {
            self.stale = true;
        }
        for i in 0..n {
            if dir[i] {
                phi[i] = lift[i];
            }
        }
        Ok(stats.iterations)
    }
}

/// `(∇φⁿ, ∇ψ) + θτα ⟨ρ B⁻¹ vⁿ, ∇ψ⟩_h − θτα ⟨j_b, ∇ψ⟩_h` where `j_b` is an
/// optional prescribed background current.
pub fn assemble_source_rhs<T: Real>(
    disc: &Discretization<T>,
    phi: &[T],
    v: &[Vec2<T>],
    rho: &[T],
    params: &ThetaParams<T>,
    background_current: Option<&[Vec2<T>]>,
) -> Vec<T> {
    let s = params.theta * params.tau * params.alpha;
    let rot = params.rotation();
    let q: Vec<Vec2<T>> = (0..disc.n_dg())
        .into_par_iter()
        .map(|j| {
            let w = s * disc.dg.masses[j];
            let mut r = rot.inverse_apply(v[j]);
            r = [rho[j] * r[0], rho[j] * r[1]];
            if let Some(jb) = background_current {
                r = [r[0] - jb[j][0], r[1] - jb[j][1]];
            }
            [w * r[0], w * r[1]]
        })
        .collect();
    let mut out = vec![T::zero(); disc.n_cg()];
    disc.rows_apply(&mut out, |i| disc.stiffness_row(phi, i) + disc.weak_row(&q, i));
    out
}

/// `v^{n+θ}_j = B⁻¹(vⁿ_j − θτ ∇φ^{n+θ}(x_j))`.
pub fn update_velocity<T: Real>(
    disc: &Discretization<T>,
    v: &[Vec2<T>],
    phi_theta: &[T],
    params: &ThetaParams<T>,
) -> Vec<Vec2<T>> {
    let s = params.theta * params.tau;
    let rot = params.rotation();
    let mut g = disc.gradient_at_dg_nodes(phi_theta);
    g.par_iter_mut().zip(v).for_each(|(gj, vj)| {
        *gj = rot.inverse_apply([vj[0] - s * gj[0], vj[1] - s * gj[1]]);
    });
    g
}

/// `x^{n+1} = (x^{n+θ} − (1−θ) xⁿ) / θ`.
pub fn extrapolate<T: Real>(x_theta: T, x_n: T, theta: T) -> T {
    if theta == T::one() {
        x_theta
    } else {
        (x_theta - (T::one() - theta) * x_n) / theta
    }
}

pub fn extrapolate_vec<T: Real>(x_theta: Vec2<T>, x_n: Vec2<T>, theta: T) -> Vec2<T> {
    [extrapolate(x_theta[0], x_n[0], theta), extrapolate(x_theta[1], x_n[1], theta)]
}

/// Result of the θ-scheme on primitive fields.
#[derive(Clone, Debug)]
pub struct ThetaUpdate<T> {
    pub v_theta: Vec<Vec2<T>>,
    pub phi_theta: Vec<T>,
    pub v_new: Vec<Vec2<T>>,
    pub phi_new: Vec<T>,
    pub iterations: usize,
}

/// Solves the θ-scheme for given density, velocity and potential.
/// `dirichlet` carries the potential's boundary values at `t + θτ` and
/// `t + τ` (homogeneous when `None`).
#[allow(clippy::too_many_arguments)]
pub fn theta_update<T: Real>(
    disc: &Discretization<T>,
    rho: &[T],
    v: &[Vec2<T>],
    phi: &[T],
    params: &ThetaParams<T>,
    solver: &mut PotentialSolver<T>,
    background_current: Option<&[Vec2<T>]>,
    dirichlet: Option<(&[T], &[T])>,
) -> Result<ThetaUpdate<T>, Error> {
    params.validate()?;
    let op = SchurOperator::new(disc, rho, params);
    let rhs = assemble_source_rhs(disc, phi, v, rho, params, background_current);
    let mut phi_theta = phi.to_vec();
    let iterations = solver.solve(&op, &rhs, &mut phi_theta, dirichlet.map(|d| d.0))?;
    let v_theta = update_velocity(disc, v, &phi_theta, params);
    let theta = params.theta;
    let v_new = v_theta
        .par_iter()
        .zip(v)
        .map(|(&a, &b)| extrapolate_vec(a, b, theta))
        .collect();
    let mut phi_new: Vec<T> = phi_theta.iter().zip(phi).map(|(&a, &b)| extrapolate(a, b, theta)).collect();
    if let Some((_, g_new)) = dirichlet {
        for (i, &d) in disc.cg.dirichlet.iter().enumerate() {
            if d {
                phi_new[i] = g_new[i];
            }
        }
    }
    Ok(ThetaUpdate {
        v_theta,
        phi_theta,
        v_new,
        phi_new,
        iterations,
    })
}

/// Full source update on conserved states: density and internal energy are
/// carried over, momentum and total energy are rebuilt from the new velocity.
#[allow(clippy::too_many_arguments)]
pub fn source_update_conserved<T: Real>(
    disc: &Discretization<T>,
    eos: &Eos<T>,
    u: &[State<T>],
    phi: &[T],
    params: &ThetaParams<T>,
    solver: &mut PotentialSolver<T>,
    background_current: Option<&[Vec2<T>]>,
    dirichlet: Option<(&[T], &[T])>,
) -> Result<(Vec<State<T>>, Vec<T>, usize), Error> {
    for s in u {
        eos.check(s)?;
    }
    let rho: Vec<T> = u.iter().map(|s| s.rho).collect();
    let v: Vec<Vec2<T>> = u.iter().map(|s| s.velocity()).collect();
    let upd = theta_update(disc, &rho, &v, phi, params, solver, background_current, dirichlet)?;
    let half = T::lit(0.5);
    let barotropic = eos.is_barotropic();
    let out = u
        .par_iter()
        .zip(&upd.v_new)
        .map(|(s, vn)| {
            let m = [s.rho * vn[0], s.rho * vn[1]];
            let energy = if barotropic {
                s.energy
            } else {
                let eps = s.energy - half * norm_sq(s.m) / s.rho;
                eps + half * s.rho * norm_sq(*vn)
            };
            State::new(s.rho, m, energy)
        })
        .collect();
    Ok((out, upd.phi_new, upd.iterations))
}

/// Discrete Gauss law `(∇φ, ∇ω) = α ⟨ρ − ρ_b, ω⟩_h` with Dirichlet data.
pub fn solve_gauss_law<T: Real>(
    disc: &Discretization<T>,
    rho: &[T],
    background: Option<&[T]>,
    alpha: T,
    solver: &mut PotentialSolver<T>,
    phi: &mut [T],
    dirichlet: Option<&[T]>,
) -> Result<usize, SolverError> {
    let f: Vec<T> = match background {
        Some(b) => rho.iter().zip(b).map(|(&r, &b)| alpha * (r - b)).collect(),
        None => rho.iter().map(|&r| alpha * r).collect(),
    };
    let rhs = disc.lumped_load(&f);
    let op = SchurOperator::stiffness(disc);
    solver.solve(&op, &rhs, phi, dirichlet)
}

/// `Σ ½ m_j ρ_j |v_j|²`.
pub fn kinetic_energy<T: Real>(disc: &Discretization<T>, rho: &[T], v: &[Vec2<T>]) -> T {
    let terms: Vec<T> = (0..disc.n_dg())
        .map(|j| T::lit(0.5) * disc.dg.masses[j] * rho[j] * norm_sq(v[j]))
        .collect();
    crate::scalar::det_sum(&terms)
}

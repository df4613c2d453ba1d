//! Sparse matrices, Krylov solver and preconditioners.

mod csr;
mod fgmres;
mod precond;

pub use csr::Csr;
pub use fgmres::{fgmres, FgmresSettings, SolveStats};
pub use precond::{DenseLu, Identity, Jacobi, Multigrid, Sgs};

/// A square linear operator.
pub trait LinearOperator<T>: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, x: &[T], y: &mut [T]);
}

/// Approximate inverse used as right preconditioner.
pub trait Preconditioner<T>: Sync {
    fn apply(&self, r: &[T], z: &mut [T]);
}

impl<T: crate::Real> LinearOperator<T> for Csr<T> {
    fn dim(&self) -> usize {
        self.n_rows
    }

    fn apply(&self, x: &[T], y: &mut [T]) {
        self.matvec(x, y)
    }
}

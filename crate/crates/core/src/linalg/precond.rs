use super::{Csr, Preconditioner};
use crate::scalar::Real;

/// No preconditioning.
pub struct Identity;

impl<T: Real> Preconditioner<T> for Identity {
    fn apply(&self, r: &[T], z: &mut [T]) {
        z.copy_from_slice(r);
    }
}

/// Point Jacobi.
pub struct Jacobi<T> {
    inv_diag: Vec<T>,
}

impl<T: Real> Jacobi<T> {
    pub fn new(diag: Vec<T>) -> Self {
        Self {
            inv_diag: diag
                .into_iter()
                .map(|d| if d != T::zero() { T::one() / d } else { T::one() })
                .collect(),
        }
    }
}

impl<T: Real> Preconditioner<T> for Jacobi<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        for ((zi, &ri), &d) in z.iter_mut().zip(r).zip(&self.inv_diag) {
            *zi = ri * d;
        }
    }
}

fn gs_forward<T: Real>(a: &Csr<T>, diag: &[T], b: &[T], x: &mut [T]) {
    for i in 0..a.n_rows {
        let r = b[i] - a.row_dot(i, x);
        x[i] += r / diag[i];
    }
}

fn gs_backward<T: Real>(a: &Csr<T>, diag: &[T], b: &[T], x: &mut [T]) {
    for i in (0..a.n_rows).rev() {
        let r = b[i] - a.row_dot(i, x);
        x[i] += r / diag[i];
    }
}

/// One symmetric Gauss-Seidel sweep from a zero initial guess.
pub struct Sgs<T> {
    a: Csr<T>,
    diag: Vec<T>,
}

impl<T: Real> Sgs<T> {
    pub fn new(a: Csr<T>) -> Self {
        let diag = a.diagonal();
        Self { a, diag }
    }
}

impl<T: Real> Preconditioner<T> for Sgs<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        z.iter_mut().for_each(|v| *v = T::zero());
        gs_forward(&self.a, &self.diag, r, z);
        gs_backward(&self.a, &self.diag, r, z);
    }
}

/// Dense LU factorization with partial pivoting.
#[derive(Clone, Debug)]
pub struct DenseLu<T> {
    n: usize,
    lu: Vec<T>,
    piv: Vec<usize>,
}

impl<T: Real> DenseLu<T> {
    pub fn new(a: &Csr<T>) -> Self {
        let n = a.n_rows;
        let mut lu = vec![T::zero(); n * n];
        for i in 0..n {
            for p in a.row_ptr[i]..a.row_ptr[i + 1] {
                lu[i * n + a.cols[p]] = a.vals[p];
            }
        }
        let mut piv: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut best = k;
            for i in (k + 1)..n {
                if lu[i * n + k].abs() > lu[best * n + k].abs() {
                    best = i;
                }
            }
            if best != k {
                for j in 0..n {
                    lu.swap(k * n + j, best * n + j);
                }
                piv.swap(k, best);
            }
            let d = lu[k * n + k];
            if d == T::zero() {
                continue;
            }
            for i in (k + 1)..n {
                let f = lu[i * n + k] / d;
                lu[i * n + k] = f;
                for j in (k + 1)..n {
                    let u = lu[k * n + j];
                    lu[i * n + j] -= f * u;
                }
            }
        }
        Self { n, lu, piv }
    }

    pub fn solve(&self, b: &[T], x: &mut [T]) {
        let n = self.n;
        for i in 0..n {
            let mut s = b[self.piv[i]];
            for j in 0..i {
                s -= self.lu[i * n + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= self.lu[i * n + j] * x[j];
            }
            let d = self.lu[i * n + i];
            x[i] = if d != T::zero() { s / d } else { T::zero() };
        }
    }
}

impl<T: Real> Preconditioner<T> for DenseLu<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        self.solve(r, z)
    }
}

struct Level<T> {
    a: Csr<T>,
    diag: Vec<T>,
    /// Prolongation from the next coarser level, and its transpose.
    p: Option<(Csr<T>, Csr<T>)>,
}

/// Largest coarse problem factored densely.
const MAX_DENSE: usize = 1500;

/// Geometric multigrid V-cycle with Gauss-Seidel smoothing and Galerkin
/// coarse operators.
pub struct Multigrid<T> {
    levels: Vec<Level<T>>,
    coarse: Option<DenseLu<T>>,
    sweeps: usize,
}

impl<T: Real> Multigrid<T> {
    /// `a` is the fine operator with constrained rows and columns already
    /// replaced by identity. `prolongations[k]` maps level `k + 1` to level
    /// `k` (level 0 finest); `constrained[k]` flags the constrained nodes of
    /// level `k`.
    pub fn new(a: Csr<T>, prolongations: &[Csr<T>], constrained: &[Vec<bool>], sweeps: usize) -> Self {
        let mut levels = Vec::with_capacity(prolongations.len() + 1);
        let mut current = a;
        for (k, p) in prolongations.iter().enumerate() {
            let fine_c = &constrained[k];
            let coarse_c = &constrained[k + 1];
            let mut trip = Vec::with_capacity(p.nnz());
            for i in 0..p.n_rows {
                if fine_c[i] {
                    continue;
                }
                for q in p.row_ptr[i]..p.row_ptr[i + 1] {
                    let j = p.cols[q];
                    if !coarse_c[j] {
                        trip.push((i, j, p.vals[q]));
                    }
                }
            }
            let pf = Csr::from_triplets(p.n_rows, p.n_cols, trip);
            let pt = pf.transpose();
            let mut coarse = pt.matmul(&current.matmul(&pf));
            let mut id = Vec::new();
            for (j, &c) in coarse_c.iter().enumerate() {
                if c {
                    id.push((j, j, T::one()));
                }
            }
            if !id.is_empty() {
                coarse = add(&coarse, &Csr::from_triplets(coarse.n_rows, coarse.n_cols, id));
            }
            let diag = current.diagonal();
            levels.push(Level {
                a: current,
                diag,
                p: Some((pf, pt)),
            });
            current = coarse;
        }
        let coarse = (current.n_rows <= MAX_DENSE).then(|| DenseLu::new(&current));
        let diag = current.diagonal();
        levels.push(Level {
            a: current,
            diag,
            p: None,
        });
        Self {
            levels,
            coarse,
            sweeps,
        }
    }

    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    fn cycle(&self, l: usize, b: &[T], x: &mut [T]) {
        let level = &self.levels[l];
        match &level.p {
            None => match &self.coarse {
                Some(lu) => lu.solve(b, x),
                None => {
                    x.iter_mut().for_each(|v| *v = T::zero());
                    for _ in 0..20 {
                        gs_forward(&level.a, &level.diag, b, x);
                        gs_backward(&level.a, &level.diag, b, x);
                    }
                }
            },
            Some((p, pt)) => {
                x.iter_mut().for_each(|v| *v = T::zero());
                for _ in 0..self.sweeps {
                    gs_forward(&level.a, &level.diag, b, x);
                }
                let mut r = vec![T::zero(); b.len()];
                level.a.matvec(x, &mut r);
                for (ri, &bi) in r.iter_mut().zip(b) {
                    *ri = bi - *ri;
                }
                let mut rc = vec![T::zero(); pt.n_rows];
                pt.matvec(&r, &mut rc);
                let mut xc = vec![T::zero(); pt.n_rows];
                self.cycle(l + 1, &rc, &mut xc);
                let mut corr = vec![T::zero(); b.len()];
                p.matvec(&xc, &mut corr);
                for (xi, &ci) in x.iter_mut().zip(&corr) {
                    *xi += ci;
                }
                for _ in 0..self.sweeps {
                    gs_backward(&level.a, &level.diag, b, x);
                }
            }
        }
    }
}

fn add<T: Real>(a: &Csr<T>, b: &Csr<T>) -> Csr<T> {
    let mut trip = Vec::with_capacity(a.nnz() + b.nnz());
    for m in [a, b] {
        for i in 0..m.n_rows {
            for p in m.row_ptr[i]..m.row_ptr[i + 1] {
                trip.push((i, m.cols[p], m.vals[p]));
            }
        }
    }
    Csr::from_triplets(a.n_rows, a.n_cols, trip)
}

impl<T: Real> Preconditioner<T> for Multigrid<T> {
    fn apply(&self, r: &[T], z: &mut [T]) {
        self.cycle(0, r, z);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{fgmres, FgmresSettings};

    fn laplace_1d(n: usize) -> Csr<f64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0));
            if i > 0 {
                t.push((i, i - 1, -1.0));
            }
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
            }
        }
        Csr::from_triplets(n, n, t)
    }

    #[test]
    fn dense_lu_solves() {
        let a = Csr::from_triplets(3, 3, vec![(0, 1, 2.0), (1, 0, 1.0), (1, 1, 1.0), (2, 2, 4.0), (0, 0, 0.0f64)]);
        let lu = DenseLu::new(&a);
        let mut x = vec![0.0; 3];
        lu.solve(&[2.0, 3.0, 8.0], &mut x);
        assert!((x[0] - 2.0).abs() < 1e-15 && (x[1] - 1.0).abs() < 1e-15 && (x[2] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn sgs_preconditioned_solve() {
        let a = laplace_1d(100);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        let pc = Sgs::new(a.clone());
        let s = FgmresSettings {
            restart: 50,
            max_iterations: 500,
            rel_tol: 1e-10,
        };
        let stats = fgmres(&a, &pc, &b, &mut x, &s).unwrap();
        assert!(stats.iterations < 100);
    }

    #[test]
    fn two_grid_on_1d_laplacian() {
        // Fine grid 2m+1 interior points, coarse grid m points, linear interpolation.
        let m = 31;
        let nf = 2 * m + 1;
        let a = laplace_1d(nf);
        let mut t = Vec::new();
        for j in 0..m {
            let f = 2 * j + 1;
            t.push((f, j, 1.0));
            t.push((f - 1, j, 0.5));
            t.push((f + 1, j, 0.5));
        }
        let p = Csr::from_triplets(nf, m, t);
        let mg = Multigrid::new(a.clone(), &[p], &[vec![false; nf], vec![false; m]], 2);
        assert_eq!(mg.n_levels(), 2);
        let b = vec![1.0; nf];
        let mut x = vec![0.0; nf];
        let s = FgmresSettings {
            restart: 30,
            max_iterations: 100,
            rel_tol: 1e-12,
        };
        let stats = fgmres(&a, &mg, &b, &mut x, &s).unwrap();
        assert!(stats.iterations <= 12, "{} iterations", stats.iterations);
    }
}

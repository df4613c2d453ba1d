use super::{LinearOperator, Preconditioner};
use crate::error::SolverError;
use crate::scalar::{det_dot, Real};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FgmresSettings<T> {
    pub restart: usize,
    pub max_iterations: usize,
    /// Target for `‖b − Ax‖ / ‖b‖`.
    pub rel_tol: T,
}

impl<T: Real> Default for FgmresSettings<T> {
    fn default() -> Self {
        Self {
            restart: 50,
            max_iterations: 2000,
            rel_tol: T::lit(1e-12),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

fn norm2<T: Real>(x: &[T]) -> T {
    det_dot(x, x).sqrt()
}

fn residual<T: Real, A: LinearOperator<T> + ?Sized>(a: &A, b: &[T], x: &[T], r: &mut [T]) {
    a.apply(x, r);
    for (ri, &bi) in r.iter_mut().zip(b) {
        *ri = bi - *ri;
    }
}

/// Right-preconditioned flexible GMRES with restarts. `x` holds the initial
/// guess on entry and the solution on exit.
pub fn fgmres<T, A, P>(
    a: &A,
    pc: &P,
    b: &[T],
    x: &mut [T],
    settings: &FgmresSettings<T>,
) -> Result<SolveStats, SolverError>
where
    T: Real,
    A: LinearOperator<T> + ?Sized,
    P: Preconditioner<T> + ?Sized,
{
    let n = a.dim();
    assert_eq!(b.len(), n);
    assert_eq!(x.len(), n);
    let bnorm = norm2(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(SolveStats {
            iterations: 0,
            rel_residual: 0.0,
        });
    }
    let target = settings.rel_tol * bnorm;
    let m = settings.restart.max(1);
    let mut r = vec![T::zero(); n];
    // Krylov vectors are allocated on first use; most solves stop early.
    let mut v: Vec<Vec<T>> = vec![vec![T::zero(); n]];
    let mut z: Vec<Vec<T>> = Vec::new();
    let mut h = vec![vec![T::zero(); m]; m + 1];
    let mut cs = vec![T::zero(); m];
    let mut sn = vec![T::zero(); m];
    let mut g = vec![T::zero(); m + 1];
    let mut iterations = 0;

    residual(a, b, x, &mut r);
    let mut rnorm = norm2(&r);
    loop {
        if rnorm <= target {
            return Ok(SolveStats {
                iterations,
                rel_residual: (rnorm / bnorm).as_f64(),
            });
        }
        if iterations >= settings.max_iterations {
            return Err(SolverError::NotConverged {
                iterations,
                residual: (rnorm / bnorm).as_f64(),
                target: settings.rel_tol.as_f64(),
            });
        }
        for (vi, &ri) in v[0].iter_mut().zip(&r) {
            *vi = ri / rnorm;
        }
        g.iter_mut().for_each(|e| *e = T::zero());
        g[0] = rnorm;
        let mut k = 0;
        while k < m && iterations < settings.max_iterations {
            if z.len() == k {
                z.push(vec![T::zero(); n]);
                v.push(vec![T::zero(); n]);
            }
            pc.apply(&v[k], &mut z[k]);
            let (head, tail) = v.split_at_mut(k + 1);
            let w = &mut tail[0];
            a.apply(&z[k], w);
            for i in 0..=k {
                let hik = det_dot(w, &head[i]);
                h[i][k] = hik;
                for (wj, &vj) in w.iter_mut().zip(&head[i]) {
                    *wj -= hik * vj;
                }
            }
            let wn = norm2(w);
            h[k + 1][k] = wn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let d = h[k][k].hypot(h[k + 1][k]);
            if d == T::zero() {
                return Err(SolverError::Breakdown("zero Hessenberg column"));
            }
            cs[k] = h[k][k] / d;
            sn[k] = h[k + 1][k] / d;
            h[k][k] = d;
            h[k + 1][k] = T::zero();
            g[k + 1] = -sn[k] * g[k];
            g[k] = cs[k] * g[k];
            iterations += 1;
            k += 1;
            if wn > T::zero() {
                for wj in w.iter_mut() {
                    *wj /= wn;
                }
            }
            if g[k].abs() <= target || wn == T::zero() {
                break;
            }
        }
        // Back substitution for the k Krylov coefficients.
        let mut y = vec![T::zero(); k];
        for i in (0..k).rev() {
            let mut s = g[i];
            for j in (i + 1)..k {
                s -= h[i][j] * y[j];
            }
            y[i] = s / h[i][i];
        }
        for (j, &yj) in y.iter().enumerate() {
            for (xi, &zi) in x.iter_mut().zip(&z[j]) {
                *xi += yj * zi;
            }
        }
        residual(a, b, x, &mut r);
        let new_norm = norm2(&r);
        rnorm = new_norm;
    }
}

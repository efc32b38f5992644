//! Compressed sparse rows and the two Krylov solvers used by the stepper.

use crate::error::Error;
use crate::scalar::Real;

#[derive(Clone, Debug)]
pub struct Csr<T> {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    data: Vec<T>,
}

impl<T: Real> Csr<T> {
    /// Builds from unsorted row entries; duplicate columns are summed and
    /// exact zeros dropped.
    pub fn from_rows(cols: usize, rows: Vec<Vec<(usize, T)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for mut row in rows.iter().cloned() {
            row.sort_by_key(|e| e.0);
            let mut k = 0;
            while k < row.len() {
                let col = row[k].0;
                debug_assert!(col < cols);
                let mut v = T::zero();
                while k < row.len() && row[k].0 == col {
                    v = v + row[k].1;
                    k += 1;
                }
                if v != T::zero() {
                    indices.push(col);
                    data.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { rows: rows.len(), cols, indptr, indices, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.data[span].iter().copied())
    }

    /// `y = A x`.
    pub fn mul_into(&self, x: &[T], y: &mut [T]) {
        debug_assert_eq!(x.len(), self.cols);
        for (r, out) in y.iter_mut().enumerate().take(self.rows) {
            let mut s = T::zero();
            for k in self.indptr[r]..self.indptr[r + 1] {
                s = s + self.data[k] * x[self.indices[k]];
            }
            *out = s;
        }
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.rows)
            .map(|r| self.row(r).find(|&(c, _)| c == r).map(|e| e.1).unwrap_or_else(T::zero))
            .collect()
    }

    /// Structural and numerical symmetry up to `tol` relative to the largest entry.
    pub fn is_symmetric(&self, tol: T) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.data.iter().fold(T::zero(), |m, v| m.max(v.abs()));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                let t = self.row(c).find(|&(cc, _)| cc == r).map(|e| e.1).unwrap_or_else(T::zero);
                if (t - v).abs() > tol * scale {
                    return false;
                }
            }
        }
        true
    }
}

/// Outcome of a converged Krylov solve.
#[derive(Clone, Copy, Debug)]
pub struct SolveStats<T> {
    pub iterations: usize,
    pub residual: T,
}

fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |s, (&x, &y)| s + x * y)
}

fn norm<T: Real>(a: &[T]) -> T {
    dot(a, a).sqrt()
}

/// Jacobi-preconditioned conjugate gradients for SPD systems. `x` holds the
/// initial guess on entry.
pub fn pcg<T: Real>(a: &Csr<T>, inv_diag: &[T], b: &[T], x: &mut [T], tol: T, max_iter: usize) -> Result<SolveStats<T>, Error> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(SolveStats { iterations: 0, residual: T::zero() });
    }
    let mut r = vec![T::zero(); n];
    a.mul_into(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return Ok(SolveStats { iterations: 0, residual: rel });
    }
    let mut z: Vec<T> = r.iter().zip(inv_diag).map(|(&ri, &di)| ri * di).collect();
    let mut p = z.clone();
    let mut ap = vec![T::zero(); n];
    let mut rz = dot(&r, &z);
    for it in 1..=max_iter {
        a.mul_into(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for k in 0..n {
            x[k] = x[k] + alpha * p[k];
            r[k] = r[k] - alpha * ap[k];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok(SolveStats { iterations: it, residual: rel });
        }
        for k in 0..n {
            z[k] = r[k] * inv_diag[k];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for k in 0..n {
            p[k] = z[k] + beta * p[k];
        }
    }
    Err(Error::LinearSolve { iterations: max_iter, residual: rel.as_f64(), tol: tol.as_f64() })
}

/// Jacobi-preconditioned BiCGStab for general nonsingular systems.
pub fn bicgstab<T: Real>(a: &Csr<T>, inv_diag: &[T], b: &[T], x: &mut [T], tol: T, max_iter: usize) -> Result<SolveStats<T>, Error> {
    let n = b.len();
    let bnorm = norm(b);
    if bnorm == T::zero() {
        x.iter_mut().for_each(|v| *v = T::zero());
        return Ok(SolveStats { iterations: 0, residual: T::zero() });
    }
    let mut r = vec![T::zero(); n];
    a.mul_into(x, &mut r);
    for k in 0..n {
        r[k] = b[k] - r[k];
    }
    let mut rel = norm(&r) / bnorm;
    if rel <= tol {
        return Ok(SolveStats { iterations: 0, residual: rel });
    }
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
    let mut v = vec![T::zero(); n];
    let mut p = vec![T::zero(); n];
    let mut y = vec![T::zero(); n];
    let mut s = vec![T::zero(); n];
    let mut zz = vec![T::zero(); n];
    let mut t = vec![T::zero(); n];
    for it in 1..=max_iter {
        let rho_new = dot(&r_hat, &r);
        if rho_new == T::zero() || omega == T::zero() {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for k in 0..n {
            p[k] = r[k] + beta * (p[k] - omega * v[k]);
            y[k] = p[k] * inv_diag[k];
        }
        a.mul_into(&y, &mut v);
        alpha = rho / dot(&r_hat, &v);
        for k in 0..n {
            s[k] = r[k] - alpha * v[k];
        }
        if norm(&s) / bnorm <= tol {
            for k in 0..n {
                x[k] = x[k] + alpha * y[k];
            }
            return Ok(SolveStats { iterations: it, residual: norm(&s) / bnorm });
        }
        for k in 0..n {
            zz[k] = s[k] * inv_diag[k];
        }
        a.mul_into(&zz, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == T::zero() { T::zero() } else { dot(&t, &s) / tt };
        for k in 0..n {
            x[k] = x[k] + alpha * y[k] + omega * zz[k];
            r[k] = s[k] - omega * t[k];
        }
        rel = norm(&r) / bnorm;
        if rel <= tol {
            return Ok(SolveStats { iterations: it, residual: rel });
        }
    }
    Err(Error::LinearSolve { iterations: max_iter, residual: rel.as_f64(), tol: tol.as_f64() })
}

//! Compressed sparse row matrices and a conjugate gradient solver.

use crate::error::{Error, Result};
use crate::scalar::{dot, Real};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
}

impl<T: Real> CsrMatrix<T> {
    /// Square `n x n` matrix from (row, col, value) triplets; duplicates are summed
    /// in the order given.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, T)>) -> Self {
        triplets.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0; n + 1];
        let mut cols = Vec::with_capacity(triplets.len());
        let mut vals: Vec<T> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *vals.last_mut().expect("entry exists") += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for r in 0..n {
            row_ptr[r + 1] += row_ptr[r];
        }
        Self {
            n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, T)> + '_ {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        self.cols[span.clone()]
            .iter()
            .copied()
            .zip(self.vals[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.row(r)
            .find(|&(cc, _)| cc == c)
            .map(|(_, v)| v)
            .unwrap_or_else(T::zero)
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (r, yr) in y.iter_mut().enumerate().take(self.n) {
            let mut s = T::zero();
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yr = s;
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn row_sums(&self) -> Vec<T> {
        (0..self.n)
            .map(|r| self.row(r).map(|(_, v)| v).sum())
            .collect()
    }

    pub fn diagonal(&self) -> Vec<T> {
        (0..self.n).map(|r| self.get(r, r)).collect()
    }

    /// `a * self + b * other`; both matrices must share the sparsity pattern.
    pub fn linear_combination(&self, a: T, other: &Self, b: T) -> Self {
        assert_eq!(self.row_ptr, other.row_ptr, "sparsity patterns differ");
        assert_eq!(self.cols, other.cols, "sparsity patterns differ");
        Self {
            n: self.n,
            row_ptr: self.row_ptr.clone(),
            cols: self.cols.clone(),
            vals: self
                .vals
                .iter()
                .zip(&other.vals)
                .map(|(&x, &y)| a * x + b * y)
                .collect(),
        }
    }

    /// Symmetric elimination of the rows/columns flagged in `fixed`: their
    /// off-diagonal entries become zero and the diagonal one.
    pub fn with_dirichlet(&self, fixed: &[bool]) -> Self {
        let mut out = self.clone();
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                if fixed[r] || fixed[c] {
                    out.vals[k] = if r == c { T::one() } else { T::zero() };
                }
            }
        }
        out
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        (0..self.n).all(|r| self.row(r).all(|(c, v)| (v - self.get(c, r)).abs() <= tol))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgReport {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Solves `A x = b` for symmetric positive-definite `A` by conjugate gradients,
/// starting from the contents of `x`. `jacobi` enables diagonal preconditioning.
///
/// Converged when `||b - A x|| <= tol * ||b||`.
pub fn conjugate_gradient<T: Real>(
    a: &CsrMatrix<T>,
    b: &[T],
    x: &mut [T],
    tol: T,
    max_iter: usize,
    jacobi: bool,
) -> Result<CgReport> {
    let n = a.n();
    let bnorm = dot(b, b).sqrt();
    if bnorm == T::zero() {
        x.iter_mut().for_each(|xi| *xi = T::zero());
        return Ok(CgReport {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let inv_diag: Option<Vec<T>> = jacobi.then(|| {
        a.diagonal()
            .into_iter()
            .map(|d| {
                if d != T::zero() {
                    T::one() / d
                } else {
                    T::one()
                }
            })
            .collect()
    });
    let precond = |r: &[T], z: &mut [T]| match &inv_diag {
        Some(m) => z
            .iter_mut()
            .zip(r)
            .zip(m)
            .for_each(|((zi, &ri), &mi)| *zi = ri * mi),
        None => z.copy_from_slice(r),
    };

    let mut r = a.matvec(x);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z = vec![T::zero(); n];
    precond(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![T::zero(); n];
    let mut res = dot(&r, &r).sqrt() / bnorm;
    for it in 0..max_iter {
        if res <= tol {
            return Ok(CgReport {
                iterations: it,
                relative_residual: res.to_f64_lossy(),
            });
        }
        a.matvec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= T::zero() {
            return Err(Error::InvalidOperator(
                "conjugate gradients met a non-positive curvature direction".into(),
            ));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        precond(&r, &mut z);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        res = dot(&r, &r).sqrt() / bnorm;
    }
    if res <= tol {
        return Ok(CgReport {
            iterations: max_iter,
            relative_residual: res.to_f64_lossy(),
        });
    }
    Err(Error::SolverNotConverged {
        iterations: max_iter,
        residual: res.to_f64_lossy(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn laplacian_1d(n: usize) -> CsrMatrix<f64> {
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
        CsrMatrix::from_triplets(n, t)
    }

    #[test]
    fn triplets_sum_duplicates() {
        let a = CsrMatrix::from_triplets(2, vec![(0, 0, 1.0), (1, 0, 2.0), (0, 0, 3.0)]);
        assert_eq!(a.get(0, 0), 4.0);
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 1), 0.0);
        assert_eq!(a.nnz(), 2);
    }

    #[test]
    fn cg_solves_spd_system() {
        let a = laplacian_1d(50);
        let xs: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin()).collect();
        let b = a.matvec(&xs);
        for jacobi in [false, true] {
            let mut x = vec![0.0; 50];
            let rep = conjugate_gradient(&a, &b, &mut x, 1e-12, 500, jacobi).unwrap();
            assert!(rep.iterations <= 50);
            for i in 0..50 {
                assert!((x[i] - xs[i]).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cg_reports_non_convergence() {
        let a = laplacian_1d(100);
        let b = vec![1.0; 100];
        let mut x = vec![0.0; 100];
        let err = conjugate_gradient(&a, &b, &mut x, 1e-14, 3, false).unwrap_err();
        assert!(matches!(
            err,
            Error::SolverNotConverged { iterations: 3, .. }
        ));
    }

    #[test]
    fn dirichlet_elimination_keeps_symmetry() {
        let a = laplacian_1d(6);
        let mut fixed = vec![false; 6];
        fixed[0] = true;
        fixed[5] = true;
        let d = a.with_dirichlet(&fixed);
        assert!(d.is_symmetric(0.0));
        assert_eq!(d.get(0, 0), 1.0);
        assert_eq!(d.get(1, 0), 0.0);
        assert_eq!(d.get(1, 1), 2.0);
    }
}

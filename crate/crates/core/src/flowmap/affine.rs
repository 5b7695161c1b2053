//! Affine maps `x -> A x + b` in two and three dimensions.

use crate::error::{Error, Result};
use crate::geometry::{invert_dense, Point};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq)]
pub struct AffineMap<T> {
    dim: usize,
    /// Row-major `dim x dim`.
    matrix: Vec<T>,
    translation: Vec<T>,
}

impl<T: Real> AffineMap<T> {
    pub fn new(dim: usize, matrix: Vec<T>, translation: Vec<T>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!(
                "affine map must be 2D or 3D, got {dim}"
            )));
        }
        if matrix.len() != dim * dim || translation.len() != dim {
            return Err(Error::invalid(format!(
                "affine map of dimension {dim} needs {} matrix and {dim} translation entries",
                dim * dim
            )));
        }
        if matrix.iter().chain(&translation).any(|x| !x.is_finite()) {
            return Err(Error::invalid("affine map has non-finite entries"));
        }
        Ok(Self {
            dim,
            matrix,
            translation,
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaling(dim, T::one())
    }

    pub fn scaling(dim: usize, s: T) -> Self {
        let mut matrix = vec![T::zero(); dim * dim];
        for i in 0..dim {
            matrix[i * dim + i] = s;
        }
        Self {
            dim,
            matrix,
            translation: vec![T::zero(); dim],
        }
    }

    pub fn translation_by(shift: &[T]) -> Result<Self> {
        let mut m = Self::identity(shift.len());
        if shift.len() != 2 && shift.len() != 3 {
            return Err(Error::invalid("translation must be 2D or 3D"));
        }
        m.translation.copy_from_slice(shift);
        Ok(m)
    }

    /// Parses a homogeneous `(d+1) x (d+1)` matrix given by rows. The last row
    /// must be `[0, ..., 0, 1]`.
    pub fn from_homogeneous(rows: &[Vec<T>]) -> Result<Self> {
        let n = rows.len();
        if n != 3 && n != 4 {
            return Err(Error::invalid(format!(
                "homogeneous affine matrix must be 3x3 or 4x4, got {n} rows"
            )));
        }
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("homogeneous affine matrix is not square"));
        }
        let d = n - 1;
        let last = &rows[d];
        if last[..d].iter().any(|&x| x != T::zero()) || last[d] != T::one() {
            return Err(Error::invalid(
                "last row of a homogeneous affine matrix must be [0 .. 0 1]",
            ));
        }
        let mut matrix = Vec::with_capacity(d * d);
        let mut translation = Vec::with_capacity(d);
        for r in &rows[..d] {
            matrix.extend_from_slice(&r[..d]);
            translation.push(r[d]);
        }
        Self::new(d, matrix, translation)
    }

    pub fn to_homogeneous(&self) -> Vec<Vec<T>> {
        let d = self.dim;
        let mut rows: Vec<Vec<T>> = (0..d)
            .map(|i| {
                let mut r = self.matrix[i * d..(i + 1) * d].to_vec();
                r.push(self.translation[i]);
                r
            })
            .collect();
        let mut last = vec![T::zero(); d + 1];
        last[d] = T::one();
        rows.push(last);
        rows
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &[T] {
        &self.matrix
    }

    pub fn translation(&self) -> &[T] {
        &self.translation
    }

    pub fn determinant(&self) -> T {
        let a = &self.matrix;
        match self.dim {
            2 => a[0] * a[3] - a[1] * a[2],
            _ => {
                a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6])
                    + a[2] * (a[3] * a[7] - a[4] * a[6])
            }
        }
    }

    pub fn apply(&self, p: &Point<T>) -> Point<T> {
        let d = self.dim;
        let mut out = [T::zero(); 3];
        for i in 0..d {
            out[i] = (0..d).fold(self.translation[i], |acc, j| {
                acc + self.matrix[i * d + j] * p[j]
            });
        }
        out
    }

    /// `self ∘ inner`: applies `inner` first.
    pub fn compose(&self, inner: &Self) -> Result<Self> {
        if self.dim != inner.dim {
            return Err(Error::invalid(format!(
                "cannot compose affine maps of dimension {} and {}",
                self.dim, inner.dim
            )));
        }
        let d = self.dim;
        let mut matrix = vec![T::zero(); d * d];
        for i in 0..d {
            for j in 0..d {
                matrix[i * d + j] = (0..d).fold(T::zero(), |acc, k| {
                    acc + self.matrix[i * d + k] * inner.matrix[k * d + j]
                });
            }
        }
        let mut t = [T::zero(); 3];
        t[..d].copy_from_slice(&inner.translation);
        let translation = self.apply(&t)[..d].to_vec();
        Ok(Self {
            dim: d,
            matrix,
            translation,
        })
    }

    pub fn inverse(&self) -> Result<Self> {
        let d = self.dim;
        let det = self.determinant();
        let scale = self.matrix.iter().fold(T::zero(), |m, &x| m.max(x.abs()));
        if det == T::zero() || det.abs() <= T::epsilon() * scale.powi(d as i32) {
            return Err(Error::invalid(format!(
                "affine map is singular (det = {:e})",
                det.to_f64_lossy()
            )));
        }
        let inv = invert_dense(d, &self.matrix)
            .ok_or_else(|| Error::invalid("affine map is singular"))?;
        let translation = (0..d)
            .map(|i| {
                -(0..d).fold(T::zero(), |acc, j| {
                    acc + inv[i * d + j] * self.translation[j]
                })
            })
            .collect();
        Ok(Self {
            dim: d,
            matrix: inv,
            translation,
        })
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim)
    }
}

//! Finite element assembly: block-diagonal DG1 mass, CG1 mass/stiffness/lumped mass.

use rayon::prelude::*;

use crate::discretization::mesh::GridMesh;
use crate::error::{Error, Result};
use crate::geometry::invert_dense;
use crate::linalg::CsrMatrix;
use crate::scalar::Real;

/// Exact P1 element mass matrix entry on a simplex of measure `vol`:
/// `vol * (1 + delta_ij) / ((d + 1)(d + 2))`.
pub fn p1_mass_entry<T: Real>(dim: usize, vol: T, i: usize, j: usize) -> T {
    let denom = T::from_usize_lossy((dim + 1) * (dim + 2));
    if i == j {
        vol * T::lit(2.0) / denom
    } else {
        vol / denom
    }
}

/// Block-diagonal DG1 mass matrix: one `(d+1) x (d+1)` block per cell, with inverses.
#[derive(Debug, Clone)]
pub struct DgMass<T> {
    block_size: usize,
    blocks: Vec<T>,
    inverses: Vec<T>,
}

pub fn assemble_dg_mass<T: Real>(mesh: &GridMesh<T>) -> Result<DgMass<T>> {
    let d = mesh.dim();
    let n = d + 1;
    let per_cell: Result<Vec<(Vec<T>, Vec<T>)>> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let vol = mesh.volume(c);
            if !(vol > T::zero()) {
                return Err(Error::DegenerateCell {
                    cell: c,
                    volume: vol.to_f64_lossy(),
                });
            }
            let mut block = vec![T::zero(); n * n];
            for i in 0..n {
                for j in 0..n {
                    block[i * n + j] = p1_mass_entry(d, vol, i, j);
                }
            }
            let inv = invert_dense(n, &block).ok_or(Error::DegenerateCell {
                cell: c,
                volume: vol.to_f64_lossy(),
            })?;
            Ok((block, inv))
        })
        .collect();
    let per_cell = per_cell?;
    let mut blocks = Vec::with_capacity(mesh.num_cells() * n * n);
    let mut inverses = Vec::with_capacity(mesh.num_cells() * n * n);
    for (b, i) in per_cell {
        blocks.extend(b);
        inverses.extend(i);
    }
    Ok(DgMass {
        block_size: n,
        blocks,
        inverses,
    })
}

impl<T: Real> DgMass<T> {
    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn block(&self, c: usize) -> &[T] {
        let s = self.block_size * self.block_size;
        &self.blocks[c * s..(c + 1) * s]
    }

    pub fn inverse_block(&self, c: usize) -> &[T] {
        let s = self.block_size * self.block_size;
        &self.inverses[c * s..(c + 1) * s]
    }

    pub fn num_cells(&self) -> usize {
        self.blocks.len() / (self.block_size * self.block_size)
    }

    fn apply_blocks(&self, data: &[T], x: &[T], y: &mut [T]) {
        let n = self.block_size;
        y.par_chunks_mut(n).enumerate().for_each(|(c, yc)| {
            let blk = &data[c * n * n..(c + 1) * n * n];
            let xc = &x[c * n..(c + 1) * n];
            for i in 0..n {
                let mut s = T::zero();
                for j in 0..n {
                    s += blk[i * n + j] * xc[j];
                }
                yc[i] = s;
            }
        });
    }

    /// `y = M x`
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        self.apply_blocks(&self.blocks, x, y);
    }

    /// `y = M^{-1} x`
    pub fn apply_inverse(&self, x: &[T], y: &mut [T]) {
        self.apply_blocks(&self.inverses, x, y);
    }

    /// `x^T M y`, summed cell by cell in order.
    pub fn inner(&self, x: &[T], y: &[T]) -> T {
        let n = self.block_size;
        let mut total = T::zero();
        for c in 0..self.num_cells() {
            let blk = self.block(c);
            for i in 0..n {
                for j in 0..n {
                    total += x[c * n + i] * blk[i * n + j] * y[c * n + j];
                }
            }
        }
        total
    }
}

/// CG1 scalar operators on mesh vertices.
#[derive(Debug, Clone)]
pub struct CgOperators<T> {
    pub mass: CsrMatrix<T>,
    pub stiffness: CsrMatrix<T>,
    pub lumped_mass: Vec<T>,
}

pub fn assemble_cg_operators<T: Real>(mesh: &GridMesh<T>) -> Result<CgOperators<T>> {
    let d = mesh.dim();
    let n = d + 1;
    let mut mass = Vec::with_capacity(mesh.num_cells() * n * n);
    let mut stiff = Vec::with_capacity(mesh.num_cells() * n * n);
    for c in 0..mesh.num_cells() {
        let vol = mesh.volume(c);
        if !(vol > T::zero()) {
            return Err(Error::DegenerateCell {
                cell: c,
                volume: vol.to_f64_lossy(),
            });
        }
        let cell = mesh.cell(c);
        let g = mesh.grads(c);
        for i in 0..n {
            for j in 0..n {
                mass.push((cell[i], cell[j], p1_mass_entry(d, vol, i, j)));
                let gij = (0..d).fold(T::zero(), |a, k| a + g[i][k] * g[j][k]);
                stiff.push((cell[i], cell[j], vol * gij));
            }
        }
    }
    let nv = mesh.num_vertices();
    let mass = CsrMatrix::from_triplets(nv, mass);
    let stiffness = CsrMatrix::from_triplets(nv, stiff);
    let lumped_mass = mass.row_sums();
    if let Some(v) = lumped_mass.iter().position(|&m| !(m > T::zero())) {
        return Err(Error::InvalidOperator(format!(
            "lumped mass entry {v} is not positive"
        )));
    }
    Ok(CgOperators {
        mass,
        stiffness,
        lumped_mass,
    })
}

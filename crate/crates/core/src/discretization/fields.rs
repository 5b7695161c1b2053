//! DG1 scalar fields and CG1 vector fields on a [`GridMesh`].
//!
//! Coefficient layouts:
//! * DG scalar: cell-major, `coeffs[c * (d + 1) + l]` is the value at local vertex `l` of cell `c`.
//! * CG vector: vertex-major with interleaved components, `values[v * d + i]`.

use crate::discretization::mesh::{GridDims, GridMesh};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::scalar::Real;

/// Piecewise-linear, discontinuous scalar field (one linear polynomial per cell).
#[derive(Debug, Clone, PartialEq)]
pub struct DgScalarField<T> {
    dims: GridDims,
    coeffs: Vec<T>,
}

impl<T: Real> DgScalarField<T> {
    pub fn zeros(mesh: &GridMesh<T>) -> Self {
        Self {
            dims: mesh.dims(),
            coeffs: vec![T::zero(); mesh.num_cells() * mesh.nodes_per_cell()],
        }
    }

    pub fn constant(mesh: &GridMesh<T>, value: T) -> Self {
        Self {
            dims: mesh.dims(),
            coeffs: vec![value; mesh.num_cells() * mesh.nodes_per_cell()],
        }
    }

    pub fn from_coeffs(dims: GridDims, coeffs: Vec<T>) -> Result<Self> {
        let expected = dims.num_cells() * (dims.dim() + 1);
        if coeffs.len() != expected {
            return Err(Error::invalid(format!(
                "DG field needs {expected} coefficients, got {}",
                coeffs.len()
            )));
        }
        Ok(Self { dims, coeffs })
    }

    /// Nodal interpolation of `f` in every cell (exact for linear `f`).
    pub fn interpolate(mesh: &GridMesh<T>, f: impl Fn(&Point<T>) -> T) -> Self {
        let n = mesh.nodes_per_cell();
        let mut coeffs = Vec::with_capacity(mesh.num_cells() * n);
        for c in 0..mesh.num_cells() {
            for &v in mesh.cell(c) {
                coeffs.push(f(mesh.vertex(v)));
            }
        }
        Self {
            dims: mesh.dims(),
            coeffs,
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn coeffs(&self) -> &[T] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [T] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<T> {
        self.coeffs
    }

    pub fn cell_coeffs(&self, c: usize) -> &[T] {
        let n = self.dims.dim() + 1;
        &self.coeffs[c * n..(c + 1) * n]
    }

    pub fn check_mesh(&self, mesh: &GridMesh<T>) -> Result<()> {
        if self.dims != mesh.dims() {
            return Err(Error::invalid(format!(
                "field lives on grid {:?}, mesh is {:?}",
                self.dims.extents(),
                mesh.dims().extents()
            )));
        }
        Ok(())
    }

    /// Value of the cell polynomial of `cell` at barycentric coordinates `lam`.
    pub fn eval_bary(&self, cell: usize, lam: &[T; 4]) -> T {
        self.cell_coeffs(cell)
            .iter()
            .zip(lam)
            .fold(T::zero(), |acc, (&c, &l)| acc + c * l)
    }

    /// Evaluates at `p`. With `cell_hint` the polynomial of that cell is used
    /// (this selects the trace on a facet); otherwise the containing cell is located.
    pub fn evaluate(
        &self,
        mesh: &GridMesh<T>,
        p: &Point<T>,
        cell_hint: Option<usize>,
    ) -> Result<T> {
        self.check_mesh(mesh)?;
        let (cell, lam) = match cell_hint {
            Some(c) if c < mesh.num_cells() => (c, mesh.barycentric(c, p)),
            Some(c) => return Err(Error::invalid(format!("cell hint {c} out of range"))),
            None => mesh.locate(p)?,
        };
        Ok(self.eval_bary(cell, &lam))
    }

    /// `integral over the domain`, exact for DG1 fields.
    pub fn integrate(&self, mesh: &GridMesh<T>) -> T {
        let n = mesh.nodes_per_cell();
        let scale = T::one() / T::from_usize_lossy(n);
        (0..mesh.num_cells())
            .map(|c| mesh.volume(c) * scale * self.cell_coeffs(c).iter().copied().sum::<T>())
            .sum()
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|x| x.is_finite())
    }
}

/// Embeds a voxel image (x fastest) as a cell-wise constant DG1 field.
pub fn voxel_image_to_dg<T: Real>(image: &[T], mesh: &GridMesh<T>) -> Result<DgScalarField<T>> {
    let dims = mesh.dims();
    if image.len() != dims.num_voxels() {
        return Err(Error::invalid(format!(
            "image has {} voxels, mesh {:?} has {}",
            image.len(),
            dims.extents(),
            dims.num_voxels()
        )));
    }
    let n = mesh.nodes_per_cell();
    let per = dims.cells_per_voxel();
    let mut coeffs = Vec::with_capacity(mesh.num_cells() * n);
    for &value in image {
        coeffs.extend(std::iter::repeat_n(value, per * n));
    }
    Ok(DgScalarField { dims, coeffs })
}

/// Continuous piecewise-linear vector field given by nodal vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct CgVectorField<T> {
    dims: GridDims,
    values: Vec<T>,
    dirichlet_zero: bool,
}

impl<T: Real> CgVectorField<T> {
    pub fn zeros(mesh: &GridMesh<T>, dirichlet_zero: bool) -> Self {
        Self {
            dims: mesh.dims(),
            values: vec![T::zero(); mesh.num_vertices() * mesh.dim()],
            dirichlet_zero,
        }
    }

    /// Wraps nodal values. With `dirichlet_zero` the boundary values must be exactly zero.
    pub fn from_values(mesh: &GridMesh<T>, values: Vec<T>, dirichlet_zero: bool) -> Result<Self> {
        let d = mesh.dim();
        if values.len() != mesh.num_vertices() * d {
            return Err(Error::invalid(format!(
                "vector field needs {} values, got {}",
                mesh.num_vertices() * d,
                values.len()
            )));
        }
        if dirichlet_zero {
            for v in 0..mesh.num_vertices() {
                if mesh.is_boundary_vertex(v)
                    && values[v * d..(v + 1) * d].iter().any(|&x| x != T::zero())
                {
                    return Err(Error::invalid(format!(
                        "boundary vertex {v} carries a nonzero vector in a Dirichlet-zero field"
                    )));
                }
            }
        }
        Ok(Self {
            dims: mesh.dims(),
            values,
            dirichlet_zero,
        })
    }

    /// Nodal interpolation; boundary vertices are zeroed when `dirichlet_zero`.
    pub fn interpolate(
        mesh: &GridMesh<T>,
        f: impl Fn(&Point<T>) -> Point<T>,
        dirichlet_zero: bool,
    ) -> Self {
        let d = mesh.dim();
        let mut values = Vec::with_capacity(mesh.num_vertices() * d);
        for v in 0..mesh.num_vertices() {
            let val = if dirichlet_zero && mesh.is_boundary_vertex(v) {
                [T::zero(); 3]
            } else {
                f(mesh.vertex(v))
            };
            values.extend_from_slice(&val[..d]);
        }
        Self {
            dims: mesh.dims(),
            values,
            dirichlet_zero,
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn dirichlet_zero(&self) -> bool {
        self.dirichlet_zero
    }

    pub fn check_mesh(&self, mesh: &GridMesh<T>) -> Result<()> {
        if self.dims != mesh.dims() {
            return Err(Error::invalid(format!(
                "vector field lives on grid {:?}, mesh is {:?}",
                self.dims.extents(),
                mesh.dims().extents()
            )));
        }
        Ok(())
    }

    /// Nodal vector at vertex `v` (padded to three components).
    pub fn node(&self, v: usize) -> Point<T> {
        let d = self.dims.dim();
        let mut p = [T::zero(); 3];
        p[..d].copy_from_slice(&self.values[v * d..(v + 1) * d]);
        p
    }

    pub fn eval_bary(&self, mesh: &GridMesh<T>, cell: usize, lam: &[T; 4]) -> Point<T> {
        let d = self.dims.dim();
        let mut out = [T::zero(); 3];
        for (l, &v) in mesh.cell(cell).iter().enumerate() {
            for i in 0..d {
                out[i] += lam[l] * self.values[v * d + i];
            }
        }
        out
    }

    pub fn evaluate(
        &self,
        mesh: &GridMesh<T>,
        p: &Point<T>,
        cell_hint: Option<usize>,
    ) -> Result<Point<T>> {
        self.check_mesh(mesh)?;
        let (cell, lam) = match cell_hint {
            Some(c) if c < mesh.num_cells() => (c, mesh.barycentric(c, p)),
            Some(c) => return Err(Error::invalid(format!("cell hint {c} out of range"))),
            None => mesh.locate(p)?,
        };
        Ok(self.eval_bary(mesh, cell, &lam))
    }

    /// Maximum Euclidean norm of the nodal vectors (the sup norm of the CG1 field).
    pub fn max_norm(&self) -> T {
        let d = self.dims.dim();
        self.values
            .chunks(d)
            .map(|c| c.iter().fold(T::zero(), |a, &x| a + x * x).sqrt())
            .fold(T::zero(), T::max)
    }

    /// Field with all vectors negated (same boundary flag).
    pub fn negated(&self) -> Self {
        Self {
            dims: self.dims,
            values: self.values.iter().map(|&x| -x).collect(),
            dirichlet_zero: self.dirichlet_zero,
        }
    }

    pub fn scaled(&self, s: T) -> Self {
        Self {
            dims: self.dims,
            values: self.values.iter().map(|&x| s * x).collect(),
            dirichlet_zero: self.dirichlet_zero,
        }
    }
}

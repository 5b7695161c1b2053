//! DG scalar and CG vector field files.
//!
//! `dg-scalar`: `d + 1` coefficients per cell in cell order (voxel by voxel,
//! x fastest, the cells of one voxel contiguous). `cg-vector`: `d` components
//! per vertex in vertex order (x fastest).

use std::path::Path;

use crate::discretization::{CgVectorField, DgScalarField, GridDims, GridMesh};
use crate::error::{Error, Result};

use super::image::{read_with_header, write_with_header, Header};

const DG_ORDERING: &str = "cell-major, d+1 vertex coefficients per cell";
const CG_ORDERING: &str = "vertex-major, d components per vertex";

pub fn write_dg_field(path: &Path, field: &DgScalarField<f64>) -> Result<()> {
    let dims = field.dims();
    let h = Header::new(
        "dg-scalar",
        dims.extents(),
        1,
        DG_ORDERING,
        field.coeffs().len(),
    );
    write_with_header(path, h, field.coeffs())
}

pub fn read_dg_field(path: &Path) -> Result<DgScalarField<f64>> {
    let (h, values) = read_with_header(path, "dg-scalar")?;
    let dims = GridDims::new(&h.dims).map_err(|e| Error::Format(e.to_string()))?;
    DgScalarField::from_coeffs(dims, values).map_err(|e| Error::Format(e.to_string()))
}

pub fn write_cg_field(path: &Path, field: &CgVectorField<f64>) -> Result<()> {
    let dims = field.dims();
    let mut h = Header::new(
        "cg-vector",
        dims.extents(),
        dims.dim(),
        CG_ORDERING,
        field.values().len(),
    );
    h.dirichlet_zero = Some(field.dirichlet_zero());
    write_with_header(path, h, field.values())
}

/// Reads a CG vector field; `mesh` must match the stored grid.
pub fn read_cg_field(path: &Path, mesh: &GridMesh<f64>) -> Result<CgVectorField<f64>> {
    let (h, values) = read_with_header(path, "cg-vector")?;
    if h.dims.as_slice() != mesh.dims().extents() {
        return Err(Error::Format(format!(
            "field grid {:?} does not match mesh {:?}",
            h.dims,
            mesh.dims().extents()
        )));
    }
    if h.components != mesh.dim() {
        return Err(Error::Format(format!(
            "field has {} components, mesh is {}D",
            h.components,
            mesh.dim()
        )));
    }
    CgVectorField::from_values(mesh, values, h.dirichlet_zero.unwrap_or(false))
        .map_err(|e| Error::Format(e.to_string()))
}

/// Grid extents stored in a field header.
pub fn field_dims(path: &Path) -> Result<Vec<usize>> {
    let h: Header = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    Ok(h.dims)
}

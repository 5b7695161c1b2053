//! Meshes, function spaces, quadrature and finite element assembly.

pub mod assembly;
pub mod fields;
pub mod mesh;
pub mod quadrature;

pub use assembly::{assemble_cg_operators, assemble_dg_mass, CgOperators, DgMass};
pub use fields::{voxel_image_to_dg, CgVectorField, DgScalarField};
pub use mesh::{build_box_mesh, BoundaryFacet, Facet, FacetRef, GridDims, GridMesh};
pub use quadrature::QuadratureRule;

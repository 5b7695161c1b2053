//! File formats, preprocessing and synthetic data.

pub mod config;
pub mod field;
pub mod image;
pub mod meshfile;
pub mod synthetic;

pub use config::{
    read_affine, read_trace_csv, write_affine, write_trace_csv, AffinePaths, RunConfig,
    TRACE_COLUMNS,
};
pub use field::{field_dims, read_cg_field, read_dg_field, write_cg_field, write_dg_field};
pub use image::{
    crop_and_pad, normalize_percentile, read_image, read_pgm16, write_image, write_pgm16,
    CropRecord, Header, ImageVolume, PAD_VOXELS,
};
pub use meshfile::{
    mesh_to_vtk, parse_mesh, read_mesh, write_mesh, write_vtk, MESH_HEADER, VTK_VERSION_LINE,
};
pub use synthetic::{make_synthetic, GroundTruth, SyntheticCase, SyntheticPair, SyntheticParams};

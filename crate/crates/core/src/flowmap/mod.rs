//! Deformation maps from optimized velocities, affine maps, and mesh transformation.

pub mod affine;
pub mod map;
pub mod mesh;

pub use affine::AffineMap;
pub use map::{
    apply_map, flow_map, trace_points, Backend, DeformationMap, Direction, FlowConfig, FlowSegment,
    MapRef, Provenance, DEFAULT_STEPS_PER_FIELD,
};
pub use mesh::{
    ball_mesh, mesh_quality, radius_ratio, surface_roughness, transform_mesh, MeshTransform,
    QualityReport, SimplicialMesh, TransformResult,
};

//! Image registration with velocity fields constrained by a DG1 upwind
//! transport equation, and mesh transformation with the learned flow.
//!
//! The numerical core is generic over the scalar type (`f32` or `f64`, see
//! [`Real`]). File formats and the pipeline work in `f64`; the aliases below
//! name the `f64` instantiations.

// `!(x > 0)` is used on purpose so NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod adjoint;
pub mod control;
pub mod discretization;
pub mod error;
pub mod flowmap;
pub mod geometry;
pub mod io;
pub mod linalg;
pub mod objective;
pub mod optimize;
pub mod pipeline;
pub mod scalar;
pub mod transport;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Mesh = discretization::GridMesh<f64>;
pub type DgField = discretization::DgScalarField<f64>;
pub type CgField = discretization::CgVectorField<f64>;
pub type Control = control::ControlVector<f64>;
pub type Affine = flowmap::AffineMap<f64>;
pub type Deformation = flowmap::DeformationMap<f64>;
pub type TetMesh = flowmap::SimplicialMesh<f64>;
pub type Stage = optimize::StageConfig<f64>;
pub type Registration = optimize::RegistrationResult<f64>;

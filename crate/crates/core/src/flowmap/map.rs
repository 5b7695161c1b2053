//! Deformation maps generated by sequences of stationary velocity fields.
//!
//! `Forward` follows the particle flow `x' = +v_1`, then `+v_2`, ... `+v_N`,
//! each for the stage's final time. `Inverse` undoes it: `-v_N` first, `-v_1`
//! last. Points pushed by `Forward` follow the level sets of the image carried
//! by the transport solver.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::discretization::{assemble_cg_operators, CgVectorField, GridDims, GridMesh};
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::scalar::Real;

use super::affine::AffineMap;

pub const DEFAULT_STEPS_PER_FIELD: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Forward => "forward",
            Self::Inverse => "inverse",
        }
    }
}

impl FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "inverse" => Ok(Self::Inverse),
            other => Err(Error::invalid(format!("unknown direction '{other}'"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Backend {
    /// Classical RK4 integration of each vertex trajectory through the CG1 velocity.
    #[default]
    Trace,
    /// CG1 Galerkin transport of the coordinate functions with midpoint RK2.
    CgTransport,
}

impl Backend {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Trace => "trace",
            Self::CgTransport => "cg-transport",
        }
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "trace" => Ok(Self::Trace),
            "cg-transport" => Ok(Self::CgTransport),
            other => Err(Error::invalid(format!("unknown flow backend '{other}'"))),
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlowConfig<T> {
    pub steps_per_field: usize,
    /// Flow time per field.
    pub final_time: T,
    pub backend: Backend,
}

impl<T: Real> Default for FlowConfig<T> {
    fn default() -> Self {
        Self {
            steps_per_field: DEFAULT_STEPS_PER_FIELD,
            final_time: T::one(),
            backend: Backend::Trace,
        }
    }
}

impl<T: Real> FlowConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.steps_per_field == 0 {
            return Err(Error::invalid("steps_per_field must be at least 1"));
        }
        if !(self.final_time > T::zero()) || !self.final_time.is_finite() {
            return Err(Error::invalid("flow time must be positive and finite"));
        }
        Ok(())
    }
}

/// One flow segment applied by a map: field index and sign of the velocity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlowSegment {
    pub field: usize,
    pub sign: i8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance<T> {
    pub direction: Direction,
    pub backend: Backend,
    pub steps_per_field: usize,
    pub final_time: T,
    /// Segments in application order.
    pub segments: Vec<FlowSegment>,
}

impl<T: Real> Provenance<T> {
    fn new(direction: Direction, cfg: &FlowConfig<T>, n: usize) -> Self {
        let segments = match direction {
            Direction::Forward => (0..n).map(|field| FlowSegment { field, sign: 1 }).collect(),
            Direction::Inverse => (0..n)
                .rev()
                .map(|field| FlowSegment { field, sign: -1 })
                .collect(),
        };
        Self {
            direction,
            backend: cfg.backend,
            steps_per_field: cfg.steps_per_field,
            final_time: cfg.final_time,
            segments,
        }
    }
}

/// CG1 field of mapped coordinates on a grid mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationMap<T> {
    dims: GridDims,
    coords: Vec<T>,
    provenance: Provenance<T>,
    /// Vertices whose trajectory had to be clamped back into the box.
    clamped: Vec<usize>,
}

impl<T: Real> DeformationMap<T> {
    pub fn identity(mesh: &GridMesh<T>, direction: Direction) -> Self {
        let d = mesh.dim();
        let coords = mesh
            .vertices()
            .iter()
            .flat_map(|p| p[..d].to_vec())
            .collect();
        Self {
            dims: mesh.dims(),
            coords,
            provenance: Provenance::new(direction, &FlowConfig::default(), 0),
            clamped: Vec::new(),
        }
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    /// Mapped coordinates, `dim` interleaved entries per vertex.
    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn node(&self, v: usize) -> Point<T> {
        let d = self.dims.dim();
        let mut p = [T::zero(); 3];
        p[..d].copy_from_slice(&self.coords[v * d..(v + 1) * d]);
        p
    }

    pub fn provenance(&self) -> &Provenance<T> {
        &self.provenance
    }

    pub fn direction(&self) -> Direction {
        self.provenance.direction
    }

    pub fn clamped(&self) -> &[usize] {
        &self.clamped
    }

    /// Largest nodal displacement `|eta(x) - x|`.
    pub fn max_displacement(&self, mesh: &GridMesh<T>) -> T {
        (0..mesh.num_vertices())
            .map(|v| distance(&self.node(v), mesh.vertex(v), mesh.dim()))
            .fold(T::zero(), T::max)
    }

    /// CG1 interpolation of the map at `p`; points outside the box are clamped
    /// and reported in the second return value.
    pub fn evaluate(&self, mesh: &GridMesh<T>, p: &Point<T>) -> Result<(Point<T>, bool)> {
        if self.dims != mesh.dims() {
            return Err(Error::invalid(
                "deformation map and mesh live on different grids",
            ));
        }
        let (q, clamped) = clamp_to_box(mesh, p)?;
        let (cell, lam) = mesh.locate(&q)?;
        let d = mesh.dim();
        let mut out = [T::zero(); 3];
        for (l, &v) in mesh.cell(cell).iter().enumerate() {
            for i in 0..d {
                out[i] += lam[l] * self.coords[v * d + i];
            }
        }
        Ok((out, clamped))
    }
}

/// A point map usable in a composition: an affine map or a deformation map.
#[derive(Debug, Clone, Copy)]
pub enum MapRef<'a, T> {
    Affine(&'a AffineMap<T>),
    Flow(&'a DeformationMap<T>, &'a GridMesh<T>),
}

/// Applies `maps` in order (the first entry acts first) to every point.
/// Returns the mapped points and the indices of points clamped into a flow
/// map's domain.
pub fn apply_map<T: Real>(
    maps: &[MapRef<'_, T>],
    points: &[Point<T>],
) -> Result<(Vec<Point<T>>, Vec<usize>)> {
    let mut out = points.to_vec();
    let mut flagged = vec![false; points.len()];
    for m in maps {
        match m {
            MapRef::Affine(a) => out.iter_mut().for_each(|p| *p = a.apply(p)),
            MapRef::Flow(map, mesh) => {
                let mapped: Vec<Result<(Point<T>, bool)>> =
                    out.par_iter().map(|p| map.evaluate(mesh, p)).collect();
                for (k, r) in mapped.into_iter().enumerate() {
                    let (q, c) = r?;
                    out[k] = q;
                    flagged[k] |= c;
                }
            }
        }
    }
    let flagged = flagged
        .iter()
        .enumerate()
        .filter(|(_, &f)| f)
        .map(|(k, _)| k)
        .collect();
    Ok((out, flagged))
}

fn distance<T: Real>(a: &Point<T>, b: &Point<T>, d: usize) -> T {
    (0..d)
        .fold(T::zero(), |s, i| s + (a[i] - b[i]) * (a[i] - b[i]))
        .sqrt()
}

fn clamp_to_box<T: Real>(mesh: &GridMesh<T>, p: &Point<T>) -> Result<(Point<T>, bool)> {
    let d = mesh.dim();
    if p[..d].iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericBlowup {
            pass: "flow map",
            step: 0,
            max_abs: f64::INFINITY,
        });
    }
    let mut q = *p;
    let mut clamped = false;
    for (i, &n) in mesh.dims().extents().iter().enumerate() {
        let hi = T::from_usize_lossy(n);
        if q[i] < T::zero() {
            q[i] = T::zero();
            clamped = true;
        } else if q[i] > hi {
            q[i] = hi;
            clamped = true;
        }
    }
    Ok((q, clamped))
}

fn check_velocities<T: Real>(mesh: &GridMesh<T>, velocities: &[CgVectorField<T>]) -> Result<()> {
    for (i, v) in velocities.iter().enumerate() {
        v.check_mesh(mesh)
            .map_err(|e| Error::invalid(format!("velocity {}: {e}", i + 1)))?;
        if v.values().iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "velocity {} has non-finite values",
                i + 1
            )));
        }
    }
    Ok(())
}

/// Velocity at `p`, zero outside the box.
fn sample<T: Real>(mesh: &GridMesh<T>, v: &CgVectorField<T>, sign: T, p: &Point<T>) -> Point<T> {
    if !mesh.contains(p) {
        return [T::zero(); 3];
    }
    match mesh.locate(p) {
        Ok((cell, lam)) => {
            let w = v.eval_bary(mesh, cell, &lam);
            [sign * w[0], sign * w[1], sign * w[2]]
        }
        Err(_) => [T::zero(); 3],
    }
}

/// Integrates a single point through the segments of `provenance`.
fn trace_point<T: Real>(
    mesh: &GridMesh<T>,
    velocities: &[CgVectorField<T>],
    provenance: &Provenance<T>,
    start: &Point<T>,
) -> Result<(Point<T>, bool)> {
    let d = mesh.dim();
    let (mut p, mut clamped) = clamp_to_box(mesh, start)?;
    let h = provenance.final_time / T::from_usize_lossy(provenance.steps_per_field);
    let half = h * T::lit(0.5);
    let sixth = h / T::lit(6.0);
    let two = T::lit(2.0);
    let shifted = |p: &Point<T>, k: &Point<T>, s: T| -> Point<T> {
        let mut q = *p;
        for i in 0..d {
            q[i] += s * k[i];
        }
        q
    };
    for seg in &provenance.segments {
        let v = &velocities[seg.field];
        let sign = if seg.sign > 0 { T::one() } else { -T::one() };
        for step in 0..provenance.steps_per_field {
            let k1 = sample(mesh, v, sign, &p);
            let k2 = sample(mesh, v, sign, &shifted(&p, &k1, half));
            let k3 = sample(mesh, v, sign, &shifted(&p, &k2, half));
            let k4 = sample(mesh, v, sign, &shifted(&p, &k3, h));
            for i in 0..d {
                p[i] += sixth * (k1[i] + two * k2[i] + two * k3[i] + k4[i]);
            }
            if p[..d].iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericBlowup {
                    pass: "flow map",
                    step,
                    max_abs: f64::INFINITY,
                });
            }
            let (q, c) = clamp_to_box(mesh, &p)?;
            p = q;
            clamped |= c;
        }
    }
    Ok((p, clamped))
}

/// Traces arbitrary points through the flow of `velocities` (vertex ODE with
/// RK4). Returns the end points and the indices of clamped trajectories.
pub fn trace_points<T: Real>(
    mesh: &GridMesh<T>,
    velocities: &[CgVectorField<T>],
    direction: Direction,
    cfg: &FlowConfig<T>,
    points: &[Point<T>],
) -> Result<(Vec<Point<T>>, Vec<usize>)> {
    cfg.validate()?;
    check_velocities(mesh, velocities)?;
    let prov = Provenance::new(direction, cfg, velocities.len());
    let traced: Vec<Result<(Point<T>, bool)>> = points
        .par_iter()
        .map(|p| trace_point(mesh, velocities, &prov, p))
        .collect();
    let mut out = Vec::with_capacity(points.len());
    let mut clamped = Vec::new();
    for (k, r) in traced.into_iter().enumerate() {
        let (q, c) = r?;
        if c {
            clamped.push(k);
        }
        out.push(q);
    }
    Ok((out, clamped))
}

/// Builds the deformation map of `velocities` on the grid vertices.
pub fn flow_map<T: Real>(
    mesh: &GridMesh<T>,
    velocities: &[CgVectorField<T>],
    direction: Direction,
    cfg: &FlowConfig<T>,
) -> Result<DeformationMap<T>> {
    cfg.validate()?;
    check_velocities(mesh, velocities)?;
    let provenance = Provenance::new(direction, cfg, velocities.len());
    let d = mesh.dim();
    let (coords, clamped) = match cfg.backend {
        Backend::Trace => {
            let (pts, clamped) = trace_points(mesh, velocities, direction, cfg, mesh.vertices())?;
            (pts.iter().flat_map(|p| p[..d].to_vec()).collect(), clamped)
        }
        Backend::CgTransport => cg_transport(mesh, velocities, &provenance)?,
    };
    Ok(DeformationMap {
        dims: mesh.dims(),
        coords,
        provenance,
        clamped,
    })
}

/// Convection matrix `A_ij = int phi_i (w . grad phi_j)` of a CG1 field `w`.
fn convection_matrix<T: Real>(mesh: &GridMesh<T>, w: &CgVectorField<T>, sign: T) -> CsrMatrix<T> {
    let d = mesh.dim();
    let n = d + 1;
    let mut trip = Vec::with_capacity(mesh.num_cells() * n * n);
    for c in 0..mesh.num_cells() {
        let cell = mesh.cell(c);
        let g = mesh.grads(c);
        let vol = mesh.volume(c);
        let wk: Vec<Point<T>> = cell.iter().map(|&v| w.node(v)).collect();
        for i in 0..n {
            for j in 0..n {
                let mut a = T::zero();
                for k in 0..n {
                    let m = crate::discretization::assembly::p1_mass_entry(d, vol, i, k);
                    a += m * (0..d).fold(T::zero(), |s, l| s + wk[k][l] * g[j][l]);
                }
                trip.push((cell[i], cell[j], sign * a));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_vertices(), trip)
}

/// Transports the coordinate functions. The coordinate field carried by `w`
/// for time `T` is the identity pulled back along the flow of `-w`, so a
/// segment flowing along `s v_i` uses `w = -s v_i`, and segments are processed
/// in reverse application order.
fn cg_transport<T: Real>(
    mesh: &GridMesh<T>,
    velocities: &[CgVectorField<T>],
    prov: &Provenance<T>,
) -> Result<(Vec<T>, Vec<usize>)> {
    let d = mesh.dim();
    let nv = mesh.num_vertices();
    let ops = assemble_cg_operators(mesh)?;
    let fixed = mesh.boundary_mask();
    let mass = ops.mass.with_dirichlet(fixed);
    let mut x: Vec<Vec<T>> = (0..d)
        .map(|i| mesh.vertices().iter().map(|p| p[i]).collect())
        .collect();
    let dt = prov.final_time / T::from_usize_lossy(prov.steps_per_field);
    let half = dt * T::lit(0.5);
    let tol = T::lit(1e-12);
    let rhs_of = |a: &CsrMatrix<T>, comp: &[T], out: &mut Vec<T>| -> Result<()> {
        let r = a.matvec(comp);
        let mut b: Vec<T> = r.into_iter().map(|x| -x).collect();
        for (k, &f) in fixed.iter().enumerate() {
            if f {
                b[k] = T::zero();
            }
        }
        let mut sol = vec![T::zero(); nv];
        conjugate_gradient(&mass, &b, &mut sol, tol, 10 * nv + 100, true)?;
        *out = sol;
        Ok(())
    };
    for seg in prov.segments.iter().rev() {
        let sign = if seg.sign > 0 { -T::one() } else { T::one() };
        let a = convection_matrix(mesh, &velocities[seg.field], sign);
        for step in 0..prov.steps_per_field {
            let updated: Vec<Result<Vec<T>>> = x
                .par_iter()
                .map(|comp| {
                    let mut k = Vec::new();
                    rhs_of(&a, comp, &mut k)?;
                    let mid: Vec<T> = comp.iter().zip(&k).map(|(&c, &s)| c + half * s).collect();
                    rhs_of(&a, &mid, &mut k)?;
                    Ok(comp.iter().zip(&k).map(|(&c, &s)| c + dt * s).collect())
                })
                .collect();
            for (i, u) in updated.into_iter().enumerate() {
                x[i] = u?;
            }
            if let Some(bad) = x.iter().flatten().find(|v| !v.is_finite()) {
                return Err(Error::NumericBlowup {
                    pass: "coordinate transport",
                    step,
                    max_abs: bad.to_f64_lossy().abs(),
                });
            }
        }
    }
    let mut coords = vec![T::zero(); nv * d];
    let mut clamped = Vec::new();
    for v in 0..nv {
        let mut p = [T::zero(); 3];
        for i in 0..d {
            p[i] = x[i][v];
        }
        let (q, c) = clamp_to_box(mesh, &p)?;
        if c {
            clamped.push(v);
        }
        coords[v * d..(v + 1) * d].copy_from_slice(&q[..d]);
    }
    Ok((coords, clamped))
}

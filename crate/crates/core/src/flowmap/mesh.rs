//! Unstructured simplicial meshes, their quality, and the coordinate pipeline
//! that carries them through affine maps and velocity flows.

use std::collections::HashMap;

use crate::discretization::{CgVectorField, GridMesh};
use crate::error::{Error, Result};
use crate::geometry::{self, cross, dot3, norm3, sub, Point};
use crate::scalar::Real;

use super::affine::AffineMap;
use super::map::{apply_map, flow_map, trace_points, Backend, Direction, FlowConfig, MapRef};

#[derive(Debug, Clone, PartialEq)]
pub struct SimplicialMesh<T> {
    dim: usize,
    vertices: Vec<Point<T>>,
    cells: Vec<Vec<usize>>,
}

impl<T: Real> SimplicialMesh<T> {
    pub fn new(dim: usize, vertices: Vec<Point<T>>, cells: Vec<Vec<usize>>) -> Result<Self> {
        if dim != 2 && dim != 3 {
            return Err(Error::invalid(format!("mesh must be 2D or 3D, got {dim}")));
        }
        for (c, cell) in cells.iter().enumerate() {
            if cell.len() != dim + 1 {
                return Err(Error::invalid(format!(
                    "cell {c} has {} vertices, expected {}",
                    cell.len(),
                    dim + 1
                )));
            }
            if let Some(&v) = cell.iter().find(|&&v| v >= vertices.len()) {
                return Err(Error::invalid(format!(
                    "cell {c} references missing vertex {v}"
                )));
            }
        }
        if vertices
            .iter()
            .any(|p| p[..dim].iter().any(|x| !x.is_finite()))
        {
            return Err(Error::invalid("mesh has non-finite vertex coordinates"));
        }
        Ok(Self {
            dim,
            vertices,
            cells,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn cells(&self) -> &[Vec<usize>] {
        &self.cells
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    /// Same connectivity, new vertex positions.
    pub fn with_vertices(&self, vertices: Vec<Point<T>>) -> Result<Self> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::invalid("vertex count changed"));
        }
        Self::new(self.dim, vertices, self.cells.clone())
    }

    fn cell_points(&self, c: usize) -> Vec<Point<T>> {
        self.cells[c].iter().map(|&v| self.vertices[v]).collect()
    }

    pub fn signed_volume(&self, c: usize) -> T {
        geometry::signed_measure(self.dim, &self.cell_points(c))
    }

    /// Boundary facets (faces owned by one cell), oriented with outward normals.
    pub fn boundary_facets(&self) -> Vec<Vec<usize>> {
        let d = self.dim;
        let mut count: HashMap<Vec<usize>, (usize, Vec<usize>)> = HashMap::new();
        for cell in &self.cells {
            for opp in 0..=d {
                let face: Vec<usize> = (0..=d).filter(|&l| l != opp).map(|l| cell[l]).collect();
                let mut key = face.clone();
                key.sort_unstable();
                let e = count.entry(key).or_insert((0, Vec::new()));
                e.0 += 1;
                let mut oriented = face;
                // Orientation: outward normal points away from the opposite vertex.
                let fp: Vec<Point<T>> = oriented.iter().map(|&v| self.vertices[v]).collect();
                let n = raw_normal(d, &fp);
                if dot3(&n, &sub(&self.vertices[cell[opp]], &fp[0])) > T::zero() {
                    oriented.swap(0, 1);
                }
                e.1 = oriented;
            }
        }
        let mut out: Vec<Vec<usize>> = count
            .into_values()
            .filter(|(n, _)| *n == 1)
            .map(|(_, f)| f)
            .collect();
        out.sort();
        out
    }
}

fn raw_normal<T: Real>(d: usize, p: &[Point<T>]) -> Point<T> {
    if d == 2 {
        let t = sub(&p[1], &p[0]);
        [t[1], -t[0], T::zero()]
    } else {
        cross(&sub(&p[1], &p[0]), &sub(&p[2], &p[0]))
    }
}

/// `d * inradius / circumradius`, in `[0, 1]`; zero for degenerate cells.
pub fn radius_ratio<T: Real>(dim: usize, p: &[Point<T>]) -> T {
    let vol = geometry::signed_measure(dim, p).abs();
    let scale = (1..=dim).fold(T::zero(), |m, k| m.max(norm3(&sub(&p[k], &p[0]))));
    if !(vol > T::epsilon() * T::lit(16.0) * scale.powi(dim as i32)) {
        return T::zero();
    }
    if dim == 2 {
        let a = norm3(&sub(&p[1], &p[2]));
        let b = norm3(&sub(&p[0], &p[2]));
        let c = norm3(&sub(&p[0], &p[1]));
        return T::lit(16.0) * vol * vol / ((a + b + c) * a * b * c);
    }
    let mut surface = T::zero();
    for opp in 0..4 {
        let f: Vec<Point<T>> = (0..4).filter(|&l| l != opp).map(|l| p[l]).collect();
        surface += geometry::facet_measure_normal(3, &f).0;
    }
    let inradius = T::lit(3.0) * vol / surface;
    // Circumcenter c solves 2 (p_k - p_0) . c' = |p_k - p_0|^2 with c' = c - p_0.
    let mut a = Vec::with_capacity(9);
    let mut rhs = [T::zero(); 3];
    for k in 1..4 {
        let e = sub(&p[k], &p[0]);
        a.extend_from_slice(&[T::lit(2.0) * e[0], T::lit(2.0) * e[1], T::lit(2.0) * e[2]]);
        rhs[k - 1] = dot3(&e, &e);
    }
    let inv = match geometry::invert_dense(3, &a) {
        Some(inv) => inv,
        None => return T::zero(),
    };
    let c: Point<T> = [0, 1, 2].map(|i| (0..3).fold(T::zero(), |s, j| s + inv[i * 3 + j] * rhs[j]));
    let circumradius = norm3(&c);
    (T::lit(3.0) * inradius / circumradius).min(T::one())
}

#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport<T> {
    pub radius_ratios: Vec<T>,
    pub min_ratio: T,
    pub mean_ratio: T,
    /// Cells with non-positive signed volume.
    pub inverted: Vec<usize>,
    /// Mean angle (radians) between normals of adjacent boundary facets.
    pub roughness: T,
}

impl<T: Real> QualityReport<T> {
    pub fn num_inverted(&self) -> usize {
        self.inverted.len()
    }
}

pub fn mesh_quality<T: Real>(mesh: &SimplicialMesh<T>) -> QualityReport<T> {
    let d = mesh.dim();
    let mut ratios = Vec::with_capacity(mesh.num_cells());
    let mut inverted = Vec::new();
    for c in 0..mesh.num_cells() {
        let p = mesh.cell_points(c);
        ratios.push(radius_ratio(d, &p));
        if !(mesh.signed_volume(c) > T::zero()) {
            inverted.push(c);
        }
    }
    let min_ratio = ratios.iter().copied().fold(T::infinity(), T::min);
    let mean_ratio = if ratios.is_empty() {
        T::zero()
    } else {
        ratios.iter().copied().sum::<T>() / T::from_usize_lossy(ratios.len())
    };
    QualityReport {
        radius_ratios: ratios,
        min_ratio: if mesh.num_cells() == 0 {
            T::zero()
        } else {
            min_ratio
        },
        mean_ratio,
        inverted,
        roughness: surface_roughness(mesh),
    }
}

/// Mean angle between outward normals of boundary facets sharing a ridge
/// (a vertex in 2D, an edge in 3D).
pub fn surface_roughness<T: Real>(mesh: &SimplicialMesh<T>) -> T {
    let d = mesh.dim();
    let facets = mesh.boundary_facets();
    let normals: Vec<Point<T>> = facets
        .iter()
        .map(|f| {
            let p: Vec<Point<T>> = f.iter().map(|&v| mesh.vertices()[v]).collect();
            let n = raw_normal(d, &p);
            let len = norm3(&n);
            if len > T::zero() {
                [n[0] / len, n[1] / len, n[2] / len]
            } else {
                [T::zero(); 3]
            }
        })
        .collect();
    let mut ridges: HashMap<Vec<usize>, Vec<usize>> = HashMap::new();
    for (k, f) in facets.iter().enumerate() {
        for skip in 0..d {
            let mut r: Vec<usize> = (0..d).filter(|&l| l != skip).map(|l| f[l]).collect();
            r.sort_unstable();
            ridges.entry(r).or_default().push(k);
        }
    }
    let mut keys: Vec<&Vec<usize>> = ridges.keys().collect();
    keys.sort();
    let mut total = T::zero();
    let mut count = 0usize;
    for key in keys {
        let owners = &ridges[key];
        if owners.len() != 2 {
            continue;
        }
        let c = dot3(&normals[owners[0]], &normals[owners[1]])
            .max(-T::one())
            .min(T::one());
        total += c.acos();
        count += 1;
    }
    if count == 0 {
        T::zero()
    } else {
        total / T::from_usize_lossy(count)
    }
}

/// Disk (2D) or ball (3D) mesh: the cube `[-1, 1]^d` with `n` cells per half
/// axis, split into simplices whose cube diagonals point away from the center
/// (Kuhn subdivision mirrored per octant), then mapped radially onto the ball.
pub fn ball_mesh<T: Real>(
    dim: usize,
    center: &[T],
    radius: T,
    n: usize,
) -> Result<SimplicialMesh<T>> {
    if dim != 2 && dim != 3 {
        return Err(Error::invalid(format!("ball must be 2D or 3D, got {dim}")));
    }
    if center.len() != dim || !(radius > T::zero()) || n == 0 {
        return Err(Error::invalid(
            "ball needs a center of matching dimension, positive radius and n >= 1",
        ));
    }
    let m = 2 * n + 1;
    let nz = if dim == 3 { m } else { 1 };
    let index = |i: usize, j: usize, k: usize| (k * m + j) * m + i;
    let half = T::from_usize_lossy(n);
    let mut vertices = Vec::with_capacity(m * m * nz);
    for k in 0..nz {
        for j in 0..m {
            for i in 0..m {
                let mut q = [T::zero(); 3];
                for (a, idx) in [i, j, k].into_iter().enumerate().take(dim) {
                    q[a] = (T::from_usize_lossy(idx) - half) / half;
                }
                let inf = q[..dim].iter().fold(T::zero(), |a, x| a.max(x.abs()));
                let two = q[..dim].iter().fold(T::zero(), |a, x| a + *x * *x).sqrt();
                let s = if two > T::zero() {
                    inf / two
                } else {
                    T::zero()
                };
                let mut out = [T::zero(); 3];
                for a in 0..dim {
                    out[a] = center[a] + radius * s * q[a];
                }
                vertices.push(out);
            }
        }
    }
    let perms: &[&[usize]] = if dim == 2 {
        &[&[0, 1], &[1, 0]]
    } else {
        &[
            &[0, 1, 2],
            &[0, 2, 1],
            &[1, 0, 2],
            &[1, 2, 0],
            &[2, 0, 1],
            &[2, 1, 0],
        ]
    };
    let mut cells = Vec::new();
    for k in 0..nz.saturating_sub(1).max(1) {
        for j in 0..m - 1 {
            for i in 0..m - 1 {
                let lower = [i, j, k];
                // Start at the corner nearest the center and step outwards.
                let mut start = [0usize; 3];
                let mut step = [0isize; 3];
                for a in 0..dim {
                    if lower[a] >= n {
                        start[a] = lower[a];
                        step[a] = 1;
                    } else {
                        start[a] = lower[a] + 1;
                        step[a] = -1;
                    }
                }
                for perm in perms {
                    let mut cur = start;
                    let mut cell = vec![index(cur[0], cur[1], cur[2])];
                    for &a in perm.iter() {
                        cur[a] = (cur[a] as isize + step[a]) as usize;
                        cell.push(index(cur[0], cur[1], cur[2]));
                    }
                    cells.push(cell);
                }
            }
        }
    }
    let mut mesh = SimplicialMesh::new(dim, vertices, cells)?;
    for c in 0..mesh.num_cells() {
        if mesh.signed_volume(c) < T::zero() {
            mesh.cells[c].swap(0, 1);
        }
    }
    Ok(mesh)
}

#[derive(Debug, Clone)]
pub struct MeshTransform<T> {
    /// Mesh coordinates to input-image voxels.
    pub input_affine: AffineMap<T>,
    /// Affine pre-registration.
    pub affine: AffineMap<T>,
    /// Target-image physical coordinates to target voxels.
    pub target_affine: AffineMap<T>,
    pub direction: Direction,
    pub flow: FlowConfig<T>,
}

impl<T: Real> MeshTransform<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            input_affine: AffineMap::identity(dim),
            affine: AffineMap::identity(dim),
            target_affine: AffineMap::identity(dim),
            direction: Direction::Inverse,
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransformResult<T> {
    pub mesh: SimplicialMesh<T>,
    pub before: QualityReport<T>,
    pub after: QualityReport<T>,
    /// Vertices whose path left the image box and was clamped.
    pub clamped: Vec<usize>,
}

/// `y = A_e^{-1} A^{-1} Phi(A_a x)` with `Phi` the flow of `velocities` in the
/// configured direction. With `Backend::Trace` every vertex is integrated
/// directly; with `Backend::CgTransport` the grid map is built and interpolated.
pub fn transform_mesh<T: Real>(
    mesh: &SimplicialMesh<T>,
    grid: &GridMesh<T>,
    velocities: &[CgVectorField<T>],
    cfg: &MeshTransform<T>,
) -> Result<TransformResult<T>> {
    let d = mesh.dim();
    if grid.dim() != d
        || [&cfg.input_affine, &cfg.affine, &cfg.target_affine]
            .iter()
            .any(|a| a.dim() != d)
    {
        return Err(Error::invalid(
            "mesh, grid and affine maps must share one dimension",
        ));
    }
    let a_inv = cfg.affine.inverse()?;
    let e_inv = cfg.target_affine.inverse()?;
    let before = mesh_quality(mesh);
    let a: Vec<Point<T>> = mesh
        .vertices()
        .iter()
        .map(|p| cfg.input_affine.apply(p))
        .collect();
    let (moved, clamped) = if velocities.is_empty() {
        (a, Vec::new())
    } else {
        match cfg.flow.backend {
            Backend::Trace => trace_points(grid, velocities, cfg.direction, &cfg.flow, &a)?,
            Backend::CgTransport => {
                let map = flow_map(grid, velocities, cfg.direction, &cfg.flow)?;
                apply_map(&[MapRef::Flow(&map, grid)], &a)?
            }
        }
    };
    let y: Vec<Point<T>> = moved.iter().map(|p| e_inv.apply(&a_inv.apply(p))).collect();
    let out = mesh.with_vertices(y)?;
    let after = mesh_quality(&out);
    if !after.inverted.is_empty() {
        log::warn!(
            "{} cells inverted by the mesh transform",
            after.inverted.len()
        );
    }
    Ok(TransformResult {
        mesh: out,
        before,
        after,
        clamped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::build_box_mesh;

    fn tri(p: [[f64; 2]; 3]) -> Vec<Point<f64>> {
        p.iter().map(|q| [q[0], q[1], 0.0]).collect()
    }

    #[test]
    fn radius_ratio_closed_forms() {
        let h = 3f64.sqrt() / 2.0;
        assert!((radius_ratio(2, &tri([[0.0, 0.0], [1.0, 0.0], [0.5, h]])) - 1.0).abs() < 1e-12);
        // Right isosceles with legs 1: r = (2 - sqrt 2) / 2, R = sqrt 2 / 2.
        let expect = 2.0 * ((2.0 - 2f64.sqrt()) / 2.0) / (2f64.sqrt() / 2.0);
        assert!(
            (radius_ratio(2, &tri([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])) - expect).abs() < 1e-12
        );
        assert_eq!(
            radius_ratio(2, &tri([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])),
            0.0
        );
        let s = 1.0 / 2f64.sqrt();
        let reg = vec![
            [1.0, 0.0, -s],
            [-1.0, 0.0, -s],
            [0.0, 1.0, s],
            [0.0, -1.0, s],
        ];
        assert!((radius_ratio(3, &reg) - 1.0).abs() < 1e-12);
        let flat = vec![
            [0.0, 0.0, 0.0],
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [1.0, 1.0, 0.0],
        ];
        assert_eq!(radius_ratio(3, &flat), 0.0);
    }

    #[test]
    fn ball_meshes_are_valid() {
        for (dim, center) in [(2usize, vec![5.0f64, 5.0]), (3, vec![4.0, 4.0, 4.0])] {
            let m = ball_mesh(dim, &center, 3.0, 3).unwrap();
            let q = mesh_quality(&m);
            assert!(q.inverted.is_empty());
            assert!(q.min_ratio > 0.2, "min ratio {}", q.min_ratio);
            for p in m.vertices() {
                let r = (0..dim)
                    .map(|i| (p[i] - center[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!(r <= 3.0 + 1e-12);
            }
            let faces = m.boundary_facets();
            for f in &faces {
                let r = (0..dim)
                    .map(|i| (m.vertices()[f[0]][i] - center[i]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert!((r - 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn boundary_normals_point_outward() {
        let m = ball_mesh(2, &[0.0, 0.0], 1.0, 4).unwrap();
        for f in m.boundary_facets() {
            let p: Vec<Point<f64>> = f.iter().map(|&v| m.vertices()[v]).collect();
            let n = raw_normal(2, &p);
            let mid = [(p[0][0] + p[1][0]) / 2.0, (p[0][1] + p[1][1]) / 2.0, 0.0];
            assert!(dot3(&n, &mid) > 0.0);
        }
    }

    #[test]
    fn roughness_of_regular_polygon() {
        let k = 12;
        let mut verts = vec![[0.0, 0.0, 0.0]];
        let mut cells = Vec::new();
        for i in 0..k {
            let t = 2.0 * std::f64::consts::PI * i as f64 / k as f64;
            verts.push([t.cos(), t.sin(), 0.0]);
            cells.push(vec![0, 1 + i, 1 + (i + 1) % k]);
        }
        let m = SimplicialMesh::new(2, verts, cells).unwrap();
        let r = surface_roughness(&m);
        assert!((r - 2.0 * std::f64::consts::PI / k as f64).abs() < 1e-12);
    }

    #[test]
    fn identity_pipeline_is_bit_exact() {
        let grid = build_box_mesh::<f64>(&[16, 16]).unwrap();
        let mesh = ball_mesh(2, &[8.0, 8.0], 5.0, 3).unwrap();
        let zero = vec![CgVectorField::zeros(&grid, true)];
        let res = transform_mesh(&mesh, &grid, &zero, &MeshTransform::identity(2)).unwrap();
        assert_eq!(res.mesh, mesh);
        assert_eq!(res.before, res.after);
    }

    #[test]
    fn uniform_scale_keeps_ratios() {
        let grid = build_box_mesh::<f64>(&[16, 16]).unwrap();
        let mesh = ball_mesh(2, &[4.0, 4.0], 3.0, 3).unwrap();
        let mut cfg = MeshTransform::identity(2);
        cfg.affine = AffineMap::scaling(2, 0.5);
        let res = transform_mesh(&mesh, &grid, &[CgVectorField::zeros(&grid, true)], &cfg).unwrap();
        for (a, b) in res
            .before
            .radius_ratios
            .iter()
            .zip(&res.after.radius_ratios)
        {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(res.mesh.cells(), mesh.cells());
        assert!((res.mesh.vertices()[0][0] - 2.0 * mesh.vertices()[0][0]).abs() < 1e-12);
    }

    #[test]
    fn smooth_flow_keeps_ball_quality() {
        let grid = build_box_mesh::<f64>(&[16, 16, 16]).unwrap();
        let v = CgVectorField::interpolate(
            &grid,
            |p| {
                let r2 =
                    ((p[0] - 8.0).powi(2) + (p[1] - 8.0).powi(2) + (p[2] - 8.0).powi(2)) / 49.0;
                let b = if r2 < 1.0 { (1.0 - r2).powi(3) } else { 0.0 };
                [1.5 * b, 0.5 * b, -0.5 * b]
            },
            true,
        );
        // 2 x 2 x 2 cube split into 48 tetrahedra.
        let mesh = ball_mesh(3, &[8.0, 8.0, 8.0], 3.0, 1).unwrap();
        let res = transform_mesh(&mesh, &grid, &[v], &MeshTransform::identity(3)).unwrap();
        assert!(res.after.inverted.is_empty());
        assert!(res.clamped.is_empty());
        assert!(res.after.min_ratio >= 0.5 * res.before.min_ratio);
        assert_eq!(res.mesh.cells(), mesh.cells());
    }

    #[test]
    fn inverted_cells_are_reported() {
        let grid = build_box_mesh::<f64>(&[8, 8]).unwrap();
        let mesh = ball_mesh(2, &[4.0, 4.0], 2.0, 2).unwrap();
        let mut cfg = MeshTransform::identity(2);
        cfg.affine = AffineMap::new(2, vec![-1.0, 0.0, 0.0, 1.0], vec![8.0, 0.0]).unwrap();
        let res = transform_mesh(&mesh, &grid, &[], &cfg).unwrap();
        assert_eq!(res.after.num_inverted(), mesh.num_cells());
    }
}

//! Structured simplicial meshes over pixel/voxel boxes.
//!
//! Vertex `(i, j[, k])` sits at the integer lattice point, voxel `(i, j[, k])`
//! spans `[i, i+1] x [j, j+1] (x [k, k+1])`. Every pixel is split into two
//! triangles along the same diagonal; every voxel into the six tetrahedra of
//! the Kuhn subdivision along its main diagonal. Cells are numbered voxel by
//! voxel (x fastest), with the 2 or 6 cells of one voxel stored contiguously.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::scalar::Real;

/// Extents of a pixel/voxel box. Two meshes (and fields) are compatible iff
/// their `GridDims` are equal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridDims {
    extents: [usize; 3],
    dim: usize,
}

impl GridDims {
    pub fn new(extents: &[usize]) -> Result<Self> {
        if extents.len() != 2 && extents.len() != 3 {
            return Err(Error::invalid(format!(
                "grid must be 2D or 3D, got {} extents",
                extents.len()
            )));
        }
        if extents.contains(&0) {
            return Err(Error::invalid(format!(
                "grid extents must be positive, got {extents:?}"
            )));
        }
        let mut e = [1; 3];
        e[..extents.len()].copy_from_slice(extents);
        Ok(Self {
            extents: e,
            dim: extents.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extents(&self) -> &[usize] {
        &self.extents[..self.dim]
    }

    pub fn num_voxels(&self) -> usize {
        self.extents().iter().product()
    }

    pub fn num_vertices(&self) -> usize {
        self.extents().iter().map(|n| n + 1).product()
    }

    pub fn cells_per_voxel(&self) -> usize {
        if self.dim == 2 {
            2
        } else {
            6
        }
    }

    pub fn num_cells(&self) -> usize {
        self.num_voxels() * self.cells_per_voxel()
    }

    /// Linear vertex index of lattice point `idx` (x fastest).
    pub fn vertex_index(&self, idx: &[usize]) -> usize {
        let [n0, n1, _] = self.extents;
        match self.dim {
            2 => idx[0] + (n0 + 1) * idx[1],
            _ => idx[0] + (n0 + 1) * (idx[1] + (n1 + 1) * idx[2]),
        }
    }

    /// Linear voxel index (x fastest).
    pub fn voxel_index(&self, idx: &[usize]) -> usize {
        let [n0, n1, _] = self.extents;
        match self.dim {
            2 => idx[0] + n0 * idx[1],
            _ => idx[0] + n0 * (idx[1] + n1 * idx[2]),
        }
    }

    /// Volume of the box `[0, n1] x [0, n2] (x [0, n3])`.
    pub fn box_volume(&self) -> usize {
        self.num_voxels()
    }
}

/// An interior facet shared by cells `E1 = cells[0]` and `E2 = cells[1]`.
///
/// `normal` is the unit normal pointing from E1 toward E2. `local[s][b]` is the
/// local vertex index within `cells[s]` of facet vertex `b`.
#[derive(Debug, Clone)]
pub struct Facet<T> {
    pub cells: [usize; 2],
    pub vertices: [usize; 3],
    pub local: [[usize; 3]; 2],
    pub normal: Point<T>,
    pub measure: T,
}

/// A facet on the domain boundary with its outward unit normal.
#[derive(Debug, Clone)]
pub struct BoundaryFacet<T> {
    pub cell: usize,
    pub vertices: [usize; 3],
    pub local: [usize; 3],
    pub normal: Point<T>,
    pub measure: T,
}

/// Reference from a cell to one of its interior facets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetRef {
    pub facet: usize,
    /// 0 when the cell is E1 of the facet, 1 when it is E2.
    pub side: usize,
}

/// Structured simplicial mesh with precomputed geometry and facet connectivity.
#[derive(Debug, Clone)]
pub struct GridMesh<T> {
    dims: GridDims,
    vertices: Vec<Point<T>>,
    cells: Vec<[usize; 4]>,
    volumes: Vec<T>,
    grads: Vec<[Point<T>; 4]>,
    facets: Vec<Facet<T>>,
    boundary_facets: Vec<BoundaryFacet<T>>,
    cell_facets: Vec<Vec<FacetRef>>,
    on_boundary: Vec<bool>,
}

/// Builds the structured mesh of the box `[0, n1] x ... ` with unit voxels.
pub fn build_box_mesh<T: Real>(extents: &[usize]) -> Result<GridMesh<T>> {
    GridMesh::new(GridDims::new(extents)?)
}

impl<T: Real> GridMesh<T> {
    pub fn new(dims: GridDims) -> Result<Self> {
        let d = dims.dim();
        let ext = dims.extents;
        let zero = T::zero();

        let mut vertices = Vec::with_capacity(dims.num_vertices());
        let mut on_boundary = Vec::with_capacity(dims.num_vertices());
        let nz = if d == 3 { ext[2] + 1 } else { 1 };
        for k in 0..nz {
            for j in 0..=ext[1] {
                for i in 0..=ext[0] {
                    let z = if d == 3 { T::from_usize_lossy(k) } else { zero };
                    vertices.push([T::from_usize_lossy(i), T::from_usize_lossy(j), z]);
                    let mut b = i == 0 || i == ext[0] || j == 0 || j == ext[1];
                    if d == 3 {
                        b |= k == 0 || k == ext[2];
                    }
                    on_boundary.push(b);
                }
            }
        }

        let mut cells = Vec::with_capacity(dims.num_cells());
        let nvz = if d == 3 { ext[2] } else { 1 };
        for k in 0..nvz {
            for j in 0..ext[1] {
                for i in 0..ext[0] {
                    if d == 2 {
                        let v00 = dims.vertex_index(&[i, j]);
                        let v10 = dims.vertex_index(&[i + 1, j]);
                        let v01 = dims.vertex_index(&[i, j + 1]);
                        let v11 = dims.vertex_index(&[i + 1, j + 1]);
                        cells.push([v00, v10, v11, 0]);
                        cells.push([v00, v11, v01, 0]);
                    } else {
                        push_kuhn_tets(&dims, [i, j, k], &vertices, &mut cells);
                    }
                }
            }
        }

        let mut volumes = Vec::with_capacity(cells.len());
        let mut grads = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let pts: Vec<Point<T>> = cell[..=d].iter().map(|&v| vertices[v]).collect();
            let vol = geometry::signed_measure(d, &pts);
            if vol <= zero {
                return Err(Error::DegenerateCell {
                    cell: c,
                    volume: vol.to_f64_lossy(),
                });
            }
            volumes.push(vol);
            grads.push(
                geometry::barycentric_gradients(d, &pts).ok_or(Error::DegenerateCell {
                    cell: c,
                    volume: vol.to_f64_lossy(),
                })?,
            );
        }

        let mut mesh = Self {
            dims,
            vertices,
            cells,
            volumes,
            grads,
            facets: Vec::new(),
            boundary_facets: Vec::new(),
            cell_facets: Vec::new(),
            on_boundary,
        };
        mesh.build_facets();
        Ok(mesh)
    }

    fn build_facets(&mut self) {
        let d = self.dim();
        let mut open: HashMap<[usize; 3], (usize, usize)> = HashMap::new();
        let mut facets = Vec::new();
        let mut cell_facets = vec![Vec::with_capacity(d + 1); self.cells.len()];
        for c in 0..self.cells.len() {
            for opp in 0..=d {
                let mut key = [usize::MAX; 3];
                let mut n = 0;
                for l in 0..=d {
                    if l != opp {
                        key[n] = self.cells[c][l];
                        n += 1;
                    }
                }
                key[..d].sort_unstable();
                match open.remove(&key) {
                    None => {
                        open.insert(key, (c, opp));
                    }
                    Some((c1, opp1)) => {
                        let (verts, local1) = self.face_of(c1, opp1);
                        let mut local2 = [0; 3];
                        for b in 0..d {
                            local2[b] = self.local_index(c, verts[b]);
                        }
                        let (measure, normal) = self.oriented_normal(c1, opp1, &verts);
                        let idx = facets.len();
                        facets.push(Facet {
                            cells: [c1, c],
                            vertices: verts,
                            local: [local1, local2],
                            normal,
                            measure,
                        });
                        cell_facets[c1].push(FacetRef {
                            facet: idx,
                            side: 0,
                        });
                        cell_facets[c].push(FacetRef {
                            facet: idx,
                            side: 1,
                        });
                    }
                }
            }
        }
        let mut rest: Vec<(usize, usize)> = open.into_values().collect();
        rest.sort_unstable();
        let boundary_facets = rest
            .into_iter()
            .map(|(c, opp)| {
                let (verts, local) = self.face_of(c, opp);
                let (measure, normal) = self.oriented_normal(c, opp, &verts);
                BoundaryFacet {
                    cell: c,
                    vertices: verts,
                    local,
                    normal,
                    measure,
                }
            })
            .collect();
        self.facets = facets;
        self.boundary_facets = boundary_facets;
        self.cell_facets = cell_facets;
    }

    fn face_of(&self, c: usize, opp: usize) -> ([usize; 3], [usize; 3]) {
        let d = self.dim();
        let mut verts = [usize::MAX; 3];
        let mut local = [0; 3];
        let mut n = 0;
        for l in 0..=d {
            if l != opp {
                verts[n] = self.cells[c][l];
                local[n] = l;
                n += 1;
            }
        }
        (verts, local)
    }

    fn local_index(&self, c: usize, v: usize) -> usize {
        self.cells[c][..=self.dim()]
            .iter()
            .position(|&w| w == v)
            .expect("facet vertex belongs to the cell")
    }

    /// Facet measure and unit normal pointing away from the vertex `opp` of cell `c`.
    fn oriented_normal(&self, c: usize, opp: usize, verts: &[usize; 3]) -> (T, Point<T>) {
        let d = self.dim();
        let pts: Vec<Point<T>> = verts[..d].iter().map(|&v| self.vertices[v]).collect();
        let (measure, mut n) = geometry::facet_measure_normal(d, &pts);
        let apex = self.vertices[self.cells[c][opp]];
        if geometry::dot3(&n, &geometry::sub(&apex, &pts[0])) > T::zero() {
            n = [-n[0], -n[1], -n[2]];
        }
        (measure, n)
    }

    pub fn dims(&self) -> GridDims {
        self.dims
    }

    pub fn dim(&self) -> usize {
        self.dims.dim()
    }

    /// Number of vertices of each cell, `d + 1`.
    pub fn nodes_per_cell(&self) -> usize {
        self.dim() + 1
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point<T>] {
        &self.vertices
    }

    pub fn vertex(&self, v: usize) -> &Point<T> {
        &self.vertices[v]
    }

    /// Global vertex indices of cell `c` (`d + 1` entries).
    pub fn cell(&self, c: usize) -> &[usize] {
        &self.cells[c][..=self.dim()]
    }

    pub fn volume(&self, c: usize) -> T {
        self.volumes[c]
    }

    pub fn volumes(&self) -> &[T] {
        &self.volumes
    }

    /// Gradients of the barycentric coordinates of cell `c`, one per local vertex.
    pub fn grads(&self, c: usize) -> &[Point<T>] {
        &self.grads[c][..=self.dim()]
    }

    pub fn facets(&self) -> &[Facet<T>] {
        &self.facets
    }

    pub fn boundary_facets(&self) -> &[BoundaryFacet<T>] {
        &self.boundary_facets
    }

    /// Interior facets incident to cell `c`.
    pub fn cell_facets(&self, c: usize) -> &[FacetRef] {
        &self.cell_facets[c]
    }

    pub fn is_boundary_vertex(&self, v: usize) -> bool {
        self.on_boundary[v]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.on_boundary
    }

    pub fn total_volume(&self) -> T {
        self.volumes.iter().copied().sum()
    }

    /// Inradius of cell `c`: `d * |E| / |dE|`.
    pub fn inradius(&self, c: usize) -> T {
        let d = self.dim();
        let cell = self.cell(c);
        let mut surface = T::zero();
        for opp in 0..=d {
            let pts: Vec<Point<T>> = (0..=d)
                .filter(|&l| l != opp)
                .map(|l| self.vertices[cell[l]])
                .collect();
            surface += geometry::facet_measure_normal(d, &pts).0;
        }
        T::from_usize_lossy(d) * self.volumes[c] / surface
    }

    /// Minimum cell in-diameter (twice the inradius) over the mesh; the length
    /// scale used by the CFL number.
    pub fn h_min(&self) -> T {
        (0..self.num_cells())
            .map(|c| self.inradius(c) * T::lit(2.0))
            .fold(T::infinity(), T::min)
    }

    /// Barycentric coordinates of `p` with respect to cell `c`.
    pub fn barycentric(&self, c: usize, p: &Point<T>) -> [T; 4] {
        let d = self.dim();
        let g = &self.grads[c];
        let x0 = self.vertices[self.cells[c][0]];
        let rel = geometry::sub(p, &x0);
        let mut lam = [T::zero(); 4];
        let mut s = T::zero();
        for k in 1..=d {
            lam[k] = (0..d).fold(T::zero(), |acc, i| acc + g[k][i] * rel[i]);
            s += lam[k];
        }
        lam[0] = T::one() - s;
        lam
    }

    /// Checks that `p` lies in the closed box `[0, n1] x ...` (up to rounding).
    pub fn contains(&self, p: &Point<T>) -> bool {
        let tol = T::lit(1e-9);
        self.dims
            .extents()
            .iter()
            .enumerate()
            .all(|(i, &n)| p[i] >= -tol && p[i] <= T::from_usize_lossy(n) + tol)
    }

    /// Finds the cell containing `p` and the barycentric coordinates there.
    pub fn locate(&self, p: &Point<T>) -> Result<(usize, [T; 4])> {
        if !self.contains(p) || (0..self.dim()).any(|i| !p[i].is_finite()) {
            return Err(Error::OutOfDomain {
                point: p[..self.dim()].iter().map(|x| x.to_f64_lossy()).collect(),
            });
        }
        let d = self.dim();
        let mut idx = [0usize; 3];
        for i in 0..d {
            let n = self.dims.extents[i];
            let f = p[i].floor().max(T::zero()).to_usize().unwrap_or(0);
            idx[i] = f.min(n - 1);
        }
        let voxel = self.dims.voxel_index(&idx[..d]);
        let k = self.dims.cells_per_voxel();
        let mut best = (voxel * k, [T::zero(); 4], T::neg_infinity());
        for c in voxel * k..(voxel + 1) * k {
            let lam = self.barycentric(c, p);
            let m = lam[..=d].iter().copied().fold(T::infinity(), T::min);
            if m > best.2 {
                best = (c, lam, m);
            }
            if m >= T::zero() {
                break;
            }
        }
        Ok((best.0, best.1))
    }

    /// Cells of voxel `voxel`.
    pub fn voxel_cells(&self, voxel: usize) -> std::ops::Range<usize> {
        let k = self.dims.cells_per_voxel();
        voxel * k..(voxel + 1) * k
    }

    pub fn cell_centroid(&self, c: usize) -> Point<T> {
        let d = self.dim();
        let mut x = [T::zero(); 3];
        for &v in self.cell(c) {
            for i in 0..d {
                x[i] += self.vertices[v][i];
            }
        }
        let s = T::from_usize_lossy(d + 1);
        [x[0] / s, x[1] / s, x[2] / s]
    }
}

fn push_kuhn_tets<T: Real>(
    dims: &GridDims,
    base: [usize; 3],
    vertices: &[Point<T>],
    cells: &mut Vec<[usize; 4]>,
) {
    const PERMS: [[usize; 3]; 6] = [
        [0, 1, 2],
        [0, 2, 1],
        [1, 0, 2],
        [1, 2, 0],
        [2, 0, 1],
        [2, 1, 0],
    ];
    for perm in PERMS {
        let mut ids = [0usize; 4];
        let mut cur = base;
        ids[0] = dims.vertex_index(&cur);
        for (s, &axis) in perm.iter().enumerate() {
            cur[axis] += 1;
            ids[s + 1] = dims.vertex_index(&cur);
        }
        let pts = [
            vertices[ids[0]],
            vertices[ids[1]],
            vertices[ids[2]],
            vertices[ids[3]],
        ];
        if geometry::signed_measure(3, &pts) < T::zero() {
            ids.swap(1, 2);
        }
        cells.push(ids);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn smallest_boxes() {
        let m = build_box_mesh::<f64>(&[1, 1]).unwrap();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.facets().len(), 1);
        assert_eq!(m.boundary_facets().len(), 4);

        let m = build_box_mesh::<f64>(&[1, 1, 1]).unwrap();
        assert_eq!(m.num_cells(), 6);
        assert_eq!(m.num_vertices(), 8);
        // 12 boundary triangles on the cube surface
        assert_eq!(m.boundary_facets().len(), 12);

        let m = build_box_mesh::<f64>(&[2, 2]).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_vertices(), 9);
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(build_box_mesh::<f64>(&[0, 3]).is_err());
        assert!(build_box_mesh::<f64>(&[2, 2, 0]).is_err());
        assert!(build_box_mesh::<f64>(&[4]).is_err());
    }

    #[test]
    fn cell_counts_and_volumes() {
        for ext in [vec![3usize, 5], vec![2, 3, 2]] {
            let m = build_box_mesh::<f64>(&ext).unwrap();
            let vox: usize = ext.iter().product();
            let per = if ext.len() == 2 { 2 } else { 6 };
            assert_eq!(m.num_cells(), per * vox);
            assert!(m.volumes().iter().all(|&v| v > 0.0));
            assert!((m.total_volume() - vox as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn facet_incidence_and_normals() {
        for ext in [vec![3usize, 4], vec![2, 2, 3]] {
            let m = build_box_mesh::<f64>(&ext).unwrap();
            let d = m.dim();
            let mut count = vec![0usize; m.num_cells()];
            for f in m.facets() {
                assert_ne!(f.cells[0], f.cells[1]);
                let n = f.normal;
                assert!((geometry::norm3(&n) - 1.0).abs() < 1e-14);
                // normal points from E1's centroid side toward E2's centroid
                let c1 = m.cell_centroid(f.cells[0]);
                let c2 = m.cell_centroid(f.cells[1]);
                assert!(geometry::dot3(&n, &geometry::sub(&c2, &c1)) > 0.0);
                for s in 0..2 {
                    count[f.cells[s]] += 1;
                    for b in 0..d {
                        assert_eq!(m.cell(f.cells[s])[f.local[s][b]], f.vertices[b]);
                    }
                }
            }
            for f in m.boundary_facets() {
                count[f.cell] += 1;
                let c = m.cell_centroid(f.cell);
                let p = m.vertex(f.vertices[0]);
                assert!(geometry::dot3(&f.normal, &geometry::sub(p, &c)) > 0.0);
            }
            assert!(count.iter().all(|&k| k == d + 1));
        }
    }

    #[test]
    fn locate_finds_containing_cell() {
        let m = build_box_mesh::<f64>(&[4, 3, 2]).unwrap();
        for p in [
            [0.1, 0.2, 0.3],
            [3.99, 2.5, 1.01],
            [4.0, 3.0, 2.0],
            [0.0, 0.0, 0.0],
        ] {
            let (c, lam) = m.locate(&p).unwrap();
            assert!(
                lam[..4].iter().all(|&l| l >= -1e-12),
                "{p:?} in {c}: {lam:?}"
            );
        }
        assert!(m.locate(&[4.5, 0.0, 0.0]).is_err());
        assert!(m.locate(&[-0.1, 0.0, 0.0]).is_err());
    }

    #[test]
    fn h_min_of_unit_pixels() {
        let m = build_box_mesh::<f64>(&[2, 2]).unwrap();
        // in-diameter of the right isoceles triangle with unit legs
        assert!((m.h_min() - (2.0 - 2f64.sqrt())).abs() < 1e-14);
    }
}

//! Spatial operator of the upwind DG1 scheme for `d_t phi + v . grad phi = 0`.
//!
//! For a fixed CG1 velocity `v` the residual is linear in `phi`:
//!
//! ```text
//! r(psi) = sum_E int_E div(v) psi phi + sum_E int_E phi v . grad psi
//!        - sum_F int_F [[psi]] f_eps(phi|E1, phi|E2, v . n_F)
//! ```
//!
//! with `M d_t phi = r`. Cell integrals are evaluated in closed form (the
//! integrands are polynomials of degree two); facet integrals use the degree-4
//! facet rule because `f_eps` is not polynomial in `v . n_F`. Boundary facets do
//! not contribute since `v . n = 0` on the boundary.
//!
//! The operator is stored as a block-sparse matrix `L` with one `(d+1) x (d+1)`
//! block per (cell, neighbour) pair. Each block row is assembled by its cell
//! alone, so all products are computed in parallel without write conflicts and
//! in a fixed summation order.

use rayon::prelude::*;

use crate::discretization::assembly::p1_mass_entry;
use crate::discretization::quadrature::{facet_rule, QuadratureRule};
use crate::discretization::{CgVectorField, DgMass, GridMesh};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::transport::flux::{upwind_weight, upwind_weight_derivative};

#[derive(Debug, Clone)]
pub struct TransportOperator<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    blocks: Vec<T>,
    /// Index of the transposed entry: entry `k` is `(E, G)`, `mirror[k]` is `(G, E)`.
    mirror: Vec<usize>,
    epsilon: T,
    rule: QuadratureRule<T>,
    /// Per facet and quadrature point: `w |F| m'(vn)` and `w |F| m'(-vn)`.
    flux_slopes: Vec<[T; 2]>,
}

struct FacetBlocks<T> {
    /// [E1<-E1, E1<-E2, E2<-E1, E2<-E2], each d x d over the facet vertices.
    b: [[[T; 3]; 3]; 4],
    slopes: Vec<[T; 2]>,
}

impl<T: Real> TransportOperator<T> {
    pub fn assemble(mesh: &GridMesh<T>, velocity: &CgVectorField<T>, epsilon: T) -> Result<Self> {
        velocity.check_mesh(mesh)?;
        if !(epsilon >= T::zero()) {
            return Err(Error::invalid("flux smoothing width must be >= 0"));
        }
        let d = mesh.dim();
        let n = d + 1;
        let rule = facet_rule::<T>(d);

        let facet_blocks: Vec<FacetBlocks<T>> = mesh
            .facets()
            .par_iter()
            .map(|f| {
                let mut vn_nodes = [T::zero(); 3];
                for b in 0..d {
                    let vb = velocity.node(f.vertices[b]);
                    vn_nodes[b] = (0..d).fold(T::zero(), |a, k| a + vb[k] * f.normal[k]);
                }
                let mut out = FacetBlocks {
                    b: [[[T::zero(); 3]; 3]; 4],
                    slopes: Vec::with_capacity(rule.len()),
                };
                for (beta, &w) in rule.points.iter().zip(&rule.weights) {
                    let ww = w * f.measure;
                    let vn = (0..d).fold(T::zero(), |a, b| a + beta[b] * vn_nodes[b]);
                    let up = ww * upwind_weight(epsilon, vn);
                    let down = ww * upwind_weight(epsilon, -vn);
                    out.slopes.push([
                        ww * upwind_weight_derivative(epsilon, vn),
                        ww * upwind_weight_derivative(epsilon, -vn),
                    ]);
                    for i in 0..d {
                        for j in 0..d {
                            let bb = beta[i] * beta[j];
                            out.b[0][i][j] -= bb * up;
                            out.b[1][i][j] += bb * down;
                            out.b[2][i][j] += bb * up;
                            out.b[3][i][j] -= bb * down;
                        }
                    }
                }
                out
            })
            .collect();

        // Block-row structure: the cell itself plus its facet neighbours, sorted.
        let mut row_ptr = Vec::with_capacity(mesh.num_cells() + 1);
        let mut cols = Vec::new();
        row_ptr.push(0);
        for c in 0..mesh.num_cells() {
            let mut row: Vec<usize> = mesh
                .cell_facets(c)
                .iter()
                .map(|fr| mesh.facets()[fr.facet].cells[1 - fr.side])
                .collect();
            row.push(c);
            row.sort_unstable();
            cols.extend(row);
            row_ptr.push(cols.len());
        }
        let nn = n * n;
        let mut blocks = vec![T::zero(); cols.len() * nn];
        {
            let rows: Vec<(usize, &mut [T])> = {
                let mut out = Vec::with_capacity(mesh.num_cells());
                let mut rest: &mut [T] = &mut blocks;
                for c in 0..mesh.num_cells() {
                    let len = (row_ptr[c + 1] - row_ptr[c]) * nn;
                    let (head, tail) = rest.split_at_mut(len);
                    out.push((c, head));
                    rest = tail;
                }
                out
            };
            rows.into_par_iter().for_each(|(c, row_blocks)| {
                let row_cols = &cols[row_ptr[c]..row_ptr[c + 1]];
                let slot = |g: usize| {
                    row_cols
                        .iter()
                        .position(|&x| x == g)
                        .expect("neighbour in row")
                };
                // cell block
                let diag = slot(c);
                let vol = mesh.volume(c);
                let grads = mesh.grads(c);
                let cell = mesh.cell(c);
                let nodes: Vec<[T; 3]> = cell.iter().map(|&v| velocity.node(v)).collect();
                let div = (0..n).fold(T::zero(), |acc, a| {
                    acc + (0..d).fold(T::zero(), |s, k| s + nodes[a][k] * grads[a][k])
                });
                let blk = &mut row_blocks[diag * nn..(diag + 1) * nn];
                for i in 0..n {
                    for j in 0..n {
                        let mut val = div * p1_mass_entry(d, vol, i, j);
                        for a in 0..n {
                            let vg = (0..d).fold(T::zero(), |s, k| s + nodes[a][k] * grads[i][k]);
                            val += vg * p1_mass_entry(d, vol, a, j);
                        }
                        blk[i * n + j] += val;
                    }
                }
                // facet contributions, in the order of the cell's facet list
                for fr in mesh.cell_facets(c) {
                    let f = &mesh.facets()[fr.facet];
                    let fb = &facet_blocks[fr.facet];
                    let s = fr.side;
                    let o = 1 - s;
                    let own = &f.local[s];
                    let other = &f.local[o];
                    let self_blk = if s == 0 { &fb.b[0] } else { &fb.b[3] };
                    let cross_blk = if s == 0 { &fb.b[1] } else { &fb.b[2] };
                    let blk = &mut row_blocks[diag * nn..(diag + 1) * nn];
                    for i in 0..d {
                        for j in 0..d {
                            blk[own[i] * n + own[j]] += self_blk[i][j];
                        }
                    }
                    let nb = slot(f.cells[o]);
                    let blk = &mut row_blocks[nb * nn..(nb + 1) * nn];
                    for i in 0..d {
                        for j in 0..d {
                            blk[own[i] * n + other[j]] += cross_blk[i][j];
                        }
                    }
                }
            });
        }

        let mut mirror = vec![0; cols.len()];
        for c in 0..mesh.num_cells() {
            for k in row_ptr[c]..row_ptr[c + 1] {
                let g = cols[k];
                mirror[k] = (row_ptr[g]..row_ptr[g + 1])
                    .find(|&m| cols[m] == c)
                    .expect("symmetric block pattern");
            }
        }

        let flux_slopes = facet_blocks.into_iter().flat_map(|fb| fb.slopes).collect();
        Ok(Self {
            n,
            row_ptr,
            cols,
            blocks,
            mirror,
            epsilon,
            rule,
            flux_slopes,
        })
    }

    pub fn epsilon(&self) -> T {
        self.epsilon
    }

    pub fn num_cells(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn len(&self) -> usize {
        self.num_cells() * self.n
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn row_product(&self, c: usize, x: &[T], out: &mut [T], transpose: bool) {
        let n = self.n;
        let nn = n * n;
        out.iter_mut().for_each(|o| *o = T::zero());
        for k in self.row_ptr[c]..self.row_ptr[c + 1] {
            let g = self.cols[k];
            let xg = &x[g * n..(g + 1) * n];
            if transpose {
                let blk = &self.blocks[self.mirror[k] * nn..(self.mirror[k] + 1) * nn];
                for i in 0..n {
                    let mut s = T::zero();
                    for j in 0..n {
                        s += blk[j * n + i] * xg[j];
                    }
                    out[i] += s;
                }
            } else {
                let blk = &self.blocks[k * nn..(k + 1) * nn];
                for i in 0..n {
                    let mut s = T::zero();
                    for j in 0..n {
                        s += blk[i * n + j] * xg[j];
                    }
                    out[i] += s;
                }
            }
        }
    }

    /// Residual `y = L x` (coefficients of `r(psi_i)` for every DG basis function).
    pub fn apply(&self, x: &[T], y: &mut [T]) {
        let n = self.n;
        y.par_chunks_mut(n)
            .enumerate()
            .for_each(|(c, yc)| self.row_product(c, x, yc, false));
    }

    /// `y = L^T x`
    pub fn apply_transpose(&self, x: &[T], y: &mut [T]) {
        let n = self.n;
        y.par_chunks_mut(n)
            .enumerate()
            .for_each(|(c, yc)| self.row_product(c, x, yc, true));
    }

    /// Time derivative `y = M^{-1} L x`.
    pub fn apply_rate(&self, mass: &DgMass<T>, x: &[T], y: &mut [T]) {
        let n = self.n;
        y.par_chunks_mut(n).enumerate().for_each(|(c, yc)| {
            let mut t = [T::zero(); 4];
            self.row_product(c, x, &mut t[..n], false);
            let inv = mass.inverse_block(c);
            for i in 0..n {
                yc[i] = (0..n).fold(T::zero(), |s, j| s + inv[i * n + j] * t[j]);
            }
        });
    }

    /// `y = (M^{-1} L)^T x = L^T M^{-1} x`
    pub fn apply_rate_transpose(&self, mass: &DgMass<T>, x: &[T], y: &mut [T]) {
        let mut mx = vec![T::zero(); x.len()];
        mass.apply_inverse(x, &mut mx);
        self.apply_transpose(&mx, y);
    }
}

/// Accumulates the derivative of `sum_k c_k * mu_k^T L(v) phi_k` with respect to
/// the nodal velocity values, for the velocity `L` was assembled with.
#[derive(Debug, Clone)]
pub struct VelocitySensitivity<T> {
    dim: usize,
    /// Per cell and local vertex: d components.
    cell: Vec<T>,
    /// Per facet quadrature point: derivative with respect to `v . n_F` there.
    facet: Vec<T>,
}

impl<T: Real> VelocitySensitivity<T> {
    pub fn new(mesh: &GridMesh<T>, op: &TransportOperator<T>) -> Self {
        let d = mesh.dim();
        Self {
            dim: d,
            cell: vec![T::zero(); mesh.num_cells() * (d + 1) * d],
            facet: vec![T::zero(); mesh.facets().len() * op.rule.len()],
        }
    }

    /// Adds `c * d/dv [mu^T L(v) phi]`.
    pub fn accumulate(
        &mut self,
        mesh: &GridMesh<T>,
        op: &TransportOperator<T>,
        phi: &[T],
        mu: &[T],
        c: T,
    ) {
        let d = self.dim;
        let n = d + 1;
        self.cell
            .par_chunks_mut(n * d)
            .enumerate()
            .for_each(|(e, acc)| {
                let vol = mesh.volume(e);
                let g = mesh.grads(e);
                let ph = &phi[e * n..(e + 1) * n];
                let mu_e = &mu[e * n..(e + 1) * n];
                let mut mphi = [T::zero(); 4];
                for a in 0..n {
                    mphi[a] =
                        (0..n).fold(T::zero(), |s, j| s + p1_mass_entry(d, vol, a, j) * ph[j]);
                }
                let mu_m_phi = (0..n).fold(T::zero(), |s, a| s + mu_e[a] * mphi[a]);
                let mut grad_mu = [T::zero(); 3];
                for i in 0..n {
                    for k in 0..d {
                        grad_mu[k] += mu_e[i] * g[i][k];
                    }
                }
                for a in 0..n {
                    for k in 0..d {
                        acc[a * d + k] += c * (g[a][k] * mu_m_phi + grad_mu[k] * mphi[a]);
                    }
                }
            });
        let q = op.rule.len();
        let facets = mesh.facets();
        self.facet
            .par_chunks_mut(q)
            .enumerate()
            .for_each(|(fi, acc)| {
                let f = &facets[fi];
                let (e1, e2) = (f.cells[0], f.cells[1]);
                for (s, beta) in op.rule.points.iter().enumerate() {
                    let mut p1 = T::zero();
                    let mut p2 = T::zero();
                    let mut jump = T::zero();
                    for b in 0..d {
                        let i1 = e1 * n + f.local[0][b];
                        let i2 = e2 * n + f.local[1][b];
                        p1 += beta[b] * phi[i1];
                        p2 += beta[b] * phi[i2];
                        jump += beta[b] * (mu[i1] - mu[i2]);
                    }
                    let [up, down] = op.flux_slopes[fi * q + s];
                    // d/dvn of -[[mu]] (p1 m(vn) - p2 m(-vn))
                    acc[s] -= c * jump * (p1 * up + p2 * down);
                }
            });
    }

    /// Nodal gradient (vertex-major, interleaved components).
    pub fn finish(&self, mesh: &GridMesh<T>, op: &TransportOperator<T>) -> Vec<T> {
        let d = self.dim;
        let n = d + 1;
        let mut grad = vec![T::zero(); mesh.num_vertices() * d];
        for e in 0..mesh.num_cells() {
            for (a, &v) in mesh.cell(e).iter().enumerate() {
                for k in 0..d {
                    grad[v * d + k] += self.cell[(e * n + a) * d + k];
                }
            }
        }
        let q = op.rule.len();
        for (fi, f) in mesh.facets().iter().enumerate() {
            for (s, beta) in op.rule.points.iter().enumerate() {
                let g = self.facet[fi * q + s];
                for b in 0..d {
                    for k in 0..d {
                        grad[f.vertices[b] * d + k] += g * beta[b] * f.normal[k];
                    }
                }
            }
        }
        grad
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discretization::{assemble_dg_mass, build_box_mesh, DgScalarField};
    use crate::transport::flux::numerical_flux;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn smooth_velocity(mesh: &GridMesh<f64>, amp: f64) -> CgVectorField<f64> {
        let ext: Vec<f64> = mesh.dims().extents().iter().map(|&n| n as f64).collect();
        let d = mesh.dim();
        CgVectorField::interpolate(
            mesh,
            |p| {
                let mut bump = 1.0;
                for i in 0..d {
                    bump *= (std::f64::consts::PI * p[i] / ext[i]).sin();
                }
                [
                    amp * bump * (0.7 + 0.2 * p[1]),
                    -amp * bump * (0.3 + 0.1 * p[0]),
                    if d == 3 { 0.5 * amp * bump } else { 0.0 },
                ]
            },
            true,
        )
    }

    fn random_field(mesh: &GridMesh<f64>, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..mesh.num_cells() * mesh.nodes_per_cell())
            .map(|_| rng.gen_range(-1.0..1.0))
            .collect()
    }

    /// Independent residual: loops over cells with a generic quadrature rule and
    /// over facets evaluating traces and flux point by point.
    fn brute_force_residual(
        mesh: &GridMesh<f64>,
        v: &CgVectorField<f64>,
        phi: &[f64],
        eps: f64,
    ) -> Vec<f64> {
        let d = mesh.dim();
        let n = d + 1;
        let cell_rule = crate::discretization::quadrature::simplex_rule::<f64>(d, 3);
        let face_rule = crate::discretization::quadrature::simplex_rule::<f64>(d - 1, 4);
        let mut r = vec![0.0; phi.len()];
        for e in 0..mesh.num_cells() {
            let g = mesh.grads(e);
            let vol = mesh.volume(e);
            let div: f64 = mesh
                .cell(e)
                .iter()
                .enumerate()
                .map(|(a, &vi)| (0..d).map(|k| v.node(vi)[k] * g[a][k]).sum::<f64>())
                .sum();
            for (lam, w) in cell_rule.points.iter().zip(&cell_rule.weights) {
                let ph: f64 = (0..n).map(|j| lam[j] * phi[e * n + j]).sum();
                let vel = v.eval_bary(mesh, e, lam);
                for i in 0..n {
                    let vg: f64 = (0..d).map(|k| vel[k] * g[i][k]).sum();
                    r[e * n + i] += w * vol * (div * lam[i] * ph + ph * vg);
                }
            }
        }
        for f in mesh.facets() {
            let pts: Vec<[f64; 3]> = f.vertices[..d].iter().map(|&x| *mesh.vertex(x)).collect();
            for (beta, w) in face_rule.points.iter().zip(&face_rule.weights) {
                let mut x = [0.0; 3];
                for b in 0..d {
                    for k in 0..3 {
                        x[k] += beta[b] * pts[b][k];
                    }
                }
                let l1 = mesh.barycentric(f.cells[0], &x);
                let l2 = mesh.barycentric(f.cells[1], &x);
                let p1: f64 = (0..n).map(|j| l1[j] * phi[f.cells[0] * n + j]).sum();
                let p2: f64 = (0..n).map(|j| l2[j] * phi[f.cells[1] * n + j]).sum();
                let vel = v.eval_bary(mesh, f.cells[0], &l1);
                let vn: f64 = (0..d).map(|k| vel[k] * f.normal[k]).sum();
                let flux = numerical_flux(p1, p2, vn, eps);
                for i in 0..n {
                    r[f.cells[0] * n + i] -= w * f.measure * l1[i] * flux;
                    r[f.cells[1] * n + i] += w * f.measure * l2[i] * flux;
                }
            }
        }
        r
    }

    #[test]
    fn matches_brute_force_assembly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for ext in [vec![4usize, 4], vec![2, 3, 2]] {
            let mesh = build_box_mesh::<f64>(&ext).unwrap();
            let v = smooth_velocity(&mesh, 1.3);
            let phi = random_field(&mesh, &mut rng);
            for (eps, tol) in [(0.0, 1e-12), (1e-2, 1e-12), (0.5, 1e-12)] {
                let op = TransportOperator::assemble(&mesh, &v, eps).unwrap();
                let mut r = vec![0.0; phi.len()];
                op.apply(&phi, &mut r);
                let rb = brute_force_residual(&mesh, &v, &phi, eps);
                let err = r
                    .iter()
                    .zip(&rb)
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                assert!(err < tol, "ext {ext:?} eps {eps}: {err}");
            }
        }
    }

    #[test]
    fn zero_velocity_gives_zero_residual() {
        let mesh = build_box_mesh::<f64>(&[3, 3]).unwrap();
        let v = CgVectorField::zeros(&mesh, true);
        let op = TransportOperator::assemble(&mesh, &v, 1e-2).unwrap();
        let phi = DgScalarField::interpolate(&mesh, |p| p[0] * p[1]);
        let mut r = vec![1.0; phi.coeffs().len()];
        op.apply(phi.coeffs(), &mut r);
        assert!(r.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn global_telescoping_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for ext in [vec![5usize, 4], vec![3, 2, 2]] {
            let mesh = build_box_mesh::<f64>(&ext).unwrap();
            let v = smooth_velocity(&mesh, 2.0);
            let d = mesh.dim();
            let n = d + 1;
            let mass = assemble_dg_mass(&mesh).unwrap();
            for eps in [0.0, 1e-2] {
                let op = TransportOperator::assemble(&mesh, &v, eps).unwrap();
                // constant state: pairing with psi = 1 equals int div(v) c
                let c = 1.7;
                let phi = vec![c; mesh.num_cells() * n];
                let mut r = vec![0.0; phi.len()];
                op.apply(&phi, &mut r);
                let pairing: f64 = r.iter().sum();
                let mut direct = 0.0;
                for e in 0..mesh.num_cells() {
                    let g = mesh.grads(e);
                    let div: f64 = mesh
                        .cell(e)
                        .iter()
                        .enumerate()
                        .map(|(a, &vi)| (0..d).map(|k| v.node(vi)[k] * g[a][k]).sum::<f64>())
                        .sum();
                    direct += div * c * mesh.volume(e);
                }
                assert!((pairing - direct).abs() < 1e-10, "{pairing} vs {direct}");

                // general phi: pairing with psi = 1 equals int div(v) phi
                let phi = random_field(&mesh, &mut rng);
                op.apply(&phi, &mut r);
                let pairing: f64 = r.iter().sum();
                let mut direct = 0.0;
                for e in 0..mesh.num_cells() {
                    let g = mesh.grads(e);
                    let div: f64 = mesh
                        .cell(e)
                        .iter()
                        .enumerate()
                        .map(|(a, &vi)| (0..d).map(|k| v.node(vi)[k] * g[a][k]).sum::<f64>())
                        .sum();
                    let blk = mass.block(e);
                    let mean: f64 = (0..n * n).map(|ij| blk[ij] * phi[e * n + ij % n]).sum();
                    direct += div * mean;
                }
                assert!((pairing - direct).abs() < 1e-10, "{pairing} vs {direct}");
            }
        }
    }

    #[test]
    fn transpose_pairing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mesh = build_box_mesh::<f64>(&[4, 3]).unwrap();
        let v = smooth_velocity(&mesh, 1.0);
        let mass = assemble_dg_mass(&mesh).unwrap();
        let op = TransportOperator::assemble(&mesh, &v, 1e-2).unwrap();
        let x = random_field(&mesh, &mut rng);
        let y = random_field(&mesh, &mut rng);
        let mut lx = vec![0.0; x.len()];
        let mut lty = vec![0.0; x.len()];
        op.apply_rate(&mass, &x, &mut lx);
        op.apply_rate_transpose(&mass, &y, &mut lty);
        let a: f64 = lx.iter().zip(&y).map(|(p, q)| p * q).sum();
        let b: f64 = x.iter().zip(&lty).map(|(p, q)| p * q).sum();
        assert!((a - b).abs() < 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn velocity_sensitivity_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for ext in [vec![4usize, 4], vec![2, 2, 2]] {
            let mesh = build_box_mesh::<f64>(&ext).unwrap();
            let v = smooth_velocity(&mesh, 0.8);
            let phi = random_field(&mesh, &mut rng);
            let mu = random_field(&mesh, &mut rng);
            let eps = 0.05;
            let op = TransportOperator::assemble(&mesh, &v, eps).unwrap();
            let mut sens = VelocitySensitivity::new(&mesh, &op);
            sens.accumulate(&mesh, &op, &phi, &mu, 1.0);
            let grad = sens.finish(&mesh, &op);
            let form = |vel: &CgVectorField<f64>| {
                let op = TransportOperator::assemble(&mesh, vel, eps).unwrap();
                let mut r = vec![0.0; phi.len()];
                op.apply(&phi, &mut r);
                r.iter().zip(&mu).map(|(a, b)| a * b).sum::<f64>()
            };
            let dir: Vec<f64> = (0..grad.len()).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let h = 1e-6;
            let plus: Vec<f64> = v
                .values()
                .iter()
                .zip(&dir)
                .map(|(a, b)| a + h * b)
                .collect();
            let minus: Vec<f64> = v
                .values()
                .iter()
                .zip(&dir)
                .map(|(a, b)| a - h * b)
                .collect();
            let fd = (form(&CgVectorField::from_values(&mesh, plus, false).unwrap())
                - form(&CgVectorField::from_values(&mesh, minus, false).unwrap()))
                / (2.0 * h);
            let an: f64 = grad.iter().zip(&dir).map(|(a, b)| a * b).sum();
            assert!((fd - an).abs() < 1e-6 * (1.0 + an.abs()), "{fd} vs {an}");
        }
    }
}

//! Control chain `v_hat -> v_tilde -> v` and its transpose.
//!
//! `v_tilde = C^{-1} v_hat` with `C = diag(sqrt(M_L))`, then `v` solves
//! `(alpha M + beta K) v = M v_tilde` per component with `v = 0` on the boundary.
//! The boundary condition is imposed by symmetric elimination, so the solve reads
//! `A_D v = P M v_tilde` with `A_D = P (alpha M + beta K) P + (I - P)` and `P`
//! the projection that zeroes boundary nodes.

use rayon::prelude::*;

use crate::discretization::{assemble_cg_operators, CgVectorField, GridMesh};
use crate::error::{Error, Result};
use crate::linalg::{conjugate_gradient, CsrMatrix};
use crate::objective::{regularizer, regularizer_grad};
use crate::scalar::Real;

/// Euclidean control coefficients, `dim` interleaved components per mesh vertex.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector<T> {
    values: Vec<T>,
}

impl<T: Real> ControlVector<T> {
    pub fn zeros(mesh: &GridMesh<T>) -> Self {
        Self {
            values: vec![T::zero(); mesh.num_vertices() * mesh.dim()],
        }
    }

    pub fn new(mesh: &GridMesh<T>, values: Vec<T>) -> Result<Self> {
        let expect = mesh.num_vertices() * mesh.dim();
        if values.len() != expect {
            return Err(Error::invalid(format!(
                "control vector has {} entries, mesh needs {expect}",
                values.len()
            )));
        }
        if values.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid("control vector has non-finite entries"));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn into_values(self) -> Vec<T> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmootherConfig<T> {
    pub alpha: T,
    pub beta: T,
    pub cg_tol: T,
    pub cg_maxit: usize,
    pub jacobi: bool,
}

impl<T: Real> Default for SmootherConfig<T> {
    /// `alpha = 0`, `beta = 1`, relative CG tolerance `1e-10`.
    fn default() -> Self {
        Self {
            alpha: T::zero(),
            beta: T::one(),
            cg_tol: T::lit(1e-10),
            cg_maxit: 10_000,
            jacobi: false,
        }
    }
}

impl<T: Real> SmootherConfig<T> {
    pub fn new(alpha: T, beta: T) -> Result<Self> {
        let cfg = Self {
            alpha,
            beta,
            ..Self::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha >= T::zero())
            || !(self.beta >= T::zero())
            || !(self.alpha + self.beta > T::zero())
        {
            return Err(Error::invalid(format!(
                "smoother needs alpha, beta >= 0 and alpha + beta > 0 (got {}, {})",
                self.alpha, self.beta
            )));
        }
        if !(self.cg_tol > T::zero() && self.cg_tol < T::one()) {
            return Err(Error::invalid("cg_tol must lie in (0, 1)"));
        }
        if self.cg_maxit == 0 {
            return Err(Error::invalid("cg_maxit must be >= 1"));
        }
        Ok(())
    }
}

/// Diagonal Cholesky scaling `v_tilde = C^{-1} v_hat`, `C = diag(sqrt(M_L))`.
/// Each lumped mass entry scales the `dim` components of its node.
pub fn cholesky_scale<T: Real>(v_hat: &[T], lumped_mass: &[T], dim: usize) -> Result<Vec<T>> {
    if v_hat.len() != lumped_mass.len() * dim {
        return Err(Error::invalid("control length does not match lumped mass"));
    }
    if let Some(i) = lumped_mass.iter().position(|&m| !(m > T::zero())) {
        return Err(Error::InvalidOperator(format!(
            "lumped mass entry {i} is not positive"
        )));
    }
    Ok(v_hat
        .iter()
        .enumerate()
        .map(|(i, &x)| x / lumped_mass[i / dim].sqrt())
        .collect())
}

/// Transpose of [`cholesky_scale`]; `C` is diagonal, so the same map.
pub fn cholesky_scale_adjoint<T: Real>(w: &[T], lumped_mass: &[T], dim: usize) -> Result<Vec<T>> {
    cholesky_scale(w, lumped_mass, dim)
}

/// Precomputed operators of the control chain on one mesh.
#[derive(Debug, Clone)]
pub struct ControlMap<T> {
    dim: usize,
    num_vertices: usize,
    config: SmootherConfig<T>,
    mass: CsrMatrix<T>,
    lumped_mass: Vec<T>,
    system: CsrMatrix<T>,
    boundary: Vec<bool>,
}

impl<T: Real> ControlMap<T> {
    pub fn new(mesh: &GridMesh<T>, config: SmootherConfig<T>) -> Result<Self> {
        config.validate()?;
        let ops = assemble_cg_operators(mesh)?;
        let boundary = mesh.boundary_mask().to_vec();
        let system = ops
            .mass
            .linear_combination(config.alpha, &ops.stiffness, config.beta)
            .with_dirichlet(&boundary);
        Ok(Self {
            dim: mesh.dim(),
            num_vertices: mesh.num_vertices(),
            config,
            mass: ops.mass,
            lumped_mass: ops.lumped_mass,
            system,
            boundary,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn config(&self) -> &SmootherConfig<T> {
        &self.config
    }

    pub fn mass(&self) -> &CsrMatrix<T> {
        &self.mass
    }

    pub fn lumped_mass(&self) -> &[T] {
        &self.lumped_mass
    }

    /// `A_D`, the Dirichlet-eliminated elliptic operator.
    pub fn system(&self) -> &CsrMatrix<T> {
        &self.system
    }

    pub fn control_len(&self) -> usize {
        self.num_vertices * self.dim
    }

    fn check_len(&self, v: &[T]) -> Result<()> {
        if v.len() != self.control_len() {
            return Err(Error::invalid(format!(
                "vector has {} entries, expected {}",
                v.len(),
                self.control_len()
            )));
        }
        Ok(())
    }

    /// `C^{-1} x` (equal to its own transpose).
    pub fn scale(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(i, &v)| v / self.lumped_mass[i / self.dim].sqrt())
            .collect())
    }

    /// `C x`.
    pub fn unscale(&self, x: &[T]) -> Result<Vec<T>> {
        self.check_len(x)?;
        Ok(x.iter()
            .enumerate()
            .map(|(i, &v)| v * self.lumped_mass[i / self.dim].sqrt())
            .collect())
    }

    fn component(&self, x: &[T], k: usize) -> Vec<T> {
        x.iter().skip(k).step_by(self.dim).copied().collect()
    }

    fn interleave(&self, comps: Vec<Vec<T>>) -> Vec<T> {
        let mut out = vec![T::zero(); self.control_len()];
        for (k, c) in comps.into_iter().enumerate() {
            for (i, v) in c.into_iter().enumerate() {
                out[i * self.dim + k] = v;
            }
        }
        out
    }

    fn project(&self, x: &mut [T]) {
        for (xi, &b) in x.iter_mut().zip(&self.boundary) {
            if b {
                *xi = T::zero();
            }
        }
    }

    fn solve_system(&self, rhs: &[T]) -> Result<Vec<T>> {
        let mut x = vec![T::zero(); rhs.len()];
        conjugate_gradient(
            &self.system,
            rhs,
            &mut x,
            self.config.cg_tol,
            self.config.cg_maxit,
            self.config.jacobi,
        )?;
        Ok(x)
    }

    /// `v = A_D^{-1} P M v_tilde` per component; the result vanishes on the boundary.
    pub fn smooth(&self, tilde_v: &[T]) -> Result<Vec<T>> {
        self.check_len(tilde_v)?;
        let comps: Result<Vec<Vec<T>>> = (0..self.dim)
            .into_par_iter()
            .map(|k| {
                let mut rhs = self.mass.matvec(&self.component(tilde_v, k));
                self.project(&mut rhs);
                let mut v = self.solve_system(&rhs)?;
                self.project(&mut v);
                Ok(v)
            })
            .collect();
        Ok(self.interleave(comps?))
    }

    /// Transpose of [`ControlMap::smooth`]: `M P A_D^{-1} P w`.
    pub fn smooth_adjoint(&self, w: &[T]) -> Result<Vec<T>> {
        self.check_len(w)?;
        let comps: Result<Vec<Vec<T>>> = (0..self.dim)
            .into_par_iter()
            .map(|k| {
                let mut rhs = self.component(w, k);
                self.project(&mut rhs);
                let mut z = self.solve_system(&rhs)?;
                self.project(&mut z);
                Ok(self.mass.matvec(&z))
            })
            .collect();
        Ok(self.interleave(comps?))
    }

    /// `v_hat -> (v_tilde, v)`.
    pub fn to_velocity(
        &self,
        mesh: &GridMesh<T>,
        v_hat: &[T],
    ) -> Result<(Vec<T>, CgVectorField<T>)> {
        let tilde = self.scale(v_hat)?;
        let v = self.smooth(&tilde)?;
        let field = CgVectorField::from_values(mesh, v, true)?;
        Ok((tilde, field))
    }

    /// Pulls a velocity-space gradient back to control space.
    pub fn to_velocity_adjoint(&self, w: &[T]) -> Result<Vec<T>> {
        let z = self.smooth_adjoint(w)?;
        self.scale(&z)
    }

    /// `R = sum_k v_tilde_k^T M v_tilde_k`.
    pub fn regularizer(&self, tilde_v: &[T]) -> Result<T> {
        regularizer(&self.mass, self.dim, tilde_v)
    }

    /// Gradient of `R(C^{-1} v_hat)` with respect to `v_hat`.
    pub fn regularizer_grad_control(&self, tilde_v: &[T]) -> Result<Vec<T>> {
        let g = regularizer_grad(&self.mass, self.dim, tilde_v)?;
        self.scale(&g)
    }
}

/// One-shot `v = A_D^{-1} P M v_tilde`.
pub fn smooth_velocity<T: Real>(
    mesh: &GridMesh<T>,
    tilde_v: &[T],
    config: &SmootherConfig<T>,
) -> Result<CgVectorField<T>> {
    let map = ControlMap::new(mesh, *config)?;
    CgVectorField::from_values(mesh, map.smooth(tilde_v)?, true)
}

/// One-shot transpose of [`smooth_velocity`].
pub fn smooth_velocity_adjoint<T: Real>(
    mesh: &GridMesh<T>,
    w: &[T],
    config: &SmootherConfig<T>,
) -> Result<Vec<T>> {
    ControlMap::new(mesh, *config)?.smooth_adjoint(w)
}

/// One-shot `v_hat -> v`.
pub fn control_to_velocity<T: Real>(
    mesh: &GridMesh<T>,
    v_hat: &ControlVector<T>,
    config: &SmootherConfig<T>,
) -> Result<CgVectorField<T>> {
    let map = ControlMap::new(mesh, *config)?;
    Ok(map.to_velocity(mesh, v_hat.values())?.1)
}

/// One-shot transpose of [`control_to_velocity`].
pub fn control_to_velocity_adjoint<T: Real>(
    mesh: &GridMesh<T>,
    w: &[T],
    config: &SmootherConfig<T>,
) -> Result<Vec<T>> {
    ControlMap::new(mesh, *config)?.to_velocity_adjoint(w)
}

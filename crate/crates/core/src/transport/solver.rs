//! Explicit midpoint (RK2) time stepping of the DG1 transport scheme.

use crate::discretization::{assemble_dg_mass, CgVectorField, DgMass, DgScalarField, GridMesh};
use crate::error::{Error, Result};
use crate::scalar::{max_abs, Real};
use crate::transport::flux::DEFAULT_EPSILON;
use crate::transport::operator::TransportOperator;

/// CFL number above which [`cfl_number`] raises its advisory.
pub const DEFAULT_CFL_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct TransportProblem<T> {
    pub velocity: CgVectorField<T>,
    pub final_time: T,
    pub steps: usize,
    /// Flux smoothing width; 0 selects the exact upwind flux.
    pub epsilon: T,
}

impl<T: Real> TransportProblem<T> {
    pub fn new(
        velocity: CgVectorField<T>,
        final_time: T,
        steps: usize,
        epsilon: T,
    ) -> Result<Self> {
        if steps == 0 {
            return Err(Error::invalid("number of time steps must be >= 1"));
        }
        if !(final_time > T::zero()) || !final_time.is_finite() {
            return Err(Error::invalid("final time must be positive"));
        }
        if !(epsilon >= T::zero()) {
            return Err(Error::invalid("flux smoothing width must be >= 0"));
        }
        if !velocity.dirichlet_zero() {
            return Err(Error::invalid(
                "transport velocity must vanish on the boundary (dirichlet_zero field)",
            ));
        }
        Ok(Self {
            velocity,
            final_time,
            steps,
            epsilon,
        })
    }

    /// `T = 1`, `N = 100`, `eps = 1e-2`.
    pub fn with_defaults(velocity: CgVectorField<T>) -> Result<Self> {
        Self::new(velocity, T::one(), 100, T::lit(DEFAULT_EPSILON))
    }

    pub fn dt(&self) -> T {
        self.final_time / T::from_usize_lossy(self.steps)
    }
}

/// All states of a recorded solve: `N + 1` states and the `N` midpoint stages.
#[derive(Debug, Clone)]
pub struct Trajectory<T> {
    pub states: Vec<DgScalarField<T>>,
    pub midpoints: Vec<DgScalarField<T>>,
    pub dt: T,
}

impl<T: Real> Trajectory<T> {
    /// Number of DG fields held in memory.
    pub fn stored_fields(&self) -> usize {
        self.states.len() + self.midpoints.len()
    }

    pub fn final_state(&self) -> &DgScalarField<T> {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CflReport {
    pub number: f64,
    pub dt: f64,
    pub max_speed: f64,
    pub h_min: f64,
    pub threshold: f64,
    pub advisory: bool,
}

/// `dt * ||v||_inf / h_min` with `h_min` the smallest cell in-diameter.
pub fn cfl_number<T: Real>(
    mesh: &GridMesh<T>,
    problem: &TransportProblem<T>,
    threshold: f64,
) -> CflReport {
    let dt = problem.dt().to_f64_lossy();
    let max_speed = problem.velocity.max_norm().to_f64_lossy();
    let h_min = mesh.h_min().to_f64_lossy();
    let number = dt * max_speed / h_min;
    CflReport {
        number,
        dt,
        max_speed,
        h_min,
        threshold,
        advisory: number > threshold,
    }
}

/// Assembled operator, mass and step size for repeated solves with one velocity.
#[derive(Debug, Clone)]
pub struct TransportSolver<'m, T> {
    mesh: &'m GridMesh<T>,
    mass: DgMass<T>,
    op: TransportOperator<T>,
    dt: T,
    steps: usize,
}

impl<'m, T: Real> TransportSolver<'m, T> {
    pub fn new(mesh: &'m GridMesh<T>, problem: &TransportProblem<T>) -> Result<Self> {
        problem.velocity.check_mesh(mesh)?;
        let mass = assemble_dg_mass(mesh)?;
        let op = TransportOperator::assemble(mesh, &problem.velocity, problem.epsilon)?;
        Ok(Self {
            mesh,
            mass,
            op,
            dt: problem.dt(),
            steps: problem.steps,
        })
    }

    pub fn mesh(&self) -> &GridMesh<T> {
        self.mesh
    }

    pub fn operator(&self) -> &TransportOperator<T> {
        &self.op
    }

    pub fn mass(&self) -> &DgMass<T> {
        &self.mass
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// One midpoint step with step size `dt`, writing the stage into `mid` and
    /// the new state into `next`.
    pub fn step_into(&self, phi: &[T], dt: T, mid: &mut [T], next: &mut [T]) {
        let half = dt * T::lit(0.5);
        self.op.apply_rate(&self.mass, phi, mid);
        for (m, &p) in mid.iter_mut().zip(phi) {
            *m = p + half * *m;
        }
        self.op.apply_rate(&self.mass, mid, next);
        for (x, &p) in next.iter_mut().zip(phi) {
            *x = p + dt * *x;
        }
    }

    /// Transpose of one step: given `lambda_next`, returns `(lambda_k, g_mid)` where
    /// `g_mid = dt B^T lambda_next` is the sensitivity carried by the midpoint stage.
    pub fn step_transpose(&self, lambda_next: &[T], dt: T) -> (Vec<T>, Vec<T>) {
        let n = lambda_next.len();
        let mut g_mid = vec![T::zero(); n];
        self.op
            .apply_rate_transpose(&self.mass, lambda_next, &mut g_mid);
        g_mid.iter_mut().for_each(|g| *g *= dt);
        let mut lam = vec![T::zero(); n];
        self.op.apply_rate_transpose(&self.mass, &g_mid, &mut lam);
        let half = dt * T::lit(0.5);
        for i in 0..n {
            lam[i] = lambda_next[i] + g_mid[i] + half * lam[i];
        }
        (lam, g_mid)
    }

    /// Runs the `N` steps from `phi0`; with `record`, returns every state and stage.
    pub fn solve(
        &self,
        phi0: &DgScalarField<T>,
        record: bool,
    ) -> Result<(DgScalarField<T>, Option<Trajectory<T>>)> {
        phi0.check_mesh(self.mesh)?;
        let len = phi0.coeffs().len();
        let dims = phi0.dims();
        let mut cur = phi0.coeffs().to_vec();
        let mut mid = vec![T::zero(); len];
        let mut next = vec![T::zero(); len];
        let mut traj = record.then(|| Trajectory {
            states: {
                let mut v = Vec::with_capacity(self.steps + 1);
                v.push(phi0.clone());
                v
            },
            midpoints: Vec::with_capacity(self.steps),
            dt: self.dt,
        });
        for k in 0..self.steps {
            self.step_into(&cur, self.dt, &mut mid, &mut next);
            if next.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericBlowup {
                    pass: "forward transport",
                    step: k,
                    max_abs: max_abs(&next).to_f64_lossy(),
                });
            }
            std::mem::swap(&mut cur, &mut next);
            if let Some(t) = traj.as_mut() {
                t.midpoints
                    .push(DgScalarField::from_coeffs(dims, mid.clone())?);
                t.states
                    .push(DgScalarField::from_coeffs(dims, cur.clone())?);
            }
        }
        Ok((DgScalarField::from_coeffs(dims, cur)?, traj))
    }
}

/// Residual `r` with `M d_t phi = r` for the problem's velocity.
pub fn spatial_operator<T: Real>(
    mesh: &GridMesh<T>,
    phi: &DgScalarField<T>,
    problem: &TransportProblem<T>,
) -> Result<DgScalarField<T>> {
    phi.check_mesh(mesh)?;
    let op = TransportOperator::assemble(mesh, &problem.velocity, problem.epsilon)?;
    let mut r = vec![T::zero(); phi.coeffs().len()];
    op.apply(phi.coeffs(), &mut r);
    DgScalarField::from_coeffs(phi.dims(), r)
}

/// One explicit midpoint step of size `dt`.
pub fn step_rk2<T: Real>(
    mesh: &GridMesh<T>,
    phi: &DgScalarField<T>,
    problem: &TransportProblem<T>,
    dt: T,
) -> Result<DgScalarField<T>> {
    if !(dt > T::zero()) {
        return Err(Error::invalid("time step must be positive"));
    }
    phi.check_mesh(mesh)?;
    let solver = TransportSolver::new(mesh, problem)?;
    let n = phi.coeffs().len();
    let mut mid = vec![T::zero(); n];
    let mut next = vec![T::zero(); n];
    solver.step_into(phi.coeffs(), dt, &mut mid, &mut next);
    if next.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericBlowup {
            pass: "forward transport",
            step: 0,
            max_abs: max_abs(&next).to_f64_lossy(),
        });
    }
    DgScalarField::from_coeffs(phi.dims(), next)
}

/// Result of [`solve_transport`].
#[derive(Debug, Clone)]
pub struct TransportOutput<T> {
    pub final_state: DgScalarField<T>,
    pub trajectory: Option<Trajectory<T>>,
    pub cfl: CflReport,
}

/// Discrete solution operator `phi0 -> phi(T)`; evaluates the CFL advisory first.
pub fn solve_transport<T: Real>(
    mesh: &GridMesh<T>,
    phi0: &DgScalarField<T>,
    problem: &TransportProblem<T>,
    record: bool,
) -> Result<TransportOutput<T>> {
    let cfl = cfl_number(mesh, problem, DEFAULT_CFL_THRESHOLD);
    if cfl.advisory {
        log::warn!(
            "CFL number {:.3} exceeds {:.2} (dt = {:.3e}, |v|_inf = {:.3e}, h_min = {:.3e})",
            cfl.number,
            cfl.threshold,
            cfl.dt,
            cfl.max_speed,
            cfl.h_min
        );
    }
    let solver = TransportSolver::new(mesh, problem)?;
    let (final_state, trajectory) = solver.solve(phi0, record)?;
    Ok(TransportOutput {
        final_state,
        trajectory,
        cfl,
    })
}

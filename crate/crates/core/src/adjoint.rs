//! Reduced objective `J(v_hat) = mismatch(S_v(phi_a), phi_e) / 2 + gamma R(v_tilde)`
//! and its gradient by the exact discrete adjoint of the RK2 / DG1 time loop.

use crate::control::{ControlMap, SmootherConfig};
use crate::discretization::{CgVectorField, DgScalarField, GridMesh};
use crate::error::{Error, Result};
use crate::objective::{l2_discrepancy, mismatch, mismatch_grad, total_objective, ObjectiveConfig};
use crate::scalar::{dot, max_abs, norm2, Real};
use crate::transport::flux::DEFAULT_EPSILON;
use crate::transport::{TransportProblem, TransportSolver, VelocitySensitivity};

/// Time discretization shared by every transport solve of a stage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransportSettings<T> {
    pub final_time: T,
    pub steps: usize,
    pub epsilon: T,
}

impl<T: Real> Default for TransportSettings<T> {
    fn default() -> Self {
        Self {
            final_time: T::one(),
            steps: 100,
            epsilon: T::lit(DEFAULT_EPSILON),
        }
    }
}

impl<T: Real> TransportSettings<T> {
    pub fn problem(&self, velocity: CgVectorField<T>) -> Result<TransportProblem<T>> {
        TransportProblem::new(velocity, self.final_time, self.steps, self.epsilon)
    }
}

/// Objective value and its parts, without a gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveValue<T> {
    pub objective: T,
    pub mismatch: T,
    pub regularizer: T,
    /// `||phi(T) - phi_e||_{L2}`, for tracking only.
    pub l2_discrepancy: T,
}

#[derive(Debug, Clone)]
pub struct GradientReport<T> {
    pub value: ObjectiveValue<T>,
    /// Gradient with respect to the control `v_hat`.
    pub gradient: Vec<T>,
    /// `||lambda_k||_2` for `k = 0..=N`.
    pub adjoint_norms: Vec<T>,
    /// DG fields held by the forward trajectory (`2N + 1`).
    pub stored_fields: usize,
}

/// Everything needed to evaluate one stage's objective repeatedly.
#[derive(Debug, Clone)]
pub struct ReducedObjective<'a, T> {
    mesh: &'a GridMesh<T>,
    phi_a: &'a DgScalarField<T>,
    phi_e: &'a DgScalarField<T>,
    control: ControlMap<T>,
    settings: TransportSettings<T>,
    objective: ObjectiveConfig<T>,
}

impl<'a, T: Real> ReducedObjective<'a, T> {
    pub fn new(
        mesh: &'a GridMesh<T>,
        phi_a: &'a DgScalarField<T>,
        phi_e: &'a DgScalarField<T>,
        settings: TransportSettings<T>,
        objective: ObjectiveConfig<T>,
        smoother: SmootherConfig<T>,
    ) -> Result<Self> {
        phi_a.check_mesh(mesh)?;
        phi_e.check_mesh(mesh)?;
        if !phi_a.is_finite() || !phi_e.is_finite() {
            return Err(Error::invalid("images contain non-finite values"));
        }
        objective.validate()?;
        // validates steps, time and epsilon
        TransportProblem::new(
            CgVectorField::zeros(mesh, true),
            settings.final_time,
            settings.steps,
            settings.epsilon,
        )?;
        Ok(Self {
            mesh,
            phi_a,
            phi_e,
            control: ControlMap::new(mesh, smoother)?,
            settings,
            objective,
        })
    }

    pub fn mesh(&self) -> &GridMesh<T> {
        self.mesh
    }

    pub fn control(&self) -> &ControlMap<T> {
        &self.control
    }

    pub fn settings(&self) -> &TransportSettings<T> {
        &self.settings
    }

    pub fn objective_config(&self) -> &ObjectiveConfig<T> {
        &self.objective
    }

    pub fn control_len(&self) -> usize {
        self.control.control_len()
    }

    pub fn velocity(&self, v_hat: &[T]) -> Result<CgVectorField<T>> {
        Ok(self.control.to_velocity(self.mesh, v_hat)?.1)
    }

    fn parts(&self, phi_t: &DgScalarField<T>, tilde: &[T]) -> Result<ObjectiveValue<T>> {
        let m = mismatch(self.mesh, phi_t, self.phi_e, self.objective.delta)?;
        let r = self.control.regularizer(tilde)?;
        Ok(ObjectiveValue {
            objective: total_objective(m, r, self.objective.gamma),
            mismatch: m,
            regularizer: r,
            l2_discrepancy: l2_discrepancy(self.mesh, phi_t, self.phi_e)?,
        })
    }

    /// Forward solve from `phi_a` with the velocity of `v_hat`.
    pub fn transport(&self, v_hat: &[T]) -> Result<DgScalarField<T>> {
        let velocity = self.velocity(v_hat)?;
        let problem = self.settings.problem(velocity)?;
        let solver = TransportSolver::new(self.mesh, &problem)?;
        Ok(solver.solve(self.phi_a, false)?.0)
    }

    pub fn evaluate(&self, v_hat: &[T]) -> Result<ObjectiveValue<T>> {
        let (tilde, velocity) = self.control.to_velocity(self.mesh, v_hat)?;
        let problem = self.settings.problem(velocity)?;
        let solver = TransportSolver::new(self.mesh, &problem)?;
        let (phi_t, _) = solver.solve(self.phi_a, false)?;
        self.parts(&phi_t, &tilde)
    }

    /// Objective and gradient. Refuses `epsilon = 0`, where the upwind flux is
    /// not differentiable in the velocity.
    pub fn evaluate_with_gradient(&self, v_hat: &[T]) -> Result<GradientReport<T>> {
        if !(self.settings.epsilon > T::zero()) {
            return Err(Error::invalid(
                "gradients need a smoothed flux (epsilon > 0); the exact upwind flux is not differentiable",
            ));
        }
        self.gradient_unchecked(v_hat)
    }

    /// Same as [`ReducedObjective::evaluate_with_gradient`] but also runs for
    /// `epsilon = 0`, using the one-sided derivative of `max(0, x)`.
    pub(crate) fn gradient_unchecked(&self, v_hat: &[T]) -> Result<GradientReport<T>> {
        let mesh = self.mesh;
        let (tilde, velocity) = self.control.to_velocity(mesh, v_hat)?;
        let problem = self.settings.problem(velocity)?;
        let solver = TransportSolver::new(mesh, &problem)?;
        let (phi_t, traj) = solver.solve(self.phi_a, true)?;
        let traj = traj.expect("recorded trajectory");
        let value = self.parts(&phi_t, &tilde)?;

        let op = solver.operator();
        let mass = solver.mass();
        let dt = solver.dt();
        let half = T::lit(0.5);
        let mut lambda = mismatch_grad(mesh, &phi_t, self.phi_e, self.objective.delta)?;
        lambda.iter_mut().for_each(|x| *x *= half);

        let len = lambda.len();
        let mut sens = VelocitySensitivity::new(mesh, op);
        let mut mu = vec![T::zero(); len];
        let mut adjoint_norms = vec![T::zero(); traj.states.len()];
        adjoint_norms[problem.steps] = norm2(&lambda);
        for k in (0..problem.steps).rev() {
            let (lambda_k, g_mid) = solver.step_transpose(&lambda, dt);
            mass.apply_inverse(&lambda, &mut mu);
            sens.accumulate(mesh, op, traj.midpoints[k].coeffs(), &mu, dt);
            mass.apply_inverse(&g_mid, &mut mu);
            sens.accumulate(mesh, op, traj.states[k].coeffs(), &mu, dt * half);
            if lambda_k.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericBlowup {
                    pass: "adjoint transport",
                    step: k,
                    max_abs: max_abs(&lambda_k).to_f64_lossy(),
                });
            }
            lambda = lambda_k;
            adjoint_norms[k] = norm2(&lambda);
        }
        let grad_v = sens.finish(mesh, op);
        let mut gradient = self.control.to_velocity_adjoint(&grad_v)?;
        let reg = self.control.regularizer_grad_control(&tilde)?;
        for (g, r) in gradient.iter_mut().zip(reg) {
            *g += self.objective.gamma * r;
        }
        if gradient.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericBlowup {
                pass: "gradient",
                step: 0,
                max_abs: max_abs(&gradient).to_f64_lossy(),
            });
        }
        Ok(GradientReport {
            value,
            gradient,
            adjoint_norms,
            stored_fields: traj.stored_fields(),
        })
    }
}

/// One-shot objective and gradient for a single control vector.
pub fn evaluate_objective_and_gradient<T: Real>(
    mesh: &GridMesh<T>,
    v_hat: &[T],
    phi_a: &DgScalarField<T>,
    phi_e: &DgScalarField<T>,
    settings: TransportSettings<T>,
    objective: ObjectiveConfig<T>,
    smoother: SmootherConfig<T>,
) -> Result<GradientReport<T>> {
    ReducedObjective::new(mesh, phi_a, phi_e, settings, objective, smoother)?
        .evaluate_with_gradient(v_hat)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FdRow {
    pub step: f64,
    pub finite_difference: f64,
    pub relative_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FdReport {
    /// Adjoint directional derivative `<grad J, direction>`.
    pub directional: f64,
    pub rows: Vec<FdRow>,
    pub best_relative_error: f64,
    /// True when the flux is the exact (non-differentiable) upwind flux.
    pub non_smooth: bool,
    /// `best_relative_error < tolerance`.
    pub passed: bool,
}

/// Tolerance used for [`FdReport::passed`].
pub const FD_TOLERANCE: f64 = 1e-5;

/// Central differences of `J` along `direction` at each step size, against the
/// adjoint directional derivative.
pub fn fd_gradient_check<T: Real>(
    objective: &ReducedObjective<'_, T>,
    v_hat: &[T],
    direction: &[T],
    steps: &[T],
) -> Result<FdReport> {
    if direction.len() != v_hat.len() {
        return Err(Error::invalid(
            "direction length differs from control length",
        ));
    }
    if direction.iter().all(|&x| x == T::zero()) {
        return Err(Error::invalid("gradient check direction must be nonzero"));
    }
    if steps.is_empty() || steps.iter().any(|&h| !(h > T::zero())) {
        return Err(Error::invalid("gradient check step sizes must be positive"));
    }
    let report = objective.gradient_unchecked(v_hat)?;
    let directional = dot(&report.gradient, direction).to_f64_lossy();
    let mut rows = Vec::with_capacity(steps.len());
    for &h in steps {
        let shifted = |s: T| -> Vec<T> {
            v_hat
                .iter()
                .zip(direction)
                .map(|(&x, &d)| x + s * d)
                .collect()
        };
        let fp = objective.evaluate(&shifted(h))?.objective;
        let fm = objective.evaluate(&shifted(-h))?.objective;
        let fd = ((fp - fm) / (T::lit(2.0) * h)).to_f64_lossy();
        let scale = directional.abs().max(f64::MIN_POSITIVE);
        rows.push(FdRow {
            step: h.to_f64_lossy(),
            finite_difference: fd,
            relative_error: (fd - directional).abs() / scale,
        });
    }
    let best = rows
        .iter()
        .map(|r| r.relative_error)
        .fold(f64::INFINITY, f64::min);
    Ok(FdReport {
        directional,
        rows,
        best_relative_error: best,
        non_smooth: !(objective.settings.epsilon > T::zero()),
        passed: best < FD_TOLERANCE,
    })
}

//! Sequential registration with one stationary velocity per stage.
//!
//! Stage `i` optimizes `v_i` from `v_hat = 0` with `phi_{i-1}` as its initial
//! image, then sets `phi_i = S_i(phi_{i-1})`. The composite deformation is a
//! velocity that is piecewise constant in time; it is not the joint optimum
//! over all velocities.

use serde::{Deserialize, Serialize};

use crate::adjoint::{ObjectiveValue, ReducedObjective, TransportSettings};
use crate::control::SmootherConfig;
use crate::discretization::{CgVectorField, DgScalarField, GridMesh};
use crate::error::{Error, Result};
use crate::objective::{
    default_delta, tukey_metric, ObjectiveConfig, DEFAULT_GAMMA, DEFAULT_TUKEY_C,
};
use crate::optimize::lbfgs::{
    lbfgs_minimize, Evaluated, IterationRecord, LbfgsConfig, LbfgsStatus,
};
use crate::scalar::Real;
use crate::transport::flux::DEFAULT_EPSILON;

/// Hyperparameters of one registration stage.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[serde(bound(deserialize = "T: Real + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct StageConfig<T> {
    pub alpha: T,
    pub beta: T,
    pub gamma: T,
    /// Huber threshold; `None` derives it from the target's percentile range.
    pub delta: Option<T>,
    pub tukey_c: T,
    pub epsilon: T,
    pub max_iters: usize,
    pub lbfgs_memory: usize,
    pub c1: T,
    pub c2: T,
    pub gtol_rel: T,
    pub steps: usize,
    pub final_time: T,
    pub cg_tol: T,
}

impl<T: Real> Default for StageConfig<T> {
    fn default() -> Self {
        let lb = LbfgsConfig::<T>::default();
        let sm = SmootherConfig::<T>::default();
        Self {
            alpha: sm.alpha,
            beta: sm.beta,
            gamma: T::lit(DEFAULT_GAMMA),
            delta: None,
            tukey_c: T::lit(DEFAULT_TUKEY_C),
            epsilon: T::lit(DEFAULT_EPSILON),
            max_iters: lb.max_iters,
            lbfgs_memory: lb.memory,
            c1: lb.c1,
            c2: lb.c2,
            gtol_rel: lb.gtol_rel,
            steps: 100,
            final_time: T::one(),
            cg_tol: sm.cg_tol,
        }
    }
}

impl<T: Real> StageConfig<T> {
    /// Smoothing stage `alpha = 0, beta = 1`.
    pub fn smooth(max_iters: usize) -> Self {
        Self {
            max_iters,
            ..Self::default()
        }
    }

    /// Detail stage `alpha = beta = 0.5`.
    pub fn detail(max_iters: usize) -> Self {
        Self {
            alpha: T::lit(0.5),
            beta: T::lit(0.5),
            max_iters,
            ..Self::default()
        }
    }

    pub fn smoother(&self) -> SmootherConfig<T> {
        SmootherConfig {
            alpha: self.alpha,
            beta: self.beta,
            cg_tol: self.cg_tol,
            ..SmootherConfig::default()
        }
    }

    pub fn lbfgs(&self) -> LbfgsConfig<T> {
        LbfgsConfig {
            max_iters: self.max_iters,
            memory: self.lbfgs_memory,
            c1: self.c1,
            c2: self.c2,
            gtol_rel: self.gtol_rel,
            ..LbfgsConfig::default()
        }
    }

    pub fn transport(&self) -> TransportSettings<T> {
        TransportSettings {
            final_time: self.final_time,
            steps: self.steps,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.smoother().validate()?;
        self.lbfgs().validate()?;
        if self.steps == 0 || !(self.final_time > T::zero()) {
            return Err(Error::invalid("stage needs steps >= 1 and final_time > 0"));
        }
        if !(self.epsilon > T::zero()) {
            return Err(Error::invalid("registration stages need epsilon > 0"));
        }
        let delta = self.delta.unwrap_or(T::one());
        ObjectiveConfig::new(delta, self.gamma, self.tukey_c)?;
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct StageResult<T> {
    pub config: StageConfig<T>,
    pub delta: T,
    pub control: Vec<T>,
    pub velocity: CgVectorField<T>,
    /// `phi_i`, the stage's deformed image.
    pub deformed: DgScalarField<T>,
    pub initial: ObjectiveValue<T>,
    pub last: ObjectiveValue<T>,
    pub status: LbfgsStatus,
    pub trace: Vec<IterationRecord<T>>,
    pub evaluations: usize,
}

/// One trace row of a multi-stage run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow<T> {
    pub stage: usize,
    pub record: IterationRecord<T>,
}

#[derive(Debug, Clone)]
pub struct RegistrationResult<T> {
    pub input: DgScalarField<T>,
    pub stages: Vec<StageResult<T>>,
    pub initial_l2: T,
    pub final_l2: T,
    pub initial_tukey: T,
    pub final_tukey: T,
}

impl<T: Real> RegistrationResult<T> {
    pub fn velocities(&self) -> Vec<&CgVectorField<T>> {
        self.stages.iter().map(|s| &s.velocity).collect()
    }

    /// `phi_0, phi_1, ..., phi_k`.
    pub fn images(&self) -> Vec<&DgScalarField<T>> {
        std::iter::once(&self.input)
            .chain(self.stages.iter().map(|s| &s.deformed))
            .collect()
    }

    pub fn final_image(&self) -> &DgScalarField<T> {
        self.stages
            .last()
            .map(|s| &s.deformed)
            .unwrap_or(&self.input)
    }

    /// Stage traces in order.
    pub fn trace(&self) -> Vec<TraceRow<T>> {
        self.stages
            .iter()
            .enumerate()
            .flat_map(|(i, s)| {
                s.trace.iter().map(move |r| TraceRow {
                    stage: i + 1,
                    record: r.clone(),
                })
            })
            .collect()
    }

    /// `final_l2 / initial_l2`; 0 when the images already agree.
    pub fn relative_discrepancy(&self) -> T {
        if self.initial_l2 > T::zero() {
            self.final_l2 / self.initial_l2
        } else {
            T::zero()
        }
    }
}

/// Optimizes one stage from `v_hat = 0`.
pub fn run_stage<T: Real>(
    mesh: &GridMesh<T>,
    phi_start: &DgScalarField<T>,
    phi_e: &DgScalarField<T>,
    config: &StageConfig<T>,
) -> Result<StageResult<T>> {
    config.validate()?;
    let delta = config
        .delta
        .unwrap_or_else(|| default_delta(phi_e.coeffs()));
    let objective_cfg = ObjectiveConfig::new(delta, config.gamma, config.tukey_c)?;
    let objective = ReducedObjective::new(
        mesh,
        phi_start,
        phi_e,
        config.transport(),
        objective_cfg,
        config.smoother(),
    )?;
    let zero = vec![T::zero(); objective.control_len()];
    let initial = objective.evaluate(&zero)?;
    let res = lbfgs_minimize(
        |x: &[T]| {
            let rep = objective.evaluate_with_gradient(x)?;
            Ok(Evaluated {
                value: rep.value.objective,
                gradient: rep.gradient,
                tracking: Some(rep.value.l2_discrepancy),
            })
        },
        &zero,
        &config.lbfgs(),
    )?;
    let velocity = objective.velocity(&res.x)?;
    let deformed = objective.transport(&res.x)?;
    let last = objective.evaluate(&res.x)?;
    log::info!(
        "stage finished: {} after {} iterations, objective {:.6e} -> {:.6e}",
        res.status.as_str(),
        res.trace.len(),
        initial.objective,
        last.objective
    );
    Ok(StageResult {
        config: *config,
        delta,
        control: res.x,
        velocity,
        deformed,
        initial,
        last,
        status: res.status,
        trace: res.trace,
        evaluations: res.evaluations,
    })
}

/// Runs the stages in order; errors carry the 1-based stage index.
pub fn register_multistage<T: Real>(
    mesh: &GridMesh<T>,
    phi_a: &DgScalarField<T>,
    phi_e: &DgScalarField<T>,
    stages: &[StageConfig<T>],
) -> Result<RegistrationResult<T>> {
    if stages.is_empty() {
        return Err(Error::invalid("registration needs at least one stage"));
    }
    phi_a.check_mesh(mesh)?;
    phi_e.check_mesh(mesh)?;
    let initial_l2 = crate::objective::l2_discrepancy(mesh, phi_a, phi_e)?;
    let tukey_c = stages[0].tukey_c;
    let initial_tukey = tukey_metric(phi_a.coeffs(), phi_e.coeffs(), tukey_c)?;
    let mut results: Vec<StageResult<T>> = Vec::with_capacity(stages.len());
    for (i, cfg) in stages.iter().enumerate() {
        let start = results.last().map(|r| &r.deformed).unwrap_or(phi_a);
        let r = run_stage(mesh, start, phi_e, cfg).map_err(|e| Error::Stage {
            stage: i + 1,
            source: Box::new(e),
        })?;
        results.push(r);
    }
    let last = &results.last().expect("non-empty").deformed;
    let final_l2 = crate::objective::l2_discrepancy(mesh, last, phi_e)?;
    let final_tukey = tukey_metric(last.coeffs(), phi_e.coeffs(), tukey_c)?;
    Ok(RegistrationResult {
        input: phi_a.clone(),
        stages: results,
        initial_l2,
        final_l2,
        initial_tukey,
        final_tukey,
    })
}

//! Order-of-accuracy study of the transport solver against traced characteristics.
//!
//! Each case is defined on the unit square and scaled onto an `n x n` pixel box:
//! the velocity becomes `n w(x / n)`, so every level resolves the same flow
//! with mesh size `1 / n` in unit coordinates. Errors are reported in unit
//! coordinates (`L2 / n` in two dimensions).

use std::str::FromStr;

use rayon::prelude::*;

use crate::discretization::quadrature::element_rule;
use crate::discretization::{build_box_mesh, CgVectorField, DgScalarField};
use crate::error::{Error, Result};
use crate::transport::solver::{TransportProblem, TransportSolver};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvergenceCase {
    /// Gaussian blob under a compactly supported sheared rotation.
    RotateBlob,
    /// Gaussian blob under a compactly supported drift.
    TranslateBlob,
}

impl FromStr for ConvergenceCase {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rotate-blob" => Ok(Self::RotateBlob),
            "translate-blob" => Ok(Self::TranslateBlob),
            other => Err(Error::invalid(format!(
                "unknown convergence case '{other}'"
            ))),
        }
    }
}

impl ConvergenceCase {
    pub fn name(self) -> &'static str {
        match self {
            Self::RotateBlob => "rotate-blob",
            Self::TranslateBlob => "translate-blob",
        }
    }

    const SUPPORT: f64 = 0.45;
    const WIDTH: f64 = 0.08;

    fn bump(y: [f64; 2]) -> f64 {
        let r2 = ((y[0] - 0.5).powi(2) + (y[1] - 0.5).powi(2)) / (Self::SUPPORT * Self::SUPPORT);
        if r2 >= 1.0 {
            0.0
        } else {
            (1.0 - r2).powi(4)
        }
    }

    /// Velocity in unit coordinates.
    pub fn velocity(self, y: [f64; 2]) -> [f64; 2] {
        let b = Self::bump(y);
        match self {
            Self::RotateBlob => {
                let w = std::f64::consts::FRAC_PI_2 * b;
                [-w * (y[1] - 0.5), w * (y[0] - 0.5)]
            }
            Self::TranslateBlob => [0.3 * b, 0.1 * b],
        }
    }

    /// Initial image in unit coordinates.
    pub fn initial(self, y: [f64; 2]) -> f64 {
        let c = match self {
            Self::RotateBlob => [0.65, 0.5],
            Self::TranslateBlob => [0.4, 0.45],
        };
        let r2 = (y[0] - c[0]).powi(2) + (y[1] - c[1]).powi(2);
        (-r2 / (2.0 * Self::WIDTH * Self::WIDTH)).exp()
    }

    /// Exact solution at time `t`: the initial image at the foot of the
    /// backward characteristic, integrated with `substeps` classical RK4 steps.
    pub fn exact(self, y: [f64; 2], t: f64, substeps: usize) -> f64 {
        let h = -t / substeps as f64;
        let f = |p: [f64; 2]| self.velocity(p);
        let mut p = y;
        for _ in 0..substeps {
            let k1 = f(p);
            let k2 = f([p[0] + 0.5 * h * k1[0], p[1] + 0.5 * h * k1[1]]);
            let k3 = f([p[0] + 0.5 * h * k2[0], p[1] + 0.5 * h * k2[1]]);
            let k4 = f([p[0] + h * k3[0], p[1] + h * k3[1]]);
            for i in 0..2 {
                p[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        self.initial(p)
    }
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub case: ConvergenceCase,
    /// Pixels per axis on the coarsest level.
    pub base: usize,
    pub levels: usize,
    pub cfl: f64,
    pub final_time: f64,
    pub epsilon: f64,
    /// RK4 steps used to trace each characteristic of the reference solution.
    pub oracle_substeps: usize,
}

impl Default for ConvergenceConfig {
    fn default() -> Self {
        Self {
            case: ConvergenceCase::RotateBlob,
            base: 16,
            levels: 4,
            cfl: 0.2,
            final_time: 1.0,
            epsilon: 0.0,
            oracle_substeps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub steps: usize,
    pub dt: f64,
    pub cfl: f64,
    pub l2_error: f64,
    /// `log2` of the error ratio to the previous, coarser level.
    pub order: Option<f64>,
}

/// Solves the case on `base * 2^k` pixels for `k < levels` at a fixed CFL number.
pub fn convergence_study(config: &ConvergenceConfig) -> Result<Vec<ConvergenceRow>> {
    if config.levels == 0 || config.base < 2 {
        return Err(Error::invalid(
            "convergence study needs >= 1 level and base >= 2",
        ));
    }
    if !(config.cfl > 0.0) || !(config.final_time > 0.0) || config.oracle_substeps == 0 {
        return Err(Error::invalid(
            "cfl, final time and oracle substeps must be positive",
        ));
    }
    let mut rows: Vec<ConvergenceRow> = Vec::with_capacity(config.levels);
    for k in 0..config.levels {
        let n = config.base << k;
        let row = run_level(config, n)?;
        let order = rows.last().map(|p| (p.l2_error / row.l2_error).log2());
        log::info!(
            "level n={n}: steps={} L2={:.4e} order={order:?}",
            row.steps,
            row.l2_error
        );
        rows.push(ConvergenceRow { order, ..row });
    }
    Ok(rows)
}

/// Least-squares slope of `-log2(error)` against `log2(n)` over all rows.
pub fn fitted_order(rows: &[ConvergenceRow]) -> Option<f64> {
    if rows.len() < 2 {
        return None;
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.n as f64).log2(), r.l2_error.log2()))
        .collect();
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(-sxy / sxx)
}

fn run_level(config: &ConvergenceConfig, n: usize) -> Result<ConvergenceRow> {
    let case = config.case;
    let nf = n as f64;
    let mesh = build_box_mesh::<f64>(&[n, n])?;
    let velocity = CgVectorField::interpolate(
        &mesh,
        |p| {
            let w = case.velocity([p[0] / nf, p[1] / nf]);
            [nf * w[0], nf * w[1], 0.0]
        },
        true,
    );
    let speed = velocity.max_norm();
    let steps = ((config.final_time * speed / (config.cfl * mesh.h_min())).ceil() as usize).max(1);
    let problem = TransportProblem::new(velocity, config.final_time, steps, config.epsilon)?;
    let phi0 = DgScalarField::interpolate(&mesh, |p| case.initial([p[0] / nf, p[1] / nf]));
    let solver = TransportSolver::new(&mesh, &problem)?;
    let (phi_t, _) = solver.solve(&phi0, false)?;

    let rule = element_rule::<f64>(2);
    let per_cell: Vec<f64> = (0..mesh.num_cells())
        .into_par_iter()
        .map(|c| {
            let cell = mesh.cell(c);
            let mut s = 0.0;
            for (lam, w) in rule.points.iter().zip(&rule.weights) {
                let mut x = [0.0; 2];
                for (i, &v) in cell.iter().enumerate() {
                    let p = mesh.vertex(v);
                    x[0] += lam[i] * p[0];
                    x[1] += lam[i] * p[1];
                }
                let exact = case.exact(
                    [x[0] / nf, x[1] / nf],
                    config.final_time,
                    config.oracle_substeps,
                );
                let e = phi_t.eval_bary(c, lam) - exact;
                s += w * e * e;
            }
            s * mesh.volume(c)
        })
        .collect();
    let l2 = per_cell.iter().sum::<f64>().sqrt() / nf;
    let dt = problem.dt();
    Ok(ConvergenceRow {
        n,
        steps,
        dt,
        cfl: dt * speed / mesh.h_min(),
        l2_error: l2,
        order: None,
    })
}

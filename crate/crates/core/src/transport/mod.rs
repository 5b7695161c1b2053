//! DG1 upwind transport: numerical flux, spatial operator, RK2 time stepping.

pub mod convergence;
pub mod flux;
pub mod operator;
pub mod solver;

pub use convergence::{
    convergence_study, fitted_order, ConvergenceCase, ConvergenceConfig, ConvergenceRow,
};
pub use flux::{numerical_flux, sigmoid, smoothed_max, DEFAULT_EPSILON};
pub use operator::{TransportOperator, VelocitySensitivity};
pub use solver::{
    cfl_number, solve_transport, spatial_operator, step_rk2, CflReport, Trajectory,
    TransportOutput, TransportProblem, TransportSolver, DEFAULT_CFL_THRESHOLD,
};

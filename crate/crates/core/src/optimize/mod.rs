//! Quasi-Newton minimization and the multi-stage registration loop.

pub mod lbfgs;
pub mod multistage;

pub use lbfgs::{
    lbfgs_minimize, Evaluated, IterationRecord, LbfgsConfig, LbfgsResult, LbfgsStatus,
};
pub use multistage::{
    register_multistage, run_stage, RegistrationResult, StageConfig, StageResult, TraceRow,
};

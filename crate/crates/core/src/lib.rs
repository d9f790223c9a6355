//! Hybrid stochastic-deterministic minibatch proximal gradient (HSDMPG) for
//! ℓ2-regularized empirical risk minimization, with SVRG, SCSG, SGD and full
//! gradient descent baselines and exact oracle-call accounting.
//!
//! Quadratic losses are solved by [`hsdmpg_quadratic_solve`]. Logistic and
//! softmax losses go through [`hsdmpg_generic_solve`], which repeatedly
//! majorizes the objective by a quadratic and hands each model to the
//! quadratic solver.

pub mod baselines;
pub mod data;
pub mod error;
pub mod generic;
pub mod hsdmpg;
pub mod loss;
pub mod oracle;
pub mod stats;
pub mod svrg;

pub use baselines::{
    fgd_reference, fgd_solve, ridge_closed_form, scsg_solve, sgd_solve, svrg_full_solve, ErmSum,
    FgdConfig, Reference, ScsgConfig, SgdConfig, StepSize, SvrgFullConfig,
};
pub use data::{load_libsvm, synthesize_redundant, Dataset, SparseVector};
pub use error::{Error, Result};
pub use generic::{
    build_quadratic_model, hsdmpg_generic_solve, outer_tolerance, GenericConfig, GenericOutcome,
    OuterStopping, QuadraticModel,
};
pub use hsdmpg::{
    batch_schedule, build_subproblem, gamma_value, hsdmpg_quadratic_solve, inner_tolerance,
    AnchorSize, GammaMode, HsdmpgConfig, HsdmpgOutcome, HsdmpgState, InnerStopping, NuMode,
    ProximalSubproblem, ScheduleExponent, ScheduleMode, ScheduleParams,
};
pub use loss::{power_iteration_bound, ErmObjective, ErmProblem, LossKind, LossModel};
pub use oracle::{
    Clock, IfoCount, IfoCounter, OracleKind, Recorder, SolveOutcome, SolverTrace, StopRule,
    TraceMeta, TraceRecord, TRACE_CSV_HEADER,
};
pub use svrg::{svrg_minimize, svrg_run, FiniteSum, SnapshotRule, SvrgConfig, SvrgStopping};

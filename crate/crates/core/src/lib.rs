//! Adaptive regularization with high-order Taylor models.
// `!(x > 0.0)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod driver;
pub mod error;
pub mod hermite;
pub mod optimality;
pub mod oracle;
pub mod poly;
pub mod problems;
pub mod region;
pub mod subproblem;
pub mod sweep;
pub mod taylor;
pub mod tensor;
pub mod trust_region;

pub use error::{ArpError, Result};
pub use region::{FeasibleRegion, LineView};
pub use taylor::TaylorModel;
pub use tensor::{factorial, generalized_factorial, regpower_derivative_norm, SymmetricTensor};
pub use driver::{
    audit_run, rho, sigma_update, solve, solve_second_order, theoretical_eval_bound, AuditResult, IterationRecord, Mode,
    SolverConfig, SolverReport, SolverStatus,
};
pub use hermite::{
    build_ap, embed_instance, hermite_interpolate, lipschitz_certificate, EmbeddingKind, HermiteSegment,
    PiecewisePolynomial, SlowInstance,
};
pub use optimality::{chi, check_termination, phi_order1, phi_order2, phi_univariate, OptimalityCertificate};
pub use oracle::{Counted, DifferentiableOracle, EvalCounts, MultiPoly};
pub use problems::{registry, ProblemSpec};
pub use subproblem::{minimize_model, RegularizedModel, StepResult, StoppingReason};
pub use sweep::{export, fit_slope, SweepResult, SweepRow};

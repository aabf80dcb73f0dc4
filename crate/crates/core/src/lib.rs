//! Robust two-level cooperative set covering.
//!
//! Each demand node must be covered jointly by at least one y-facility and one
//! z-facility, where every facility misses a node with an uncertain
//! probability. The nonlinear joint-coverage constraint is relaxed through a
//! family of tangent half-spaces in log space, the budgeted (Γ) worst case is
//! dualized into a compact MILP, and the MILP is solved by the built-in
//! branch-and-bound engine. Every solution can then be checked against the
//! exact worst-case coverage.
//!
//! Module map:
//!
//! * [`types`]: instances, robust configuration, solutions and reports.
//! * [`generator`]: seeded test-case generator (families `P1`..`P10`).
//! * [`linearization`]: tangent cuts for `(1 - m)(1 - n) >= alpha`.
//! * [`oracle`]: exact worst-case miss probabilities and verification.
//! * [`model`]: standard-form MILP builders and LP-format I/O.
//! * [`solver`]: presolve, dual simplex, branch-and-bound, exhaustive oracle.
//! * [`harness`]: experiment matrix, summaries and reports.

pub mod error;
pub mod generator;
pub mod harness;
pub mod linearization;
pub mod model;
pub mod oracle;
pub mod solver;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    GammaBudget, Instance, RobustConfig, Solution, SolveStatus, VerificationReport,
    Classification,
};

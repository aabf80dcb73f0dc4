//! Built-in MILP solver and the exhaustive reference solver.
//!
//! [`solve`] presolves the model, solves LP relaxations with a dense dual
//! simplex and explores a best-first branch-and-bound tree on one shared
//! tableau. [`exhaustive_solve`] enumerates every `(y, z)` of a small instance
//! and is the oracle the branch-and-bound results are checked against.

mod bnb;
mod cuts;
mod exhaustive;
mod presolve;
mod simplex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::StandardFormModel;

pub use exhaustive::{exhaustive_solve, ExhaustiveVariant, EXHAUSTIVE_MAX_SITES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    /// Absolute optimality gap.
    pub abs_gap: f64,
    /// Relative optimality gap.
    pub rel_gap: f64,
    /// Primal feasibility tolerance of the simplex.
    pub feas_tol: f64,
    pub time_limit_s: Option<f64>,
    /// Maximum number of branched nodes.
    pub node_limit: Option<usize>,
    /// Coarser relative gap at which the search may stop early with status
    /// `gap-limit`.
    pub gap_limit: Option<f64>,
    #[serde(default)]
    pub branching: Branching,
    /// Separate Gomory and MIR cuts at the root.
    #[serde(default = "yes")]
    pub cuts: bool,
}

fn yes() -> bool {
    true
}

/// Rule for picking the branching column.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branching {
    /// Most fractional column, lowest index on ties.
    #[default]
    MostFractional,
    /// Pseudo-costs, initialized by strong branching until each column has
    /// a few observations in both directions.
    Reliability,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { abs_gap: 1e-6, rel_gap: 1e-6, feas_tol: 1e-7, time_limit_s: None, node_limit: None, gap_limit: None, branching: Branching::MostFractional, cuts: true }
    }
}

impl SolverOptions {
    /// Options that prove optimality up to `1e-9` absolute.
    pub fn exact() -> Self {
        SolverOptions { abs_gap: 1e-9, rel_gap: 0.0, ..Self::default() }
    }

    pub fn with_branching(mut self, branching: Branching) -> Self {
        self.branching = branching;
        self
    }

    pub fn with_cuts(mut self, cuts: bool) -> Self {
        self.cuts = cuts;
        self
    }

    pub fn with_time_limit(mut self, seconds: Option<f64>) -> Self {
        self.time_limit_s = seconds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let positive = self.abs_gap > 0.0 && self.feas_tol > 0.0 && self.rel_gap >= 0.0;
        let limits = self.time_limit_s.is_none_or(|t| t >= 0.0) && self.gap_limit.is_none_or(|g| g >= 0.0);
        if positive && limits {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid solver options {self:?}")))
        }
    }

    pub(crate) fn cutoff_gap(&self, incumbent: f64) -> f64 {
        self.abs_gap.max(self.rel_gap * incumbent.abs())
    }
}

/// Counters from one branch-and-bound run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Nodes that were branched on (0 when the root LP is integral).
    pub nodes: usize,
    pub lp_solves: usize,
    pub lp_iterations: usize,
    pub presolve_rows_removed: usize,
    pub presolve_cols_removed: usize,
    /// Cutting planes added at the root.
    pub cuts: usize,
    /// LP bound at the root before and after cuts.
    pub root_lp: f64,
    pub root_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOutcome {
    pub solution: crate::types::Solution,
    /// Incumbent in original column space.
    pub x: Option<Vec<f64>>,
    pub stats: SolveStats,
}

/// Solves a minimization MILP.
pub fn solve(model: &StandardFormModel, options: &SolverOptions) -> Result<crate::types::Solution> {
    Ok(bnb::branch_and_bound(model, options)?.solution)
}

/// Like [`solve`] but also returns the incumbent point and search counters.
pub fn solve_detailed(model: &StandardFormModel, options: &SolverOptions) -> Result<SolveOutcome> {
    bnb::branch_and_bound(model, options)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LpStatus {
    Optimal,
    Infeasible,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// `+inf` when infeasible.
    pub objective: f64,
    /// Primal point in original column space (empty when infeasible).
    pub values: Vec<f64>,
}

/// Solves the continuous relaxation.
pub fn solve_lp_relaxation(model: &StandardFormModel) -> Result<LpSolution> {
    let infeasible = LpSolution { status: LpStatus::Infeasible, objective: f64::INFINITY, values: Vec::new() };
    let Some(pre) = presolve::presolve(model, false)? else {
        return Ok(infeasible);
    };
    let mut tab = simplex::Tableau::new(&pre.reduced, SolverOptions::default().feas_tol);
    match tab.solve_robust() {
        simplex::LpStatus::Optimal => {
            let values = pre.expand(tab.values());
            Ok(LpSolution { status: LpStatus::Optimal, objective: model.objective_value(&values), values })
        }
        simplex::LpStatus::Infeasible => Ok(infeasible),
        simplex::LpStatus::Unbounded => Err(Error::MalformedModel("LP relaxation is unbounded".into())),
        simplex::LpStatus::IterationLimit => Err(Error::MalformedModel("simplex did not converge".into())),
    }
}

//! Solver-agnostic optimization kernel.
//!
//! The kernel knows nothing about bike lanes. It provides:
//!
//! * [`LinearModel`] / [`IntegerModel`] descriptions and an LP text writer,
//! * a bounded-variable dense simplex ([`solve_lp`], [`Simplex`]),
//! * LP-based branch-and-bound ([`solve_milp`]) generic over the node
//!   relaxation ([`Relaxation`]),
//! * highest-label push-relabel max-flow ([`max_flow`]) and the
//!   maximum-weight closure reduction built on it ([`solve_closure`]).

mod closure;
mod error;
mod lp;
mod lpwrite;
mod maxflow;
mod milp;
mod model;

pub use closure::{solve_closure, solve_closure_exact, ClosureProblem, ClosureSolution};
pub use error::KernelError;
pub use lp::{solve_lp, LpResult, LpSolution, LpStatus, Simplex, SimplexOptions};
pub use lpwrite::write_lp;
pub use maxflow::{max_flow, max_flow_exact, Capacity, FlowNetwork, MaxFlowResult};
pub use milp::{
    solve_milp, solve_with_relaxation, BranchAndBound, LpRelaxation, MilpOptions, MilpResult,
    MilpStatus, RelaxOutcome, Relaxation,
};
pub use model::{Constraint, IntegerModel, LinearModel, Relation, VarId, Variable};

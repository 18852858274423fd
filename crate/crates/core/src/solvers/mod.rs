//! Exact, Lagrangian and greedy planners.

mod exact;
mod greedy;
mod lagrangian;
mod restricted;
mod route_choice;

pub use exact::{solve_exact, ExactOptions};
pub use greedy::greedy;
pub use lagrangian::{
    gu_lag, gu_lag_with, lagrangian_subproblem, DualEvaluation, DualSearchState, LagrangianEngine, LagrangianOptions,
    SearchExit,
};
pub use route_choice::{solve_choice, ChoiceOptions, ChoiceSolution};

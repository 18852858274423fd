//! Command-line front end of the `bikelane` planner.

pub mod config;
pub mod files;
pub mod geojson;
pub mod pipeline;
pub mod sweep;

pub use config::{Algo, ModelKind, RunConfig};
pub use pipeline::{run_solve, Exit, Infeasible, PlanFile};
pub use sweep::run_sweep;

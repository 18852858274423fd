//! Bike-lane network planning from trajectory data.
//!
//! A [`model::PlanningInstance`] holds the road network, weighted trajectories,
//! budget and continuity utility. [`formulations`] turns it into integer
//! programs, [`solvers`] plans exactly, by Lagrangian relaxation over min-cut
//! subproblems, or greedily, and [`metrics`] summarizes the result.

pub mod choice;
pub mod error;
pub mod formulations;
pub mod ingest;
pub mod metrics;
pub mod model;
pub mod solvers;
pub mod testsupport;
pub mod utility;

pub use error::{Error, Result};

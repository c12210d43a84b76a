//! Adaptive ergodic imitation.
//!
//! A robot follows an expert demonstration while its progress matches the
//! demonstration's timeline. When progress stalls, a stagnation counter raises
//! a temperature that turns a particle target distribution from a tight tube
//! around the demonstration into a broad cloud, and a receding-horizon planner
//! that minimizes the maximum mean discrepancy (MMD) between visited states
//! and the particles explores around the reference until progress resumes.
//!
//! Modules:
//! - [`geometry`]: trajectories, arc length, projection, retrieval.
//! - [`phase`]: reference clock, phase error, stagnation counter, temperature.
//! - [`target`]: the particle SDE that builds the target distribution.
//! - [`planner`]: MMD objective, its gradient, and the receding-horizon planner.
//! - [`maze`]: the gated-wall navigation environment and scripted expert.
//! - [`harness`]: episodes, sweeps, CSV and SVG output.
//! - [`check`]: built-in oracle checks used by the `check` subcommand.

pub mod check;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod maze;
pub mod phase;
pub mod planner;
pub mod target;

pub use error::{Error, Result};

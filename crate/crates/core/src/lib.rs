//! Resilience of finite discrete-time controlled systems under uncertainty.
//!
//! A [`model::SystemModel`] holds the dynamics. Strategies close the loop
//! into path bundles, regimes say which bundles are acceptable, and the
//! solvers find the states from which some strategy keeps the bundle
//! acceptable, optionally at least risk.

pub mod error;
pub mod extension;
pub mod fixtures;
pub mod io;
pub mod model;
pub mod regime;
pub mod risk;
pub mod solver;
pub mod strategy;
pub mod trajectory;

pub use error::{Error, Result};

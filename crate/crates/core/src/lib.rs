//! Simulation and numerical verification of winding and upcrossing limit
//! laws for one- and two-dimensional stable Lévy processes.

pub mod cli;
pub mod config;
pub mod error;
pub mod experiments;
pub mod exponents;
pub mod parallel;
pub mod path_engine;
pub mod quad;
pub mod sampler;
pub mod specfun;
pub mod stats;
pub mod transforms;

pub use error::{Error, Result};
pub use exponents::StableParams;

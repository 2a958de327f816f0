//! Metrological sensitivity of quantum-chaotic sensors.
//!
//! Kicked-top and dissipative kicked-top dynamics, quantum and classical
//! Fisher information for the precession angle, classical Lyapunov
//! exponents, and a kicked cesium SERF magnetometer model.

pub mod classical;
pub mod dissipative;
pub mod error;
pub mod estimation;
pub mod exec;
pub mod floquet;
pub mod linalg;
pub mod runner;
pub mod serf;
pub mod spin;

pub use error::{Error, Result};

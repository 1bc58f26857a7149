//! Adaptive finite element gradient flow for ground and excited states of
//! the stationary Schrödinger equation on two-dimensional domains.

pub mod adapt;
pub mod error;
pub mod estimator;
pub mod fem;
pub mod gflow;
pub mod driver;
pub mod mesh;
pub mod problems;

pub use error::{Error, Result};

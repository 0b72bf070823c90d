//! Worst-case convergence bounds for stochastic first-order methods.

pub mod constraints;
pub mod error;
pub mod gram;
pub mod model;

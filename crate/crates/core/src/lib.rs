//! Sequential model-based diagnosis of combinational circuits.

pub mod circuit;
pub mod model;
pub mod solver;
pub mod reasoner;
pub mod term;
pub mod expectation;
pub mod policies;
pub mod harness;
pub mod wire;

//! Simulation and numerics for supercritical branching processes whose
//! reproduction depends on the parent's remaining lifetime.

pub mod cli;
pub mod error;
pub mod export;
pub mod extinction;
pub mod model;
pub mod quad;
pub mod renewal;
pub mod sim;
pub mod verify;

pub use error::{Error, Result};

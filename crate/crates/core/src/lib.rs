pub mod cli;
pub mod error;
pub mod guarantees;
pub mod harness;
pub mod io;
pub mod numerics;
pub mod model;
pub mod operators;
pub mod solvers;

pub use error::{Error, Result};

pub mod error;
pub mod io;
pub mod operator;
pub mod phasediagram;
pub mod predict;
pub mod phantoms;
pub mod rng;
pub mod solvers;
pub mod theory;
pub mod sensing;

pub use error::{Error, Result};

pub mod cli;
pub mod error;
pub mod eval;
pub mod fem;
pub mod forecast;
pub mod fpca;
pub mod geometry;
pub mod synth;
#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Error, Result};

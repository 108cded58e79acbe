pub mod adacad;
pub mod autodiff;
pub mod config;
pub mod data;
pub mod diffusion;
pub mod error;
pub mod graph;
pub mod model;
pub mod sparse;
pub mod stats;
pub mod train;

#[cfg(test)]
mod testutil;

pub use error::{Error, Result};

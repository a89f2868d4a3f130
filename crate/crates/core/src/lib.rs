pub mod analysis;
pub mod cli;
pub mod comparison;
pub mod data;
pub mod error;
pub mod eval;
pub mod neural;
pub mod service;

pub use error::{Error, Result};

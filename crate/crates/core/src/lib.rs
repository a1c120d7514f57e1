pub mod chance;
pub mod config;
pub mod consistency;
pub mod distributions;
pub mod error;
pub mod lp;
pub mod numeric;
pub mod problem;
pub mod risk;
pub mod seed;
pub mod solvers;
pub mod support;

pub use error::{Error, Result};

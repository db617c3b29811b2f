pub mod baselines;
pub mod belief;
pub mod config;
pub mod coordination;
pub mod entities;
pub mod error;
pub mod harness;
pub mod planning;
pub mod prediction;
pub mod rng;
pub mod trace_tools;
pub mod world;

pub use error::{Error, Result};

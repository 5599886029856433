pub mod cli;
pub mod config;
pub mod error;
pub mod geometry;
pub mod noise;
pub mod operators;
pub mod scenarios;
pub mod solver;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};

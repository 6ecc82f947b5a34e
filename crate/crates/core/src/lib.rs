pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod optimizers;
pub mod problems;
pub mod rng;
pub mod schedules;
pub mod verify;

pub use error::{Error, Result};

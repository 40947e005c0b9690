//! Experiment engine behind the `csisa` command: matrix generation, seeded
//! instanton sampling with histograms, and record verification.

pub mod config;
pub mod engine;
pub mod error;
pub mod histogram;
pub mod record;
pub mod verify;

pub use error::{exit, HarnessError, Result};

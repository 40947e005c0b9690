//! Basis pursuit decoding and instanton search for real-valued compressed
//! sensing.
//!
//! Given a measurement matrix `F`, an *instanton* is an error vector on which
//! ℓ1 recovery (basis pursuit) fails while it succeeds on every vector
//! obtained by zeroing one of its nonzero entries. [`isa`] finds instantons
//! by alternating basis pursuit with a median truncation; [`oracle`] supplies
//! LP-independent ground truth at small sizes.

pub mod basp;
pub mod error;
pub mod isa;
pub mod linalg;
pub mod lp;
pub mod oracle;
pub mod rng;

pub use error::{Error, Result};

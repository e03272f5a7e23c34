//! Interactive segmentation with test-time adaptation of a small promptable
//! model.
//!
//! The crate is organized bottom-up: [`mask`] holds the binary and ternary
//! grid operations, [`oracle`] the simulated user, [`neuro`] the surrogate
//! model, [`adapt`] the loss and adaptation strategies, [`session`] the
//! interactive loop and benchmark, and [`data`] ingestion and persistence.

pub mod adapt;
pub mod data;
pub mod error;
pub mod mask;
pub mod neuro;
pub mod oracle;
pub mod pretrain;
pub mod seeds;
pub mod session;

pub use error::{Error, Result};

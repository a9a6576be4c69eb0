//! Simulator of the neutron double-slit bit commitment protocol.

pub mod adversary;
pub mod constants;
pub mod decay;
pub mod engine;
pub mod error;
pub mod fmt;
pub mod harness;
pub mod protocol;
pub mod rng;
pub mod session;
pub mod stats;
pub mod verifier;

pub use error::{QbcError, Result};

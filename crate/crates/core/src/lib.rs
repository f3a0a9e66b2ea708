//! Monotone inclusion solvers built on σ-approximate resolvents.
//!
//! Every step of [`hpe::hpe_solve`] carries a certificate `(y, v, ε)` with
//! `v ∈ T^[ε](y)` that can be replayed and checked independently. The
//! forward-backward, Tseng and Korpelevich splittings in [`splittings`] are
//! oracles producing such certificates.

pub mod cli;
pub mod enlargement;
pub mod error;
pub mod fejer;
pub mod hpe;
pub mod operators;
pub mod problems;
pub mod splittings;

pub use enlargement::Certificate;
pub use error::{Error, Result};
pub use hpe::{hpe_solve, HpeConfig, LambdaSchedule, SolveTrace};
pub use operators::{MonotoneOp, Vector};

//! Certification toolkit for group-sparse and total-variation regularized
//! linear inverse problems: solvers, dual certificates, and polyhedral cone
//! tests deciding sharpness, uniqueness, and stability of recovery.

pub mod analysis;
pub mod certify;
pub mod error;
pub mod groups;
pub mod fixtures;
pub mod harness;
pub mod linalg;
pub mod polyhedra;
pub mod rng;
pub mod solvers;

pub use error::{Error, Result};

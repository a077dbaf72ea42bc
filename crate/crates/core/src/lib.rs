//! Numerical study of approximation and entropy numbers of composition
//! operators on Hardy spaces of the disk and polydisk.
//!
//! The pipeline runs symbol → operator matrix → singular values → Carl
//! transform → decay-model fit, with a finite-difference Green capacity
//! solver for the capacity laws.

pub mod asymptotics;
pub mod capacity;
pub mod carl;
pub mod error;
pub mod hardy_matrix;
mod jacobi;
pub mod quadrature;
pub mod series;
pub mod spectrum;
pub mod symbols;
pub mod verify;

pub use error::{Error, Result};
pub use num_complex::Complex64;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

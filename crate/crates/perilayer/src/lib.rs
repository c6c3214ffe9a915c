//! Matched asymptotic expansion of the Poisson problem with a thin periodic
//! layer of Neumann holes meeting two re-entrant corners.
//!
//! The crate computes the effective transmission constants from strip cell
//! problems, builds the macroscopic, boundary-layer and near-field terms at
//! low order, and compares the resulting composite approximation with a
//! direct finite-element solution of the perforated problem.

pub mod cell;
pub mod config;
pub mod error;
pub mod expansion;
pub mod fem;
pub mod geometry;
pub mod lstsq;
pub mod macroscopic;
pub mod mesh;
pub mod nearfield;
pub mod study;

pub use error::{Error, Result};

/// Runs every sparse factorization sequentially and sizes the worker pool
/// used for independent stages. Results do not depend on `threads`.
pub fn configure_parallelism(threads: usize) {
    faer::set_global_parallelism(faer::Par::Seq);
    let _ = rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global();
}

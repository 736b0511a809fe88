//! Outlier-robust sparse and low-rank regression built on sorted Huber losses.
//!
//! The crate provides the building blocks (sorted-l1 norms, proximal
//! operators, sorted Huber losses), batch proximal solvers for the three
//! estimator families (additive low-rank-plus-sparse decomposition, single
//! quadratic, single square-root), synthetic contaminated data generation,
//! theory-driven tuning defaults and rate formulas, brute-force oracles used
//! by the test suite, and an experiment harness behind the `sorted-huber`
//! binary.

pub mod datagen;
pub mod error;
mod linalg;
pub mod norms;
pub mod oracle;
pub mod prox;
pub mod rng;
pub mod cli;
pub mod rates;
pub mod solvers;

pub use error::{Error, Result};

//! Private read-update-write (PRUW) over N replicated databases with top-r
//! sparsification.
//!
//! The library simulates the four protocol variants (uncoded / MDS-coded
//! storage, single-stage / two-stage permutations), together with exact
//! analyzers for index-information leakage, communication cost and storage
//! cost.  All protocol arithmetic is over a prime field and is exact; the
//! correctness checks in the test suites are zero-tolerance.

// Indexed loops and spelled-out tuple types read better in matrix-heavy code.
#![allow(clippy::needless_range_loop, clippy::type_complexity)]

pub mod client;
pub mod coordinator;
pub mod cost;
pub mod error;
pub mod field;
pub mod leakage;
pub mod linalg;
pub mod logsum;
pub mod node;
pub mod perm;
pub mod quantize;
pub mod scheme;
pub mod sim;
pub mod snapshot;

pub use error::Error;
pub use field::{FieldConfig, PrimeField, DEFAULT_MODULUS};
pub use scheme::{CaseId, ModelState, SchemeParams};

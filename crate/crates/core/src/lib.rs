//! Disk-resident collision-counting LSH for approximate k-nearest-neighbour
//! search, with pluggable strategies for choosing the projected search
//! radius: exponential virtual rehashing, a sampled initial radius, and a
//! learned per-query radius with improved or linear expansion.
//!
//! The crate is organized bottom-up:
//!
//! * [`lsh`]: hash family, collision probability, parameter derivation.
//! * [`index`]: paged per-projection bucket files with I/O cost counters.
//! * [`search`]: collision counting, radius schedules, strategy registry.
//! * [`model`]: ground-truth radii, initial-radius sampling, the regressor.
//! * [`bench`]: datasets, exact k-NN, the cost model, benchmark runs.

pub mod bench;
pub mod error;
pub mod index;
pub mod lsh;
pub mod model;
pub mod search;

pub use error::{Error, Result};

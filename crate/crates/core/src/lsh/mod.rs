//! Euclidean LSH primitives: hash family, collision probability and the
//! collision-counting constants.

pub mod hash;
pub mod params;
pub mod prob;
pub mod rng;

pub use hash::{
    domain_exponent, domain_radius, hash_level, offset_upper_bound, HashFamily, HashFunction,
    OffsetRange, Signature,
};
pub use params::LshParams;
pub use prob::collision_prob;
pub use rng::SplitMix64;

//! Distributions, seeded substreams and renewal processes.

pub mod distribution;
pub mod renewal;
pub mod rng;

pub use distribution::{DistributionSpec, Moments, Role, Sampler};
pub use renewal::{renewal_decompose, scale_renewal, RenewalDecomposition, RenewalStream, ScaleMode, ScaledRenewal};
pub use rng::{derive_seed, replication_seed, substream, StreamKind, StreamRng};

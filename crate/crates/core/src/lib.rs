//! Simulation and tail asymptotics for a single-server FIFO queue with
//! Bernoulli feedback and heavy-tailed service times.
//!
//! A customer finishing service rejoins the tail of the queue with
//! probability `p`; the crate provides the service laws ([`dist`]), exact
//! simulators ([`sim`]), closed-form asymptotes ([`asymptotics`]), empirical
//! tail estimators ([`estimate`]) and a config-driven experiment runner
//! ([`experiment`]).

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod asymptotics;
pub mod dist;
pub mod error;
pub mod estimate;
pub mod experiment;
pub mod model;
pub(crate) mod quad;
pub mod rng;
pub mod sim;

pub use dist::DistributionSpec;
pub use error::{Error, Result};
pub use model::{DerivedConstants, ModelParams};
pub use rng::RandomStream;

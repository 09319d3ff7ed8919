//! Simulation and analysis engine for a directed heteropolymer interacting
//! with random droplets placed on the first coordinate axis.
//!
//! The polymer is the space-time path `S_i = (i, w(i))` of a walk whose `d`
//! transverse coordinates each step by ±1. Monomer signs `ω_i = ±1` and
//! droplet indicators `η_i = ±1` form one quenched disorder realization; the
//! Gibbs weight of a path is `exp{λ Σ Δ(S_i)(ω_i + h)}` where `Δ` flips to
//! −1 exactly on occupied droplet sites. Because the interaction lives only
//! on the axis, the return skeleton of the walk is a sufficient statistic
//! and everything reduces to a one-dimensional renewal recursion:
//!
//! * [`kernel`] — disorder-free walk combinatorics: return / first-return /
//!   survival probability tables and the escape probability.
//! * [`model`] — coupling parameters and quenched disorder generation.
//! * [`partition`] — exact log-space partition sums over the renewal
//!   structure, free-energy estimation across disorder replicas.
//! * [`sampler`] — exact Gibbs path sampling (backward skeleton + excursion
//!   fill) and path observables.
//! * [`phase`] — localized/delocalized classification, critical-curve
//!   bisection, analytic phase bounds, endpoint-tail fits.
//!
//! All randomness flows through counter-style seeded streams
//! ([`rng::rng_stream`]), so results are independent of execution order and
//! worker count.

pub mod brute;
pub mod error;
pub mod excursions;
pub mod kernel;
pub mod model;
pub mod numerics;
pub mod partition;
pub mod phase;
pub mod rng;
pub mod sampler;

pub use error::Error;
pub use kernel::WalkKernel;
pub use model::{Disorder, ModelParams};
pub use partition::{FreeEnergyEstimate, PartitionTables};
pub use phase::{PhasePoint, Verdict};
pub use sampler::{EndpointHistogram, PathSample};

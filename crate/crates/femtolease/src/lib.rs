//! System-level simulator of uplink macrocell-femtocell cooperation.
//!
//! Femtocell users relay traffic for nearby macrocell users over D2D links
//! in exchange for a leased fraction of the macro user's superframe. The
//! crate models the two-tier channel and queueing behavior, runs the
//! distributed coalition-formation game with per-coalition lease
//! optimization, checks outcomes against an exhaustive recursive-core
//! oracle on small instances, and aggregates seeded Monte-Carlo sweeps into
//! CSV/JSON reports.

pub mod channel;
pub mod coalition;
pub mod config;
pub mod error;
pub mod experiments;
pub mod leaseopt;
pub mod rng;
pub mod scalar;
pub mod topology;
pub mod traffic;

/// Scalar type of the simulation stack. The closed-form kernel is generic
/// over [`scalar::Scalar`]; everything topology-sized runs at `f64`.
pub type Real = f64;

pub use config::{AccessPolicy, ScenarioConfig};
pub use error::{Error, Result};
pub use topology::{generate_topology, NetworkTopology, PlayerId};

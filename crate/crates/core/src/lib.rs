//! Federated learning with energy-harvesting devices and over-the-air
//! gradient aggregation.
//!
//! The crate simulates global training rounds in which each device
//! participates only when it has harvested energy, weights its model
//! difference by how long it has been idle, and transmits over a Rayleigh
//! fading multiple-access channel to a multi-antenna server. It also evaluates
//! the accompanying convergence-bound recursion numerically.
//!
//! Modules, bottom-up:
//!
//! - [`model`]: parameter vectors, complex packing, loss tasks.
//! - [`energy`]: Bernoulli and periodic energy arrivals, cooldown bookkeeping.
//! - [`channel`]: topology, path loss and per-round fading/noise draws.
//! - [`ota`]: scaling, error-free aggregation, superposition, combining and
//!   recovery.
//! - [`trainer`]: the round loop and scenarios.
//! - [`bound`]: the convergence-bound recursion and its closed forms.
//! - [`config`] and [`output`]: key=value configuration, CSV and manifest
//!   emission.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bound;
pub mod channel;
pub mod config;
pub mod energy;
pub mod error;
pub mod model;
pub mod ota;
pub mod output;
pub mod rng;
pub mod trainer;

pub use error::{Error, Result};

//! Outage analysis for OFDM multicast-broadcast single-frequency networks.
//!
//! The crate is organised bottom-up:
//!
//! - [`topology`]: constrained-random base-station layouts, hexagonal
//!   MBSFN anchors, area assignment, combining sets and the evaluation grid.
//! - [`channel`]: path loss, Nakagami shape map, correlated log-normal
//!   shadowing and normalized received powers.
//! - [`outage`]: the closed-form conditional outage probability of a
//!   location given its received powers.
//! - [`mc`]: Monte Carlo and numerical-convolution oracles for the kernel.
//! - [`metrics`]: outage maps, ABOT, spatial averaging and parameter sweeps.
//!
//! Data-parallel loops run on rayon when the `parallel` feature is enabled
//! (the default); see [`exec::Execution`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod mc;
pub mod metrics;
pub mod outage;
pub mod quadrature;
pub mod rng;
pub mod topology;

pub use error::{Error, Result};
pub use exec::Execution;
pub use geometry::Point;

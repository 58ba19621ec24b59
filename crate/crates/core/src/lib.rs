//! Time-slotted simulator of a two-tier wireless network in which a dense
//! secondary tier relays packets for a sparse primary tier while carrying its
//! own traffic, together with the analytical bounds the simulation is
//! checked against.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod analytics;
pub mod channel;
pub mod config;
pub mod deployment;
pub mod experiments;
pub mod geometry;
pub mod interference;
pub mod metrics;
pub mod primary;
pub mod secondary_mobile;
pub mod secondary_static;
pub mod seeds;
pub mod trace;

pub use error::{Error, Result};

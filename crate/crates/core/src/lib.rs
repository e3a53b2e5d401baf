//! Finite-volume tracer advection on a single layer of hexahedral columns
//! over orography, with the horizontal mesh moved by an optimal-transport
//! (Monge-Ampere) map and a per-cell volume-adjustment field that keeps
//! uniform tracers uniform as cells slide over the terrain.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod advection;
pub mod config;
pub mod error;
pub mod experiments;
pub mod geometry;
pub mod monge_ampere;
pub mod output;
pub mod sparse_linear;

pub use error::{Error, Result};

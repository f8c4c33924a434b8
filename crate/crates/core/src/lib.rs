//! Offline/online estimation of time-varying source parameters in 1D
//! advection-diffusion problems.
//!
//! The offline phase builds an equispaced mesh and assembles the
//! semi-discrete linear system `du/dt = A u + theta(t) b` with central
//! differences ([`mesh`]). The online phase runs an auxiliary particle filter
//! that jointly tracks the states, the source parameter `theta` and the
//! standard deviation of its random-walk drift ([`filter`]), with Liu-West
//! shrinkage on the drift coefficient.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod banded;
pub mod error;
pub mod filter;
pub mod integrate;
pub mod mesh;
pub mod models;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};

//! Numerical solver and verification suite for the semilinear problem
//! `(-Δ)^s u = λ u^q + u^r` with mixed Dirichlet-Neumann boundary conditions,
//! where `(-Δ)^s` is the spectral fractional Laplacian on a bounded domain.
//!
//! The crate discretizes interval/rectangle domains with uniform tensor grids,
//! eigendecomposes the mixed-boundary Laplacian, and realizes every fractional
//! operation in the resulting eigenbasis. On top of that sit sub/supersolution
//! monotone iteration, Newton refinement, a mountain-pass saddle search,
//! branch continuation in λ with extremal-parameter bracketing, and sweeps
//! over nested families of boundary partitions.

pub mod analysis;
pub mod config;
pub mod continuation;
pub mod error;
pub mod extension;
pub mod mesh;
pub mod output;
pub mod solve;
pub mod spectral;
pub mod util;
pub mod verify;

pub use error::{Error, Result};

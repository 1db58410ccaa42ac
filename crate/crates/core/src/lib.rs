//! Forward simulation and inference for resolved-sideband optomechanical thermometry.
//!
//! The crate synthesizes the motional sideband spectra of a laser-cooled mechanical
//! mode read out through a second optical resonance, passes them through a detection
//! chain with analyzer noise, and recovers the phonon occupancy from the asymmetry
//! between the Stokes and anti-Stokes sidebands.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod estimation;
pub mod experiment;
pub mod io;
pub mod physics;
pub mod spectra;

//! Tri-hybrid beamforming for integrated sensing and communication with
//! electromagnetically reconfigurable antennas (ERAs).
//!
//! Each transmit element radiates a pattern that is a unit-norm combination of
//! truncated spherical harmonics. The transmitter jointly optimizes a baseband
//! digital precoder, a unit-modulus analog precoder and the per-element
//! harmonic coefficients to maximize a weighted sum of the downlink sum rate
//! and the radar signal-to-clutter-plus-noise ratio.
//!
//! Module map:
//!
//! - [`harmonics`]: associated Legendre functions, spherical harmonics, basis vectors
//! - [`geometry`]: uniform planar array steering
//! - [`channel`]: scenario sampling and EM-domain channel synthesis
//! - [`metrics`]: SINR, sum rate, SCNR and radiation patterns
//! - [`manifolds`]: sphere / unit-modulus primitives and hybrid factorization
//! - [`solver`]: fractional-programming alternating optimizer
//! - [`harness`]: Monte-Carlo trials, sweeps and CSV export

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod error;
pub mod geometry;
pub mod harmonics;
pub mod harness;
pub mod linalg;
pub mod manifolds;
pub mod metrics;
pub mod solver;

pub use error::{Error, Result};
pub use num_complex::Complex64;

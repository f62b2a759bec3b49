//! Squeezed-vacuum cavity spectroscopy.
//!
//! A squeezed vacuum field carries correlated quantum sidebands around its
//! carrier. When such a field reflects off a detuned optical cavity, sidebands
//! that fall inside the cavity linewidth are stripped out and replaced by
//! vacuum, which destroys the sideband correlation over that band and pulls
//! the measured quadrature noise toward the shot-noise level. The shape of
//! that feature in a homodyne noise spectrum encodes the cavity parameters,
//! so the cavity can be characterized with essentially no circulating power.
//!
//! This crate provides the forward model and the inverse problem:
//!
//! - [`cavity`] — ring-cavity reflection and loss coefficients, linewidth,
//!   quality factor, and finesse.
//! - [`two_photon`] — quadrature (two-photon) transfer of Gaussian noise
//!   through the detuned cavity and the detection chain.
//! - [`oracle`] — independent validation paths: direct sideband-moment
//!   propagation and a seeded Monte Carlo sampler.
//! - [`synth`] — synthetic spectrum-analyzer traces with the quantum
//!   measurement-noise model.
//! - [`estimator`] — weighted nonlinear least-squares fits with parameter
//!   covariance and uncertainty propagation to linewidth, Q, and finesse.
//!
//! The crate is `no_std` (with `alloc`); all I/O, file formats, and the
//! command-line front end live in the companion `sqzspec` crate.
//!
//! Conventions: quadrature variances are linear relative to shot noise
//! (vacuum = 1), frequencies at external interfaces are in hertz
//! (non-angular), and decibel values are power dB, `10 log10(V)`.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod cavity;
pub mod estimator;
pub mod oracle;
pub mod synth;
pub mod two_photon;

pub use cavity::{Detuning, RingCavity};
pub use estimator::{FitParameter, FitResult, FitSpec, ModelParams};
pub use two_photon::{DetectionModel, InputSqueezingModel, QuadratureSpectrum, TwoPhotonTransfer};

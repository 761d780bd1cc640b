//! Spectral mixture reverse engineering.
//!
//! Given Raman-style spectra of an unknown mixture, this crate identifies the
//! constituents by blind source separation against a reference library and
//! quantifies the composition with a mixture-design-calibrated PLS model.
//!
//! The pieces, in pipeline order:
//!
//! * [`spectra`] — spectrum/axis types, SNV normalization, multiplicative
//!   signal correction, resampling, CSV formats.
//! * [`speclib`] — persistent library of raw-material reference spectra and
//!   correlation-based identification.
//! * [`bss`] — whitening, sequential InfoMax ICA with Gram-Schmidt deflation,
//!   mixing-matrix recovery and ICA-by-blocks model-order selection.
//! * [`design`] — Scheffé simplex-lattice and simplex-centroid mixture
//!   designs with component bounds.
//! * [`pls`] — NIPALS PLS regression, cross-validation and the usual
//!   chemometric quality metrics.
//! * [`synth`] — seeded synthetic spectrum generator used as ground truth in
//!   tests and for desk-scale experiments.
//!
//! With the default `parallel` feature, independent fits (ICA blocks/orders,
//! cross-validation folds, library matching) run on rayon; results are
//! identical to the sequential build, which is selected by disabling default
//! features.

pub mod bss;
pub mod design;
mod error;
mod fsutil;
mod linalg;
mod par;
pub mod pls;
pub mod speclib;
pub mod spectra;
pub mod synth;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

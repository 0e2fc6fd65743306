//! Regularized solution of ill-posed linear equations `K x = y` from `n`
//! repeated noisy measurements: averaging, noise-level estimation,
//! spectral filters and discrepancy-based parameter choice.

// Guards written as `!(x > 0.0)` also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod error;
pub mod filters;
pub mod io;
pub mod measurements;
pub mod rng;
pub mod selection;
pub mod spectral;
pub mod study;

pub use error::{Error, Result};
pub use filters::{FilterKind, FilterSpec};
pub use measurements::{BatchStats, DeltaRule, MeasurementBatch, NoiseModel};
pub use selection::{AprioriRule, ChoiceResult};
pub use spectral::{CoefficientVector, SpectralDecomposition};

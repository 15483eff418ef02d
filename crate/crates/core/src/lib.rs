//! Chain mappings of bosonic baths onto generalized q-chains.
//!
//! The crate works with positive measures on the real line: it computes
//! recurrence coefficients of their orthogonal polynomials, Stieltjes
//! transforms and reducers, sequences of secondary measures, the chain
//! coefficients of a spectral density, residual spectral densities, and
//! convergence diagnostics for long chains.
//!
//! Everything here is `no_std` compatible and only needs `alloc`.

#![cfg_attr(not(test), no_std)]
// `!(a < b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod eigen;
mod error;
mod math;
mod quad;

pub mod chainmap;
pub mod convergence;
pub mod measures;
pub mod orthopoly;
pub mod residual;
pub mod secondary;
pub mod stieltjes;

pub use error::{Error, Result};
pub use math::{expint_ei, ln_gamma};

pub use chainmap::{ChainCoefficients, Mapping, MappingKernel};
pub use convergence::{ConvergenceReport, OutOfClassReason, SzegoVerdict};
pub use measures::{
    Interval, Measure, MeasureFamily, MomentSequence, SdFamily, SpectralDensity, TailBound,
};
pub use orthopoly::{GaussRule, RecurrenceCoefficients, RecurrenceMethod, RecurrenceOptions};
pub use residual::{ResidualDensity, ResidualFamily};
pub use secondary::{SecondarySequence, SequenceMode};
pub use stieltjes::{ReducerEvaluator, ReducerMethod};

//! Labeled multi-object densities with Gaussian conditionals, their
//! moment-preserving approximations, and set-integral divergences between
//! them.

pub mod approx;
pub mod divergence;
pub mod error;
pub mod examples;
pub mod gaussian;
pub mod labelspace;
pub mod lmo;
pub mod random;

pub use error::{Error, Result};
pub use labelspace::{CardinalityDistribution, Label, LabelSet, LabelSpace, WeightTable};
pub use lmo::{DensityDraft, Factorized, Hypothesis, LabeledDensity, LabeledState, LmoDensity};

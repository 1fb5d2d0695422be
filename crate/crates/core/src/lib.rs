//! Mixing times, hitting-time characterizations and Log-Sobolev constants of
//! finite reversible Markov chains.

// `!(a <= b)` is used on purpose so that NaN lands on the failing side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod charac;
pub mod chain;
pub mod distance;
pub mod error;
pub mod family;
pub mod hitting;
pub mod logsob;
pub mod maximal;
pub mod report;
mod linalg;
pub mod sets;
pub mod spec_file;
pub mod spectral;
pub mod trees;
pub mod verify;

pub use charac::{CharacterizationReport, HittingTarget, TargetKind};
pub use chain::{ChainModel, ChainSource, WeightedNetwork};
pub use distance::{Metric, MixingQuery};
pub use error::{Error, Result};
pub use hitting::{Start, SurvivalCurve};
pub use report::{analyze, AnalyzeConfig, AnalyzeReport, Quantity};
pub use sets::ConnectedSetFamily;
pub use spec_file::{load_spec, ChainSpec};
pub use spectral::{RestrictedSpectrum, SpectralDecomposition, TimeMode};

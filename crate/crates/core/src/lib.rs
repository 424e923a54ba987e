//! Beat-level ECG features, a gradient-boosted NORM/MI classifier, diverse counterfactual
//! search and counterfactual clue rendering on 12-lead reports.
//!
//! Signal handling, feature extraction and synthesis are generic over [`Scalar`] (`f32` or
//! `f64`); the classifier, counterfactual search and metrics work on `f64`.

// NaN-rejecting parameter checks are written as `!(x > 0.0)`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cf;
pub mod ecg_io;
pub mod error;
pub mod eval;
pub mod features;
pub mod lead;
pub mod model;
pub mod num;
pub mod signal;
pub mod synth;
pub mod vcce;

pub use error::{Error, Result};
pub use lead::Lead;
pub use num::Scalar;

/// A record in double precision, the pipeline's working type.
pub type Record = ecg_io::EcgRecord<f64>;
/// A record in single precision.
pub type Record32 = ecg_io::EcgRecord<f32>;
pub type SyntheticRecord = synth::SyntheticRecord<f64>;

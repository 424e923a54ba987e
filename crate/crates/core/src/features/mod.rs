//! The 194 beat-level features: registry, extraction and matrix assembly.

mod extract;
mod matrix;
mod names;

pub use extract::{extract_amplitudes, extract_temporal};
pub use matrix::{beat_features, build_feature_matrix, BeatProvenance, FeatureMatrix, FeatureSidecar};
pub use names::{
    feature_names, registry, AmplitudeKind, AmplitudeShape, FeatureName, TemporalKind, Wave, N_AMPLITUDE_KINDS,
    N_FEATURES, N_TEMPORAL,
};

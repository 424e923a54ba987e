//! Classification and interpretability metrics.

mod classification;
mod interpret;
mod sparsity;

pub use classification::{mcnemar, prf1, roc_auc, Confusion, McNemar, Prf1};
pub use interpret::{
    aggregate_interpretability, alignment_score, alignment_score_weighted, read_clinician_labels, vvs, AlignmentMode,
    ClinicianLabel, InterpretabilitySummary, MeanStd, Tier,
};
pub use sparsity::{
    compare_sparsity, weighted_sparsity, ClinicalFeature, ClinicalWeights, DeviationMode, SparsityComparison, SparsityPair,
    SparsityReport, SparsityScore,
};

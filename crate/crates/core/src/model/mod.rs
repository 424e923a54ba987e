//! Gradient-boosted tree classifier, recursive feature elimination and feature-count curves.

mod gbdt;
mod rfe;

pub use gbdt::{train, GbdtModel, Node, TrainParams, Tree};
pub use rfe::{incremental_curve, rank_order, rfe_rank, tolerance_minimal_k, CurvePoint, RankedFeature};

use crate::error::Result;

/// Anything that scores a dense feature vector with a probability of class MI.
pub trait Classifier: Sync {
    fn n_features(&self) -> usize;
    fn proba(&self, x: &[f64]) -> Result<f64>;
}

impl Classifier for GbdtModel {
    fn n_features(&self) -> usize {
        GbdtModel::n_features(self)
    }

    fn proba(&self, x: &[f64]) -> Result<f64> {
        self.predict_proba(x)
    }
}

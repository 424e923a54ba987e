//! Importance-weighted sparsity of counterfactuals and the clinical-vs-model comparison.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::cf::{CounterfactualSet, FeatureRange};
use crate::error::{Error, Result};

use super::interpret::MeanStd;

const BUNDLED_WEIGHTS: &str = include_str!("../../data/clinical_weights.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicalFeature {
    pub name: String,
    pub score: u32,
    #[serde(default)]
    pub clinician_added: bool,
}

/// Clinical importance scores per feature.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicalWeights {
    pub feature: Vec<ClinicalFeature>,
}

impl ClinicalWeights {
    pub fn bundled() -> Self {
        Self::from_toml(BUNDLED_WEIGHTS).expect("bundled clinical weights are valid")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let w: ClinicalWeights = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(f) = w.feature.iter().find(|f| f.score > 24) {
            return Err(Error::Config(format!("clinical score of {} exceeds 24", f.name)));
        }
        Ok(w)
    }

    pub fn as_map(&self) -> BTreeMap<String, f64> {
        self.feature.iter().map(|f| (f.name.clone(), f64::from(f.score))).collect()
    }

    /// Names of the data-selected features (those not added by clinicians).
    pub fn selected(&self) -> Vec<String> {
        self.feature.iter().filter(|f| !f.clinician_added).map(|f| f.name.clone()).collect()
    }

    pub fn clinician_added(&self) -> Vec<String> {
        self.feature.iter().filter(|f| f.clinician_added).map(|f| f.name.clone()).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeviationMode {
    /// Divide by the [p1, p99] width.
    #[default]
    Range,
    /// Divide by the median absolute deviation.
    Mad,
}

/// Sparsity score of one counterfactual.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityScore {
    pub record_id: String,
    pub beat_index: usize,
    pub cf_index: usize,
    pub score: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityReport {
    pub summary: MeanStd,
    pub scores: Vec<SparsityScore>,
}

fn normalized_weights(names: &[String], weights: &BTreeMap<String, f64>) -> Result<Vec<f64>> {
    let raw = names
        .iter()
        .map(|n| weights.get(n).copied().ok_or_else(|| Error::MissingFeatureData { what: "weight", feature: n.clone() }))
        .collect::<Result<Vec<f64>>>()?;
    let total: f64 = raw.iter().sum();
    if !(total > 0.0) || raw.iter().any(|w| *w < 0.0) {
        return Err(Error::InvalidParam("weights must be non-negative with a positive sum".into()));
    }
    Ok(raw.iter().map(|w| w / total).collect())
}

/// `S_j = sum_i |x_ij * w_i|` with `x_ij = |cf_j[i] - original[i]| / scale_i` and weights
/// normalized over each set's features; mean and population std over all counterfactuals.
pub fn weighted_sparsity(
    sets: &[CounterfactualSet],
    weights: &BTreeMap<String, f64>,
    ranges: &[FeatureRange],
    mode: DeviationMode,
) -> Result<SparsityReport> {
    let mut scores = Vec::new();
    for set in sets {
        let w = normalized_weights(&set.feature_names, weights)?;
        let scale = set
            .feature_names
            .iter()
            .map(|n| {
                let r = ranges
                    .iter()
                    .find(|r| &r.name == n)
                    .ok_or_else(|| Error::MissingFeatureData { what: "range", feature: n.clone() })?;
                Ok(match mode {
                    DeviationMode::Range => r.width(),
                    DeviationMode::Mad => r.mad,
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        for (j, cf) in set.counterfactuals.iter().enumerate() {
            let mut s = 0.0;
            for i in 0..set.feature_names.len() {
                let dev = (cf.values[i] - set.original[i]).abs();
                if dev == 0.0 {
                    continue;
                }
                if !(scale[i] > 0.0) {
                    return Err(Error::MissingFeatureData { what: "non-degenerate range", feature: set.feature_names[i].clone() });
                }
                s += (dev / scale[i] * w[i]).abs();
            }
            scores.push(SparsityScore { record_id: set.record_id.clone(), beat_index: set.beat_index, cf_index: j, score: s });
        }
    }
    let values: Vec<f64> = scores.iter().map(|s| s.score).collect();
    Ok(SparsityReport { summary: MeanStd::of(&values), scores })
}

/// Per-counterfactual scores under both weightings, for boxplots per record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityPair {
    pub record_id: String,
    pub beat_index: usize,
    pub cf_index: usize,
    pub clinical: f64,
    pub model: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparsityComparison {
    pub clinical: MeanStd,
    pub model: MeanStd,
    pub rows: Vec<SparsityPair>,
}

impl SparsityComparison {
    /// `"clinical 0.19 ± 0.05 vs model 0.33 ± 0.08"`.
    pub fn paired(&self) -> String {
        format!(
            "clinical {:.2} ± {:.2} vs model {:.2} ± {:.2}",
            self.clinical.mean, self.clinical.std, self.model.mean, self.model.std
        )
    }
}

pub fn compare_sparsity(
    sets: &[CounterfactualSet],
    clinical: &BTreeMap<String, f64>,
    model_importances: &BTreeMap<String, f64>,
    ranges: &[FeatureRange],
    mode: DeviationMode,
) -> Result<SparsityComparison> {
    let c = weighted_sparsity(sets, clinical, ranges, mode)?;
    let m = weighted_sparsity(sets, model_importances, ranges, mode)?;
    let rows = c
        .scores
        .iter()
        .zip(&m.scores)
        .map(|(a, b)| SparsityPair {
            record_id: a.record_id.clone(),
            beat_index: a.beat_index,
            cf_index: a.cf_index,
            clinical: a.score,
            model: b.score,
        })
        .collect();
    Ok(SparsityComparison { clinical: c.summary, model: m.summary, rows })
}

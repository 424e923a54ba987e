//! Alteration frequencies over populations of counterfactual sets.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ecg_io::Class;
use crate::error::Result;
use crate::model::Classifier;

use super::search::CounterfactualSet;

/// Correctly classified over total, shown as `45/50`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrectCount {
    pub correct: usize,
    pub total: usize,
}

impl fmt::Display for CorrectCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.correct, self.total)
    }
}

/// Indices of rows whose thresholded prediction equals the label.
pub fn filter_correct<C: Classifier>(model: &C, rows: &[Vec<f64>], labels: &[Class]) -> Result<(Vec<usize>, CorrectCount)> {
    let mut keep = Vec::new();
    for (i, (row, &y)) in rows.iter().zip(labels).enumerate() {
        let pred = if model.proba(row)? >= 0.5 { Class::Mi } else { Class::Norm };
        if pred == y {
            keep.push(i);
        }
    }
    let count = CorrectCount { correct: keep.len(), total: rows.len().min(labels.len()) };
    Ok((keep, count))
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AlterationStats {
    pub n_counterfactuals: usize,
    /// `(feature, times changed)`, most frequent first, ties by name.
    pub counts: Vec<(String, usize)>,
    pub correctly_classified: Option<CorrectCount>,
}

impl AlterationStats {
    /// The `n` most frequently altered features as `"II_T: 66"`.
    pub fn top(&self, n: usize) -> Vec<String> {
        self.counts.iter().take(n).map(|(f, c)| format!("{f}: {c}")).collect()
    }
}

pub fn alteration_stats(sets: &[CounterfactualSet], correctly_classified: Option<CorrectCount>) -> AlterationStats {
    let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
    let mut n = 0;
    for set in sets {
        for cf in &set.counterfactuals {
            n += 1;
            for (name, (new, old)) in set.feature_names.iter().zip(cf.values.iter().zip(&set.original)) {
                if new != old {
                    *counts.entry(name).or_default() += 1;
                }
            }
        }
    }
    let mut counts: Vec<(String, usize)> = counts.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
    counts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    AlterationStats { n_counterfactuals: n, counts, correctly_classified }
}

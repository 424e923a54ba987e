//! Classification metrics with MI as the positive class.

use serde::{Deserialize, Serialize};

use crate::ecg_io::Class;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: u64,
    pub fp: u64,
    #[serde(rename = "fn")]
    pub fn_: u64,
    pub tn: u64,
}

impl Confusion {
    pub fn add(&mut self, truth: Class, predicted: Class) {
        match (truth, predicted) {
            (Class::Mi, Class::Mi) => self.tp += 1,
            (Class::Norm, Class::Mi) => self.fp += 1,
            (Class::Mi, Class::Norm) => self.fn_ += 1,
            (Class::Norm, Class::Norm) => self.tn += 1,
        }
    }

    pub fn from_pairs(truth: &[Class], predicted: &[Class]) -> Self {
        let mut c = Confusion::default();
        for (t, p) in truth.iter().zip(predicted) {
            c.add(*t, *p);
        }
        c
    }

    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn accuracy(&self) -> f64 {
        ratio(self.tp + self.tn, self.total())
    }
}

fn ratio(a: u64, b: u64) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf1 {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Precision, recall and F1; any zero denominator yields 0.
pub fn prf1(tp: u64, fp: u64, fn_: u64) -> Prf1 {
    let precision = ratio(tp, tp + fp);
    let recall = ratio(tp, tp + fn_);
    let f1 = if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    Prf1 { precision, recall, f1 }
}

/// Area under the ROC curve via the rank-sum statistic (ties count one half).
/// `None` when either class is absent.
pub fn roc_auc(scores: &[f64], truth: &[Class]) -> Option<f64> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let n_pos = truth.iter().filter(|c| **c == Class::Mi).count();
    let n_neg = truth.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return None;
    }
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && scores[idx[j + 1]] == scores[idx[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid_rank * idx[i..=j].iter().filter(|&&k| truth[k] == Class::Mi).count() as f64;
        i = j + 1;
    }
    let u = rank_sum - (n_pos * (n_pos + 1)) as f64 / 2.0;
    Some(u / (n_pos as f64 * n_neg as f64))
}

/// Paired correctness counts of two classifiers on the same rows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub both_correct: u64,
    pub only_a: u64,
    pub only_b: u64,
    pub both_wrong: u64,
    /// Continuity-corrected chi-square statistic on the discordant cells.
    pub statistic: f64,
}

pub fn mcnemar(truth: &[Class], a: &[Class], b: &[Class]) -> McNemar {
    let mut t = McNemar::default();
    for ((y, pa), pb) in truth.iter().zip(a).zip(b) {
        match (pa == y, pb == y) {
            (true, true) => t.both_correct += 1,
            (true, false) => t.only_a += 1,
            (false, true) => t.only_b += 1,
            (false, false) => t.both_wrong += 1,
        }
    }
    let disc = (t.only_a + t.only_b) as f64;
    if disc > 0.0 {
        let d = (t.only_a as f64 - t.only_b as f64).abs() - 1.0;
        t.statistic = d.max(0.0).powi(2) / disc;
    }
    t
}

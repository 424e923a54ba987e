//! Decompression of counterfactual deltas into per-beat, per-lead markings.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::cf::CounterfactualSet;
use crate::ecg_io::EcgRecord;
use crate::error::{Error, Result};
use crate::features::{AmplitudeKind, AmplitudeShape, BeatProvenance, FeatureName, Wave};
use crate::lead::Lead;
use crate::num::{mean, population_std, Scalar};
use crate::signal::{LeadFiducials, Segmentation};

/// How often one feature changed among one beat's counterfactuals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeFrequency {
    pub record_id: String,
    pub beat_index: usize,
    pub feature: String,
    pub frequency: usize,
    /// Counterfactuals generated for the beat.
    pub k: usize,
}

/// Per (beat, feature) change counts; features never changed are absent.
pub fn prepare_data(sets: &[CounterfactualSet], provenance: &[BeatProvenance]) -> Result<Vec<ChangeFrequency>> {
    let known: BTreeSet<(&str, usize)> = provenance.iter().map(|p| (p.record_id.as_str(), p.beat_index)).collect();
    let mut out = Vec::new();
    for set in sets {
        if !known.contains(&(set.record_id.as_str(), set.beat_index)) {
            return Err(Error::Provenance(format!("record {} beat {} is not in the feature matrix", set.record_id, set.beat_index)));
        }
        for (i, name) in set.feature_names.iter().enumerate() {
            let frequency = set.counterfactuals.iter().filter(|cf| cf.values[i] != set.original[i]).count();
            if frequency > 0 {
                out.push(ChangeFrequency {
                    record_id: set.record_id.clone(),
                    beat_index: set.beat_index,
                    feature: name.clone(),
                    frequency,
                    k: set.counterfactuals.len(),
                });
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "lowercase")]
pub enum MarkingShape {
    Peak { wave: Wave },
    /// Dashed line between two peaks.
    Pair { from: Wave, to: Wave },
    /// Highlighted ST segment.
    Segment,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Marking {
    pub lead: Lead,
    pub beat_index: usize,
    pub feature: String,
    pub shape: MarkingShape,
    /// Sample indices: one peak, two peaks, or the segment's `[start, end)`.
    pub anchors: Vec<usize>,
    pub frequency: usize,
    pub k: usize,
    /// `frequency / k`, in (0, 1].
    pub emphasis: f64,
    /// Measured value on this beat, in mV.
    pub value_overlay: Option<f64>,
}

impl Marking {
    /// Stroke width in px: `1 + 2 * emphasis`.
    pub fn stroke_width(&self) -> f64 {
        1.0 + 2.0 * self.emphasis
    }

    pub fn opacity(&self) -> f64 {
        0.4 + 0.6 * self.emphasis
    }
}

fn wave_index(f: &LeadFiducials, w: Wave) -> Option<usize> {
    match w {
        Wave::P => f.p_peak,
        Wave::Q => f.q_peak,
        Wave::R => f.r_peak,
        Wave::S => f.s_peak,
        Wave::T => f.t_peak,
    }
}

/// Markings for one record's rows of `combined`. Temporal features are skipped, as are
/// beats lacking the fiducials a marking needs.
pub fn build_markings<T: Scalar>(combined: &[ChangeFrequency], record: &EcgRecord<T>, seg: &Segmentation) -> Vec<Marking> {
    let mut merged: BTreeMap<(usize, Lead, AmplitudeKind), (String, usize, usize)> = BTreeMap::new();
    for row in combined.iter().filter(|r| r.record_id == record.name()) {
        let Ok(FeatureName::Amplitude { lead, kind }) = FeatureName::decode(&row.feature) else {
            continue;
        };
        let e = merged.entry((row.beat_index, lead, kind)).or_insert((row.feature.clone(), 0, row.k));
        e.1 = e.1.max(row.frequency);
    }
    let mut out = Vec::new();
    for ((beat_index, lead, kind), (feature, frequency, k)) in merged {
        let Some(beat) = seg.beat(beat_index) else {
            log::debug!("{}: beat {beat_index} not segmented, skipping {feature}", record.name());
            continue;
        };
        let f = &beat.leads[lead.index()];
        let xs = record.lead(lead);
        let val = |i: usize| xs.get(i).map(|v| v.as_f64());
        let built = match kind.shape() {
            AmplitudeShape::Peak(w) => wave_index(f, w).map(|i| (MarkingShape::Peak { wave: w }, vec![i], val(i))),
            AmplitudeShape::Pair(a, b) => match (wave_index(f, a), wave_index(f, b)) {
                (Some(i), Some(j)) => {
                    let diff = val(i).zip(val(j)).map(|(x, y)| x - y);
                    Some((MarkingShape::Pair { from: a, to: b }, vec![i, j], diff))
                }
                _ => None,
            },
            AmplitudeShape::Segment => match (f.r_offset, f.t_onset) {
                (Some(a), Some(b)) if a < b && b <= xs.len() => {
                    let seg = &xs[a..b];
                    let v = if kind == AmplitudeKind::StMean { mean(seg) } else { population_std(seg) };
                    Some((MarkingShape::Segment, vec![a, b], v.map(|v| v.as_f64())))
                }
                _ => None,
            },
        };
        let Some((shape, anchors, value_overlay)) = built else {
            log::debug!("{}: beat {beat_index} lacks fiducials for {feature}", record.name());
            continue;
        };
        let k = k.max(1);
        let frequency = frequency.min(k);
        out.push(Marking {
            lead,
            beat_index,
            feature,
            shape,
            anchors,
            frequency,
            k,
            emphasis: frequency as f64 / k as f64,
            value_overlay,
        });
    }
    out
}

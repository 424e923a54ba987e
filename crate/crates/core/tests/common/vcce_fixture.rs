//! Hand-built 12-lead record with fixed fiducials for marking and rendering tests.

#![allow(dead_code)]

use vcce_core::ecg_io::EcgRecord;
use vcce_core::signal::{segment_beats, BeatFiducials, FiducialSet, LeadFiducials, Segmentation};
use vcce_core::vcce::ChangeFrequency;
use vcce_core::Lead;

/// Change rows used by the golden snapshot.
pub const GOLDEN_ROWS: [(&str, usize); 5] = [("II_R", 3), ("V3_ST", 2), ("aVF_ST_mean", 1), ("V1_T", 1), ("RR_Next", 3)];

/// 2 s at 100 Hz, sawtooth-like values that are exact in binary.
pub fn fixture() -> (EcgRecord<f64>, Segmentation) {
    let signals = (0..12)
        .map(|l| (0..200).map(|j| ((j * 7 + l * 3) % 16) as f64 / 8.0 - 1.0).collect())
        .collect();
    let record = EcgRecord::new("fixture", 100.0, signals).unwrap();
    let r_peaks = vec![20, 70, 120, 170];
    let beats = r_peaks
        .iter()
        .map(|&r| BeatFiducials {
            r_peak: r,
            leads: (0..12)
                .map(|_| LeadFiducials {
                    p_onset: Some(r - 16),
                    p_peak: Some(r - 12),
                    p_offset: Some(r - 8),
                    r_onset: Some(r - 4),
                    q_peak: Some(r - 2),
                    r_peak: Some(r),
                    s_peak: Some(r + 2),
                    r_offset: Some(r + 4),
                    t_onset: Some(r + 10),
                    t_peak: Some(r + 18),
                    t_offset: Some(r + 26),
                })
                .collect(),
        })
        .collect();
    let seg = Segmentation {
        reference_lead: Lead::II,
        windows: segment_beats(&r_peaks).unwrap(),
        r_peaks,
        fiducials: FiducialSet { beats },
    };
    (record, seg)
}

pub fn row(feature: &str, frequency: usize) -> ChangeFrequency {
    ChangeFrequency { record_id: "fixture".into(), beat_index: 0, feature: feature.into(), frequency, k: 3 }
}

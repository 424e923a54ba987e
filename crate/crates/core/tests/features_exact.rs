mod common;

use std::time::Instant;

use proptest::prelude::*;
use vcce_core::features::{build_feature_matrix, extract_amplitudes, feature_names, N_FEATURES, N_TEMPORAL};
use vcce_core::signal::{segment_record, DelineationConfig, LeadFiducials};
use vcce_core::synth::{synthesize, BeatTemplate};

#[test]
fn noiseless_record_matches_closed_form() {
    let start = Instant::now();
    let t = BeatTemplate::default();
    let fs = 100.0;
    let syn = synthesize::<f64>(&t, 6, fs, 0).unwrap();
    let seg = segment_record(&syn.record, &DelineationConfig::bundled()).unwrap();
    assert_eq!(seg.r_peaks, syn.r_peaks);
    let m = build_feature_matrix(&[(&syn.record, &seg)]);
    assert_eq!(m.n_rows(), 4);
    let names = feature_names();
    for (row_i, row) in m.rows.iter().enumerate() {
        let want = common::oracle::expected_features(&t, &syn.r_peaks, fs, row_i + 1);
        for c in 0..N_FEATURES {
            let (g, w) = (row[c], want[c]);
            match (g, w) {
                (Some(g), Some(w)) => {
                    let tol = if c < N_TEMPORAL { 1.0 / fs + 1e-12 } else { 1e-9 };
                    assert!((g - w).abs() <= tol, "beat {row_i} {}: {g} vs {w}", names[c]);
                }
                _ => assert_eq!(g.is_some(), w.is_some(), "beat {row_i} {}", names[c]),
            }
        }
    }
    assert!(start.elapsed().as_secs_f64() < 5.0);
}

#[test]
fn absent_p_wave_leaves_p_features_missing() {
    let mut t = BeatTemplate::default();
    for l in &mut t.leads {
        l.p.amplitude_mv = 0.0;
    }
    let syn = synthesize::<f64>(&t, 5, 100.0, 0).unwrap();
    let seg = segment_record(&syn.record, &DelineationConfig::bundled()).unwrap();
    let m = build_feature_matrix(&[(&syn.record, &seg)]);
    let col = |n: &str| m.column_index(n).unwrap();
    for row in &m.rows {
        assert_eq!(row[col("PR_int")], None);
        assert_eq!(row[col("II_P")], None);
        assert!(row[col("II_R")].is_some());
        assert!(row[col("QRS")].is_some());
    }
}

#[test]
fn f32_records_agree_with_f64() {
    let t = BeatTemplate::default();
    let a = synthesize::<f64>(&t, 5, 100.0, 0).unwrap();
    let b = synthesize::<f32>(&t, 5, 100.0, 0).unwrap();
    let cfg = DelineationConfig::bundled();
    let sa = segment_record(&a.record, &cfg).unwrap();
    let sb = segment_record(&b.record, &cfg).unwrap();
    assert_eq!(sa.fiducials, sb.fiducials);
    let ma = build_feature_matrix(&[(&a.record, &sa)]);
    let mb = build_feature_matrix(&[(&b.record, &sb)]);
    for (ra, rb) in ma.rows.iter().zip(&mb.rows) {
        for (x, y) in ra.iter().zip(rb) {
            match (x, y) {
                (Some(x), Some(y)) => assert!((x - y).abs() < 1e-5),
                _ => assert_eq!(x.is_some(), y.is_some()),
            }
        }
    }
}

fn fiducials(idx: [usize; 5], r_off: usize, t_on: usize) -> LeadFiducials {
    LeadFiducials {
        p_peak: Some(idx[0]),
        q_peak: Some(idx[1]),
        r_peak: Some(idx[2]),
        s_peak: Some(idx[3]),
        t_peak: Some(idx[4]),
        r_offset: Some(r_off),
        t_onset: Some(t_on),
        ..Default::default()
    }
}

proptest! {
    #[test]
    fn pairwise_identities_and_translation(
        xs in prop::collection::vec(-3.0f64..3.0, 60),
        idx in prop::array::uniform5(0usize..60),
        a in 0usize..60, b in 0usize..60,
        c in -5.0f64..5.0,
    ) {
        let f = fiducials(idx, a.min(b), a.max(b));
        let v = extract_amplitudes(&xs, &f).map(|v| v.unwrap_or(0.0));
        let (q, r, s) = (v[2], v[0], v[3]);
        prop_assert!(((q - s) - ((q - r) + (r - s))).abs() < 1e-12);
        prop_assert!((v[11] - (v[6] + v[7])).abs() < 1e-12);
        let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
        let w = extract_amplitudes(&shifted, &f).map(|v| v.unwrap_or(0.0));
        for k in 0..5 {
            prop_assert!((w[k] - v[k] - c).abs() < 1e-12);
        }
        for k in 5..13 {
            prop_assert!((w[k] - v[k]).abs() < 1e-12);
        }
        if a != b {
            prop_assert!((w[13] - v[13] - c).abs() < 1e-9);
            prop_assert!((w[14] - v[14]).abs() < 1e-9);
        }
    }
}

mod common;

use std::fs;
use std::path::Path;

use common::vcce_fixture::{fixture, row, GOLDEN_ROWS};
use vcce_core::cf::{Counterfactual, CounterfactualSet};
use vcce_core::ecg_io::Class;
use vcce_core::features::BeatProvenance;
use vcce_core::vcce::{build_markings, prepare_data, render_report, MarkingShape, ReportLayout};
use vcce_core::Lead;

#[test]
fn counts_match_manual_tally() {
    let cf = |v: Vec<f64>| Counterfactual { values: v, p_target: 0.9, changed: vec![], proximity: 0.0, sparsity_count: 0 };
    let set = |beat: usize, cfs: Vec<Vec<f64>>| CounterfactualSet {
        record_id: "fixture".into(),
        beat_index: beat,
        feature_names: vec!["II_R".into(), "V3_ST".into(), "QTc".into()],
        original: vec![1.0, 0.5, 0.4],
        target: Class::Mi,
        counterfactuals: cfs.into_iter().map(cf).collect(),
    };
    let prov = |beat| BeatProvenance { record_id: "fixture".into(), patient_id: None, beat_index: beat, r_peak: 0, label: None };
    let sets = [
        set(0, vec![vec![2.0, 0.5, 0.4], vec![1.5, 0.5, 0.4], vec![1.0, 0.5, 0.3]]),
        set(1, vec![vec![1.0, 0.7, 0.4], vec![1.0, 0.7, 0.4], vec![1.0, 0.5, 0.4]]),
    ];
    let rows = prepare_data(&sets, &[prov(0), prov(1)]).unwrap();
    let tally: Vec<(usize, &str, usize)> = rows.iter().map(|r| (r.beat_index, r.feature.as_str(), r.frequency)).collect();
    assert_eq!(tally, vec![(0, "II_R", 2), (0, "QTc", 1), (1, "V3_ST", 2)]);
    assert!(prepare_data(&sets, &[prov(0)]).is_err());

    // QTc is temporal and is not drawn
    let (record, seg) = fixture();
    let marks = build_markings(&rows, &record, &seg);
    assert_eq!(marks.len(), 2);
    assert_eq!(marks[0].shape, MarkingShape::Peak { wave: vcce_core::features::Wave::R });
    assert_eq!((marks[0].lead, marks[0].anchors.clone()), (Lead::II, vec![70]));
    assert!((marks[0].emphasis - 2.0 / 3.0).abs() < 1e-15);
    let v3 = &marks[1];
    assert_eq!(v3.anchors, vec![122, 138]);
    let xs = record.lead(Lead::V3);
    assert_eq!(v3.value_overlay, Some(xs[122] - xs[138]));
}

#[test]
fn emphasis_grows_with_frequency() {
    let (record, seg) = fixture();
    let marks = build_markings(&[row("I_R", 1), row("II_R", 2), row("III_R", 3)], &record, &seg);
    assert_eq!(marks.len(), 3);
    for w in marks.windows(2) {
        assert!(w[1].emphasis > w[0].emphasis && w[1].stroke_width() > w[0].stroke_width());
        assert!(w[1].opacity() > w[0].opacity());
    }
    assert_eq!(marks[2].emphasis, 1.0);
}

#[test]
fn missing_fiducials_skip_marking() {
    let (record, mut seg) = fixture();
    seg.fiducials.beats[1].leads[Lead::V1.index()].s_peak = None;
    let marks = build_markings(&[row("V1_S", 1), row("V1_RS", 1), row("V1_R", 1)], &record, &seg);
    assert_eq!(marks.len(), 1);
}

#[test]
fn plain_and_single_marking_reports() {
    let (record, seg) = fixture();
    let layout = ReportLayout::default();
    let plain = render_report(&record, &[], &layout).unwrap();
    assert_eq!(plain.matches("<polyline").count(), 12);
    assert!(!plain.contains("class=\"marking\"") && !plain.contains("id=\"legend\""));

    let marks = build_markings(&[row("II_R", 3)], &record, &seg);
    let svg = render_report(&record, &marks, &layout).unwrap();
    assert_eq!(svg.matches("<circle").count(), 1);
    let start = svg.find("<g id=\"lead-II\">").unwrap();
    let end = start + svg[start..].find("</g>").unwrap();
    assert!(svg[start..end].contains("<circle"));

    let bad = ReportLayout { mm_per_mv: 0.0, ..ReportLayout::default() };
    assert!(render_report(&record, &[], &bad).is_err());
}

#[test]
fn golden_snapshot() {
    let (record, seg) = fixture();
    let rows: Vec<_> = GOLDEN_ROWS.iter().map(|&(f, n)| row(f, n)).collect();
    let marks = build_markings(&rows, &record, &seg);
    let layout = ReportLayout::default();
    let svg = render_report(&record, &marks, &layout).unwrap();
    assert_eq!(svg, render_report(&record, &marks, &layout).unwrap());
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/report.svg");
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &svg).unwrap();
    }
    let want = fs::read_to_string(&path).expect("golden file present (set UPDATE_GOLDEN=1 to create)");
    assert!(svg == want, "SVG differs from tests/golden/report.svg");
}

use std::fs::File;

use vcce_core::ecg_io::{balanced_split, filter_cohort, load_wfdb_record, Class, CohortManifest, FilterRules, Split};
use vcce_core::signal::{denoise, segment_record, DelineationConfig};
use vcce_core::synth::write_synthetic_cohort;

#[test]
fn synthetic_cohort_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = write_synthetic_cohort(dir.path(), 10, 8, 3).unwrap();
    let manifest = CohortManifest::from_csv(File::open(&manifest_path).unwrap()).unwrap();
    assert_eq!(manifest.rows.len(), 23);

    let cohort = filter_cohort(&manifest, &FilterRules::default()).unwrap();
    assert_eq!(cohort.entries.len(), 20);
    assert_eq!(cohort.entries.iter().filter(|e| e.label.class == Class::Mi).count(), 10);
    let again = filter_cohort(&cohort.to_manifest(), &FilterRules::default()).unwrap();
    assert_eq!(again, cohort);

    let split = balanced_split(&cohort, 11, 0.2).unwrap();
    for class in [Class::Norm, Class::Mi] {
        let train = Split::patients(&split.train, class);
        let test = Split::patients(&split.test, class);
        assert_eq!((train.len(), test.len()), (8, 2));
        assert!(train.is_disjoint(&test));
    }
    assert_eq!(balanced_split(&cohort, 11, 0.2).unwrap(), split);

    let cfg = DelineationConfig::bundled();
    for e in &cohort.entries {
        let rec = load_wfdb_record::<f64>(&dir.path().join(e.record_path.as_ref().unwrap())).unwrap();
        assert_eq!((rec.signals.len(), rec.fs()), (12, 100.0));
        let seg = segment_record(&denoise(&rec, &cfg).unwrap(), &cfg).unwrap();
        assert_eq!(seg.r_peaks.len(), 8, "{}", e.record_id);
        assert_eq!(seg.windows.len(), 6);
    }
}

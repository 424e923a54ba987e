use proptest::prelude::*;
use vcce_core::signal::{denoise, detect_r_peaks, segment_record, DelineationConfig, Fiducial};
use vcce_core::synth::{synthesize, BeatTemplate, Noise};
use vcce_core::Lead;

const PEAKS: [Fiducial; 5] = [Fiducial::PPeak, Fiducial::QPeak, Fiducial::RPeak, Fiducial::SPeak, Fiducial::TPeak];

#[test]
fn noiseless_peaks_within_one_sample() {
    let cfg = DelineationConfig::bundled();
    for fs in [100.0, 250.0, 500.0] {
        let syn = synthesize::<f64>(&BeatTemplate::default(), 6, fs, 0).unwrap();
        let seg = segment_record(&syn.record, &cfg).unwrap();
        assert_eq!(seg.r_peaks, syn.r_peaks);
        for w in &seg.windows {
            let (got, want) = (&seg.fiducials.beats[w.peak], &syn.truth.beats[w.peak]);
            for (g, t) in got.leads.iter().zip(&want.leads) {
                for f in PEAKS {
                    match (g.get(f), t.get(f)) {
                        (Some(a), Some(b)) => assert!(a.abs_diff(b) <= 1, "fs {fs} {f:?}: {a} vs {b}"),
                        (a, b) => assert_eq!(a, b, "fs {fs} {f:?}"),
                    }
                }
            }
        }
    }
}

#[test]
fn r_peaks_survive_twenty_db_noise() {
    let cfg = DelineationConfig::bundled();
    let template = BeatTemplate { noise: Noise::SnrDb(20.0), ..BeatTemplate::default() };
    let (mut hit, mut total) = (0usize, 0usize);
    for seed in 0..100 {
        let syn = synthesize::<f64>(&template, 8, 100.0, seed).unwrap();
        let clean = denoise(&syn.record, &cfg).unwrap();
        let found = detect_r_peaks(clean.lead(Lead::II), 100.0, &cfg).unwrap();
        total += syn.r_peaks.len();
        hit += syn.r_peaks.iter().filter(|&&r| found.iter().any(|&d| d.abs_diff(r) <= 2)).count();
    }
    let rate = hit as f64 / total as f64;
    assert!(rate >= 0.95, "recovered {hit}/{total}");
}

#[test]
fn inverted_t_peak_is_the_minimum() {
    let mut t = BeatTemplate::default();
    t.lead_mut(Lead::II).t.amplitude_mv = -0.4;
    let syn = synthesize::<f64>(&t, 5, 100.0, 0).unwrap();
    let seg = segment_record(&syn.record, &DelineationConfig::bundled()).unwrap();
    let xs = syn.record.lead(Lead::II);
    for w in &seg.windows {
        let f = &seg.fiducials.beats[w.peak].leads[Lead::II.index()];
        let tp = f.t_peak.unwrap();
        assert_eq!(Some(tp), syn.truth.beats[w.peak].leads[Lead::II.index()].t_peak);
        assert!(xs[tp] < -0.35);
    }
}

#[test]
fn denoising_preserves_r_amplitude() {
    let syn = synthesize::<f64>(&BeatTemplate::default(), 8, 100.0, 0).unwrap();
    let clean = denoise(&syn.record, &DelineationConfig::bundled()).unwrap();
    for lead in [Lead::II, Lead::V4, Lead::AVR] {
        for &r in &syn.r_peaks[1..7] {
            let (a, b) = (syn.record.lead(lead)[r], clean.lead(lead)[r]);
            assert!(((b - a) / a).abs() < 0.05, "{lead} at {r}: {a} -> {b}");
        }
    }
}

fn morphology() -> impl Strategy<Value = BeatTemplate> {
    let amp = |lo: f64, hi: f64| lo..hi;
    (
        prop::collection::vec((amp(-0.2, 0.3), amp(-0.4, 0.0), amp(0.3, 2.0), amp(-1.2, 0.0), amp(-0.5, 0.8)), 12),
        prop::collection::vec(70usize..=120, 4),
        (-220.0f64..-150.0, 60.0f64..120.0, 250.0f64..340.0, 120.0f64..200.0),
    )
        .prop_map(|(amps, rr, (p_c, p_w, t_c, t_w))| {
            let mut t = BeatTemplate::default();
            for (l, a) in t.leads.iter_mut().zip(amps) {
                l.p.amplitude_mv = a.0;
                l.q.amplitude_mv = a.1;
                l.r.amplitude_mv = a.2;
                l.s.amplitude_mv = a.3;
                l.t.amplitude_mv = a.4;
                l.p.center_ms = p_c;
                l.p.width_ms = p_w;
                l.t.center_ms = t_c;
                l.t.width_ms = t_w;
            }
            t.rr_ms = rr.into_iter().map(|v| v as f64 * 10.0).collect();
            t
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn fiducials_always_ordered(t in morphology(), noise in 0.0f64..0.05, seed in 0u64..1000) {
        let mut t = t;
        t.noise = Noise::StdMv(noise);
        let syn = synthesize::<f64>(&t, 5, 100.0, seed).unwrap();
        let cfg = DelineationConfig::bundled();
        let clean = denoise(&syn.record, &cfg).unwrap();
        if let Ok(seg) = segment_record(&clean, &cfg) {
            for beat in &seg.fiducials.beats {
                for l in &beat.leads {
                    prop_assert!(l.is_ordered(), "{l:?}");
                    prop_assert!(Fiducial::ORDER.iter().filter_map(|f| l.get(*f)).all(|i| i < syn.record.n_samples()));
                    prop_assert!(l.r_peak.is_some());
                }
            }
        }
    }

    #[test]
    fn detection_is_scale_invariant(t in morphology(), scale in 0.01f64..100.0) {
        let syn = synthesize::<f64>(&t, 5, 100.0, 0).unwrap();
        let cfg = DelineationConfig::bundled();
        let xs = syn.record.lead(Lead::II);
        let scaled: Vec<f64> = xs.iter().map(|v| v * scale).collect();
        prop_assert_eq!(detect_r_peaks(xs, 100.0, &cfg).ok(), detect_r_peaks(&scaled, 100.0, &cfg).ok());
    }
}

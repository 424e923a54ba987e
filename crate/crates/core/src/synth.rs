//! Sum-of-Gaussians 12-lead ECG generator with analytically known fiducials.
//!
//! Each wave is a Gaussian whose `width_ms` is its full duration: the onset and offset sit
//! 2.5 standard deviations either side of the center (`sigma = width / 5`). Ground-truth
//! boundaries are discretized to the first sample outside that support (`floor` for onsets,
//! `ceil` for offsets); peaks are the nearest sample to the center.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ecg_io::{write_record_csv, write_wfdb_record, Class, EcgRecord, Label};
use crate::error::{Error, Result};
use crate::lead::{Lead, N_LEADS};
use crate::num::Scalar;
use crate::signal::{BeatFiducials, FiducialSet, LeadFiducials};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Wave {
    /// Offset of the wave center from the R peak.
    pub center_ms: f64,
    /// Onset-to-offset duration.
    pub width_ms: f64,
    pub amplitude_mv: f64,
}

impl Wave {
    pub const fn new(center_ms: f64, width_ms: f64, amplitude_mv: f64) -> Self {
        Wave { center_ms, width_ms, amplitude_mv }
    }

    pub fn sigma_ms(&self) -> f64 {
        self.width_ms / 5.0
    }

    pub fn present(&self) -> bool {
        self.amplitude_mv != 0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeadTemplate {
    pub p: Wave,
    pub q: Wave,
    pub r: Wave,
    pub s: Wave,
    pub t: Wave,
}

impl LeadTemplate {
    pub fn waves(&self) -> [Wave; 5] {
        [self.p, self.q, self.r, self.s, self.t]
    }

    /// Same timing as `timing`, with the given P, Q, R, S, T amplitudes.
    pub fn with_amplitudes(timing: &Timing, amps: [f64; 5]) -> Self {
        let w = |i: usize, wave: (f64, f64)| Wave::new(wave.0, wave.1, amps[i]);
        LeadTemplate { p: w(0, timing.p), q: w(1, timing.q), r: w(2, timing.r), s: w(3, timing.s), t: w(4, timing.t) }
    }
}

/// Shared `(center_ms, width_ms)` of each wave.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Timing {
    pub p: (f64, f64),
    pub q: (f64, f64),
    pub r: (f64, f64),
    pub s: (f64, f64),
    pub t: (f64, f64),
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            p: (-180.0, 105.0),
            q: (-30.0, 35.0),
            r: (0.0, 45.0),
            s: (30.0, 35.0),
            t: (300.0, 175.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Noise {
    None,
    /// White Gaussian noise with this standard deviation in mV.
    StdMv(f64),
    /// White Gaussian noise at this signal-to-noise ratio, per lead.
    SnrDb(f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatTemplate {
    pub leads: Vec<LeadTemplate>,
    pub rr_ms: Vec<f64>,
    pub noise: Noise,
}

/// P, Q, R, S, T amplitudes (mV) of the default morphology, in lead order.
const DEFAULT_AMPLITUDES: [[f64; 5]; N_LEADS] = [
    [0.10, -0.05, 0.80, -0.10, 0.25],
    [0.15, -0.10, 1.20, -0.20, 0.35],
    [0.05, -0.08, 0.50, -0.15, 0.10],
    [-0.12, 0.0, -0.90, 0.0, -0.30],
    [0.05, -0.05, 0.40, -0.10, 0.10],
    [0.10, -0.10, 0.80, -0.15, 0.20],
    [0.08, 0.0, 0.30, -0.90, -0.10],
    [0.10, 0.0, 0.60, -1.20, 0.50],
    [0.10, -0.05, 0.90, -0.70, 0.60],
    [0.10, -0.08, 1.40, -0.40, 0.55],
    [0.10, -0.10, 1.30, -0.20, 0.40],
    [0.10, -0.10, 1.00, -0.10, 0.30],
];

impl Default for BeatTemplate {
    fn default() -> Self {
        let timing = Timing::default();
        BeatTemplate {
            leads: DEFAULT_AMPLITUDES.iter().map(|a| LeadTemplate::with_amplitudes(&timing, *a)).collect(),
            rr_ms: vec![1000.0, 940.0, 1060.0, 980.0],
            noise: Noise::None,
        }
    }
}

impl BeatTemplate {
    pub fn lead(&self, lead: Lead) -> &LeadTemplate {
        &self.leads[lead.index()]
    }

    pub fn lead_mut(&mut self, lead: Lead) -> &mut LeadTemplate {
        &mut self.leads[lead.index()]
    }

    pub fn validate(&self) -> Result<()> {
        if self.leads.len() != N_LEADS {
            return Err(Error::LeadCount(self.leads.len()));
        }
        if self.rr_ms.is_empty() || self.rr_ms.iter().any(|&rr| !(rr > 0.0)) {
            return Err(Error::InvalidParam("RR schedule must be non-empty and positive".into()));
        }
        for (lead, lt) in Lead::ALL.iter().zip(&self.leads) {
            let w = lt.waves();
            if w.iter().any(|w| !(w.width_ms > 0.0)) {
                return Err(Error::InvalidParam(format!("lead {lead}: widths must be positive")));
            }
            if !w.windows(2).all(|p| p[0].center_ms < p[1].center_ms) {
                return Err(Error::InvalidParam(format!("lead {lead}: wave centers must be ordered P<Q<R<S<T")));
            }
        }
        Ok(())
    }
}

/// A generated record together with its exact fiducials.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticRecord<T> {
    pub record: EcgRecord<T>,
    pub r_peaks: Vec<usize>,
    pub truth: FiducialSet,
}

fn to_samples(ms: f64, fs: f64) -> f64 {
    ms * fs / 1000.0
}

/// Ground truth for one lead of one beat whose R peak sits at sample `r`.
pub fn analytic_fiducials(lt: &LeadTemplate, r: usize, fs: f64) -> LeadFiducials {
    let at = |w: &Wave| r as f64 + to_samples(w.center_ms, fs);
    let half = |w: &Wave| to_samples(w.width_ms / 2.0, fs);
    let peak = |w: &Wave| w.present().then(|| at(w).round() as usize);
    let onset = |w: &Wave| w.present().then(|| (at(w) - half(w)).floor() as usize);
    let offset = |w: &Wave| w.present().then(|| (at(w) + half(w)).ceil() as usize);
    let first = if lt.q.present() { &lt.q } else { &lt.r };
    let last = if lt.s.present() { &lt.s } else { &lt.r };
    LeadFiducials {
        p_onset: onset(&lt.p),
        p_peak: peak(&lt.p),
        p_offset: offset(&lt.p),
        r_onset: onset(first),
        q_peak: peak(&lt.q),
        r_peak: Some(r),
        s_peak: peak(&lt.s),
        r_offset: offset(last),
        t_onset: onset(&lt.t),
        t_peak: peak(&lt.t),
        t_offset: offset(&lt.t),
    }
}

/// Renders `n_beats` beats of `template` at `fs`.
pub fn synthesize<T: Scalar>(template: &BeatTemplate, n_beats: usize, fs: f64, seed: u64) -> Result<SyntheticRecord<T>> {
    template.validate()?;
    if n_beats < 3 {
        return Err(Error::InvalidParam(format!("need at least 3 beats, got {n_beats}")));
    }
    let narrowest = template.leads.iter().flat_map(|l| l.waves()).map(|w| w.width_ms).fold(f64::INFINITY, f64::min);
    if to_samples(narrowest, fs) < 2.0 {
        return Err(Error::InvalidParam(format!(
            "fs {fs} Hz cannot resolve a {narrowest} ms wave (needs 2 samples)"
        )));
    }

    let waves = || template.leads.iter().flat_map(|l| l.waves());
    let lead_in = waves().map(|w| w.width_ms / 2.0 - w.center_ms).fold(0.0, f64::max) + 200.0;
    let tail = waves().map(|w| w.center_ms + w.width_ms / 2.0).fold(0.0, f64::max) + 200.0;
    let mut r_ms = Vec::with_capacity(n_beats);
    let mut t = lead_in;
    for i in 0..n_beats {
        r_ms.push(t);
        t += template.rr_ms[i % template.rr_ms.len()];
    }
    let r_peaks: Vec<usize> = r_ms.iter().map(|&ms| to_samples(ms, fs).round() as usize).collect();
    let last_r = *r_peaks.last().expect("n_beats >= 3");
    let n = last_r + to_samples(tail, fs).ceil() as usize;

    let mut signals: Vec<Vec<f64>> = vec![vec![0.0; n]; N_LEADS];
    for (lead, lt) in template.leads.iter().enumerate() {
        for &r in &r_peaks {
            for w in lt.waves().iter().filter(|w| w.present()) {
                let c = r as f64 + to_samples(w.center_ms, fs);
                let sigma = to_samples(w.sigma_ms(), fs);
                let reach = 10.0 * sigma;
                let lo = (c - reach).floor().max(0.0) as usize;
                let hi = ((c + reach).ceil() as usize).min(n - 1);
                for (i, v) in signals[lead].iter_mut().enumerate().take(hi + 1).skip(lo) {
                    let d = (i as f64 - c) / sigma;
                    *v += w.amplitude_mv * (-0.5 * d * d).exp();
                }
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for s in &mut signals {
        let std = match template.noise {
            Noise::None => 0.0,
            Noise::StdMv(sd) => sd,
            Noise::SnrDb(db) => {
                let rms = (s.iter().map(|v| v * v).sum::<f64>() / n as f64).sqrt();
                rms / 10f64.powf(db / 20.0)
            }
        };
        if std > 0.0 {
            let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidParam(e.to_string()))?;
            for v in s.iter_mut() {
                *v += normal.sample(&mut rng);
            }
        }
    }

    let truth = FiducialSet {
        beats: r_peaks
            .iter()
            .map(|&r| BeatFiducials {
                r_peak: r,
                leads: template.leads.iter().map(|lt| analytic_fiducials(lt, r, fs)).collect(),
            })
            .collect(),
    };
    let signals = signals.into_iter().map(|s| s.into_iter().map(T::of).collect()).collect();
    let record = EcgRecord::new("synthetic", fs, signals)?;
    Ok(SyntheticRecord { record, r_peaks, truth })
}

/// Ground-truth sidecar written next to a synthetic CSV record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTruth {
    pub r_peaks: Vec<usize>,
    pub fiducials: FiducialSet,
}

/// Writes `{dir}/{name}.csv`, its sidecar, and `{dir}/{name}.truth.json`.
pub fn write_synthetic<T: Scalar>(dir: &Path, name: &str, syn: &SyntheticRecord<T>) -> Result<PathBuf> {
    let csv = dir.join(format!("{name}.csv"));
    write_record_csv(&csv, &syn.record)?;
    let truth = SyntheticTruth { r_peaks: syn.r_peaks.clone(), fiducials: syn.truth.clone() };
    fs::write(dir.join(format!("{name}.truth.json")), serde_json::to_string(&truth)?)?;
    Ok(csv)
}

/// Class-dependent morphology with per-record jitter, used for synthetic cohorts.
/// The MI pattern inverts the lead II T wave, flattens T in III/aVF, deepens Q in V2/V3
/// and elevates the V3 T wave.
pub fn cohort_template(class: Class, rng: &mut impl Rng) -> BeatTemplate {
    let mut t = BeatTemplate::default();
    if class == Class::Mi {
        t.lead_mut(Lead::II).t.amplitude_mv = -0.15;
        t.lead_mut(Lead::III).t.amplitude_mv = -0.05;
        t.lead_mut(Lead::AVF).t.amplitude_mv = 0.04;
        t.lead_mut(Lead::V2).q.amplitude_mv = -0.25;
        t.lead_mut(Lead::V3).q.amplitude_mv = -0.20;
        t.lead_mut(Lead::V3).t.amplitude_mv = 0.85;
    }
    for lt in &mut t.leads {
        for w in [&mut lt.p, &mut lt.q, &mut lt.r, &mut lt.s, &mut lt.t] {
            w.amplitude_mv *= rng.random_range(0.8..1.2);
        }
    }
    t.rr_ms = (0..4).map(|_| 10.0 * rng.random_range(75..=110) as f64).collect();
    t.noise = Noise::StdMv(0.01);
    t
}

/// Writes a PTB-XL shaped synthetic cohort: WFDB records under `{dir}/records/` and a
/// `ptbxl_database.csv` manifest. A few rows carry excluded statements.
pub fn write_synthetic_cohort(dir: &Path, per_class: usize, n_beats: usize, seed: u64) -> Result<PathBuf> {
    let records = dir.join("records");
    fs::create_dir_all(&records)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut manifest = csv::Writer::from_path(dir.join("ptbxl_database.csv"))?;
    manifest.write_record(["ecg_id", "patient_id", "scp_codes", "filename_lr"])?;
    let extra = [("{'IMI': 100.0, 'STTC': 50.0}", Class::Mi), ("{'PMI': 100.0}", Class::Mi), ("{'NORM': 100.0, 'NDT': 20.0}", Class::Norm)];
    let total = 2 * per_class + extra.len();
    for i in 0..total {
        let (codes, class) = if i < 2 * per_class {
            if i % 2 == 0 {
                ("{'NORM': 100.0, 'SR': 0.0}", Class::Norm)
            } else if i % 4 == 1 {
                ("{'IMI': 100.0, 'SR': 0.0}", Class::Mi)
            } else {
                ("{'ASMI': 100.0, 'MI': 100.0}", Class::Mi)
            }
        } else {
            extra[i - 2 * per_class]
        };
        let template = cohort_template(class, &mut rng);
        let name = format!("{:05}_lr", i + 1);
        let syn = synthesize::<f64>(&template, n_beats, 100.0, rng.random())?;
        let mut record = syn.record;
        record.header.record_name = name.clone();
        write_wfdb_record(&records, &name, &record)?;
        manifest.write_record([
            (i + 1).to_string(),
            format!("{}.0", 1000 + i),
            codes.to_string(),
            format!("records/{name}"),
        ])?;
    }
    manifest.flush()?;
    Ok(dir.join("ptbxl_database.csv"))
}

/// Convenience: a labelled record drawn from [`cohort_template`].
pub fn cohort_record(class: Class, n_beats: usize, seed: u64) -> Result<SyntheticRecord<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let template = cohort_template(class, &mut rng);
    let mut syn = synthesize::<f64>(&template, n_beats, 100.0, rng.random())?;
    let label = if class == Class::Norm { Label::norm() } else { Label::mi("IMI") };
    syn.record.label = Some(label);
    Ok(syn)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_noise_and_noise_free_truth() {
        let t = BeatTemplate { noise: Noise::StdMv(0.05), ..BeatTemplate::default() };
        let a = synthesize::<f64>(&t, 5, 100.0, 3).unwrap();
        let b = synthesize::<f64>(&t, 5, 100.0, 3).unwrap();
        let c = synthesize::<f64>(&t, 5, 100.0, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.record.signals, c.record.signals);
        assert_eq!(a.truth, c.truth);
    }

    #[test]
    fn low_rate_rejected() {
        assert!(synthesize::<f64>(&BeatTemplate::default(), 5, 40.0, 0).is_err());
        assert!(synthesize::<f64>(&BeatTemplate::default(), 2, 100.0, 0).is_err());
    }

    #[test]
    fn truth_is_ordered() {
        let s = synthesize::<f32>(&BeatTemplate::default(), 4, 100.0, 0).unwrap();
        for b in &s.truth.beats {
            for l in &b.leads {
                assert!(l.is_ordered(), "{l:?}");
            }
        }
        // aVR has no Q/S in the default morphology
        let avr = &s.truth.beats[1].leads[Lead::AVR.index()];
        assert_eq!((avr.q_peak, avr.s_peak), (None, None));
    }

    #[test]
    fn unordered_template_rejected() {
        let mut t = BeatTemplate::default();
        t.lead_mut(Lead::V1).t.center_ms = -400.0;
        assert!(t.validate().is_err());
    }
}

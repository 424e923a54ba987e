//! Temporal and amplitude feature extraction for one beat.

use crate::num::{mean, population_std, Scalar};
use crate::signal::LeadFiducials;

use super::names::{AmplitudeKind, AmplitudeShape, Wave, N_AMPLITUDE_KINDS, N_TEMPORAL};

/// The 14 temporal features in registry order, in seconds (RR_Rate is a ratio).
/// Durations come from `f`, the reference-lead fiducials; RR intervals from the
/// surrounding R peaks.
pub fn extract_temporal(f: &LeadFiducials, prev_r: usize, r: usize, next_r: usize, fs: f64) -> [Option<f64>; N_TEMPORAL] {
    let secs = |a: Option<usize>, b: Option<usize>| -> Option<f64> {
        Some((b? as f64 - a? as f64) / fs)
    };
    let rr_prev = (r - prev_r) as f64 / fs;
    let rr_next = (next_r - r) as f64 / fs;
    let qt = secs(f.r_onset, f.t_offset);
    [
        Some(rr_prev),
        Some(rr_next),
        Some(rr_next / rr_prev),
        secs(f.p_onset, f.r_onset),
        secs(f.p_offset, f.r_onset),
        secs(f.r_onset, f.r_offset),
        secs(f.p_onset, f.p_offset),
        secs(f.t_onset, f.t_offset),
        secs(f.t_onset, f.t_peak),
        qt,
        qt.map(|qt| qt / rr_prev.sqrt()),
        secs(f.r_offset, f.t_onset),
        secs(f.p_onset, f.t_offset),
        secs(f.p_onset, f.s_offset()),
    ]
}

fn peak_index(f: &LeadFiducials, w: Wave) -> Option<usize> {
    match w {
        Wave::P => f.p_peak,
        Wave::Q => f.q_peak,
        Wave::R => f.r_peak,
        Wave::S => f.s_peak,
        Wave::T => f.t_peak,
    }
}

/// The 15 amplitude features of one lead in registry order.
pub fn extract_amplitudes<T: Scalar>(xs: &[T], f: &LeadFiducials) -> [Option<T>; N_AMPLITUDE_KINDS] {
    let at = |w: Wave| peak_index(f, w).and_then(|i| xs.get(i).copied());
    let segment = match (f.r_offset, f.t_onset) {
        (Some(a), Some(b)) if a < b && b <= xs.len() => Some(&xs[a..b]),
        _ => None,
    };
    AmplitudeKind::ALL.map(|kind| match kind.shape() {
        AmplitudeShape::Peak(w) => at(w),
        AmplitudeShape::Pair(a, b) => Some(at(a)? - at(b)?),
        AmplitudeShape::Segment => segment.and_then(|s| {
            if kind == AmplitudeKind::StMean {
                mean(s)
            } else {
                population_std(s)
            }
        }),
    })
}

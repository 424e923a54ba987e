//! Zero-phase band-pass filtering and moving-median baseline removal.

use std::cmp::Ordering;

use super::DelineationConfig;
use crate::ecg_io::EcgRecord;
use crate::error::{Error, Result};
use crate::num::Scalar;

/// Second-order section, normalized so that `a0 == 1`.
#[derive(Clone, Copy, Debug)]
struct Biquad<T> {
    b: [T; 3],
    a: [T; 2],
}

impl<T: Scalar> Biquad<T> {
    fn butterworth(cutoff_hz: f64, fs: f64, highpass: bool) -> Self {
        let w0 = 2.0 * std::f64::consts::PI * cutoff_hz / fs;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * std::f64::consts::FRAC_1_SQRT_2);
        let a0 = 1.0 + alpha;
        let b = if highpass {
            [(1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0]
        } else {
            [(1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0]
        };
        Biquad {
            b: b.map(|v| T::of(v / a0)),
            a: [T::of(-2.0 * cos / a0), T::of((1.0 - alpha) / a0)],
        }
    }

    fn dc_gain(&self) -> T {
        (self.b[0] + self.b[1] + self.b[2]) / (T::one() + self.a[0] + self.a[1])
    }

    /// Transposed direct form II, starting from the steady state for a constant input `x0`.
    fn run(&self, xs: &mut [T]) {
        let Some(&x0) = xs.first() else { return };
        let y0 = self.dc_gain() * x0;
        let mut z2 = self.b[2] * x0 - self.a[1] * y0;
        let mut z1 = self.b[1] * x0 - self.a[0] * y0 + z2;
        for x in xs.iter_mut() {
            let input = *x;
            let y = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * y + z2;
            z2 = self.b[2] * input - self.a[1] * y;
            *x = y;
        }
    }
}

/// Forward-backward application of the cascade with odd-reflection padding.
fn filtfilt<T: Scalar>(sections: &[Biquad<T>], xs: &[T], pad: usize) -> Vec<T> {
    let n = xs.len();
    if n < 2 {
        return xs.to_vec();
    }
    let pad = pad.min(n - 1);
    let two = T::of(2.0);
    let mut ext = Vec::with_capacity(n + 2 * pad);
    ext.extend((1..=pad).rev().map(|i| two * xs[0] - xs[i]));
    ext.extend_from_slice(xs);
    ext.extend((1..=pad).map(|i| two * xs[n - 1] - xs[n - 1 - i]));
    for s in sections {
        s.run(&mut ext);
    }
    ext.reverse();
    for s in sections {
        s.run(&mut ext);
    }
    ext.reverse();
    ext[pad..pad + n].to_vec()
}

/// Centered moving median; the window shrinks at the edges. `window` is forced odd.
pub fn moving_median<T: Scalar>(xs: &[T], window: usize) -> Vec<T> {
    let half = window.max(1) / 2;
    let n = xs.len();
    let cmp = |a: &T, b: &T| a.partial_cmp(b).unwrap_or(Ordering::Equal);
    let mut sorted: Vec<T> = Vec::with_capacity(2 * half + 1);
    let mut out = Vec::with_capacity(n);
    let (mut lo, mut hi) = (0usize, 0usize); // current window is xs[lo..hi]
    for i in 0..n {
        let want_lo = i.saturating_sub(half);
        let want_hi = (i + half + 1).min(n);
        while hi < want_hi {
            let v = xs[hi];
            let pos = sorted.binary_search_by(|p| cmp(p, &v)).unwrap_or_else(|e| e);
            sorted.insert(pos, v);
            hi += 1;
        }
        while lo < want_lo {
            let v = xs[lo];
            if let Ok(pos) = sorted.binary_search_by(|p| cmp(p, &v)) {
                sorted.remove(pos);
            }
            lo += 1;
        }
        let m = sorted.len();
        out.push(if m % 2 == 1 {
            sorted[m / 2]
        } else {
            (sorted[m / 2 - 1] + sorted[m / 2]) / T::of(2.0)
        });
    }
    out
}

/// Zero-phase band-pass followed by moving-median baseline removal on one lead.
pub fn denoise_lead<T: Scalar>(xs: &[T], fs: f64, cfg: &DelineationConfig) -> Result<Vec<T>> {
    if fs < 2.0 * cfg.band_high_hz + 1.0 {
        return Err(Error::SamplingRate { fs, edge: cfg.band_high_hz });
    }
    let sections = [
        Biquad::butterworth(cfg.band_low_hz, fs, true),
        Biquad::butterworth(cfg.band_high_hz, fs, false),
    ];
    let filtered = filtfilt(&sections, xs, fs.round() as usize);
    let window = (cfg.median_window_ms * fs / 1000.0).round() as usize | 1;
    let baseline = moving_median(&filtered, window);
    Ok(filtered.iter().zip(&baseline).map(|(&x, &b)| x - b).collect())
}

/// Denoises every lead of a record; output has the same shape.
pub fn denoise<T: Scalar>(record: &EcgRecord<T>, cfg: &DelineationConfig) -> Result<EcgRecord<T>> {
    let fs = record.fs();
    let signals = record
        .signals
        .iter()
        .map(|s| denoise_lead(s, fs, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(EcgRecord {
        header: record.header.clone(),
        signals,
        label: record.label.clone(),
        patient_id: record.patient_id.clone(),
    })
}

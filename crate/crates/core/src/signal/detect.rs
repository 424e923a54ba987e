//! R-peak detection: derivative, squaring, moving-window integration and an
//! adaptive two-level threshold with refractory period and search-back.

use super::DelineationConfig;
use crate::ecg_io::EcgRecord;
use crate::error::{Error, Result};
use crate::lead::Lead;
use crate::num::Scalar;

/// Centered five-point derivative, squared, then integrated over a centered window.
fn integrated_energy<T: Scalar>(xs: &[T], window: usize) -> Vec<T> {
    let n = xs.len();
    let mut sq = vec![T::zero(); n];
    let two = T::of(2.0);
    let eighth = T::of(0.125);
    for i in 2..n.saturating_sub(2) {
        let d = (two * xs[i + 2] + xs[i + 1] - xs[i - 1] - two * xs[i - 2]) * eighth;
        sq[i] = d * d;
    }
    let half = window / 2;
    let mut prefix = vec![T::zero(); n + 1];
    for i in 0..n {
        prefix[i + 1] = prefix[i] + sq[i];
    }
    let w = T::of(window as f64);
    (0..n)
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            (prefix[hi] - prefix[lo]) / w
        })
        .collect()
}

/// Local maxima of `e` (plateaus report their first sample), strictly positive.
fn candidates<T: Scalar>(e: &[T]) -> Vec<usize> {
    let n = e.len();
    let mut out = Vec::new();
    let mut i = 1;
    while i + 1 < n {
        if e[i] > e[i - 1] && e[i] > T::zero() {
            let mut j = i;
            while j + 1 < n && e[j + 1] == e[i] {
                j += 1;
            }
            if j + 1 == n || e[j + 1] < e[i] {
                out.push(i);
            }
            i = j + 1;
        } else {
            i += 1;
        }
    }
    out
}

fn argmax_abs<T: Scalar>(xs: &[T], lo: usize, hi: usize) -> usize {
    let mut best = lo;
    for i in lo..=hi {
        if xs[i].abs() > xs[best].abs() {
            best = i;
        }
    }
    best
}

/// Detects R peaks on a (denoised) lead. Returned indices are strictly increasing, at
/// least one refractory period apart, each at the largest |amplitude| within
/// `refine_ms` of the detector's peak.
pub fn detect_r_peaks<T: Scalar>(xs: &[T], fs: f64, cfg: &DelineationConfig) -> Result<Vec<usize>> {
    let n = xs.len();
    if n < 5 {
        return Err(Error::NoBeats);
    }
    let window = DelineationConfig::samples(cfg.integration_ms, fs).max(1) | 1;
    let refractory = DelineationConfig::samples(cfg.refractory_ms, fs).max(1);
    let refine = DelineationConfig::samples(cfg.refine_ms, fs);
    let energy = integrated_energy(xs, window);
    let cands = candidates(&energy);
    if cands.is_empty() {
        return Err(Error::NoBeats);
    }

    let learn = (2.0 * fs).round() as usize;
    let head = &energy[..learn.min(n)];
    let head_max = head.iter().copied().fold(T::zero(), T::max);
    let head_mean = head.iter().copied().sum::<T>() / T::of(head.len() as f64);
    let mut spk = head_max / T::of(3.0);
    let mut npk = head_mean / T::of(2.0);
    let quarter = T::of(0.25);
    let eighth = T::of(0.125);
    let threshold = |spk: T, npk: T| npk + quarter * (spk - npk);

    let mut accepted: Vec<usize> = Vec::new();
    // (candidate index, threshold in force when it was rejected)
    let mut rejected: Vec<(usize, T)> = Vec::new();
    for &c in &cands {
        let v = energy[c];
        let thr = threshold(spk, npk);

        if let Some(&last) = accepted.last() {
            let rr_avg = if accepted.len() >= 2 {
                (last - accepted[0]) as f64 / (accepted.len() - 1) as f64
            } else {
                f64::INFINITY
            };
            if (c - last) as f64 > 1.66 * rr_avg {
                let missed = rejected
                    .iter()
                    .filter(|(r, t)| *r > last + refractory && *r + refractory < c && energy[*r] > *t / T::of(2.0))
                    .max_by(|a, b| energy[a.0].partial_cmp(&energy[b.0]).unwrap_or(std::cmp::Ordering::Equal));
                if let Some(&(r, _)) = missed {
                    accepted.push(r);
                    spk = quarter * energy[r] + (T::one() - quarter) * spk;
                }
                rejected.clear();
            }
        }

        let last = accepted.last().copied();
        if v > thr {
            match last {
                Some(l) if c - l < refractory => {
                    if v > energy[l] {
                        *accepted.last_mut().expect("non-empty") = c;
                    }
                }
                _ => accepted.push(c),
            }
            spk = eighth * v + (T::one() - eighth) * spk;
        } else {
            npk = eighth * v + (T::one() - eighth) * npk;
            rejected.push((c, thr));
        }
    }

    let mut peaks: Vec<usize> = accepted
        .into_iter()
        .map(|c| argmax_abs(xs, c.saturating_sub(refine), (c + refine).min(n - 1)))
        .collect();
    peaks.sort_unstable();
    let mut out: Vec<usize> = Vec::with_capacity(peaks.len());
    for p in peaks {
        match out.last().copied() {
            Some(l) if p == l => {}
            Some(l) if p - l < refractory => {
                if xs[p].abs() > xs[l].abs() {
                    *out.last_mut().expect("non-empty") = p;
                }
            }
            _ => out.push(p),
        }
    }
    if out.is_empty() {
        return Err(Error::NoBeats);
    }
    Ok(out)
}

fn rms<T: Scalar>(xs: &[T]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    (xs.iter().map(|x| x.as_f64() * x.as_f64()).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Detects on lead II, falling back to the lead with the largest RMS.
pub fn reference_peaks<T: Scalar>(record: &EcgRecord<T>, cfg: &DelineationConfig) -> Result<(Lead, Vec<usize>)> {
    let fs = record.fs();
    match detect_r_peaks(record.lead(Lead::II), fs, cfg) {
        Ok(p) => Ok((Lead::II, p)),
        Err(Error::NoBeats) => {
            let lead = Lead::ALL
                .into_iter()
                .max_by(|a, b| {
                    rms(record.lead(*a))
                        .partial_cmp(&rms(record.lead(*b)))
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(b.cmp(a))
                })
                .expect("twelve leads");
            detect_r_peaks(record.lead(lead), fs, cfg).map(|p| (lead, p))
        }
        Err(e) => Err(e),
    }
}

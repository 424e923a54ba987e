//! Closed-form expectations for noiseless sum-of-Gaussian records, computed straight from
//! the template parameters.

#![allow(dead_code)]

use vcce_core::synth::{BeatTemplate, Wave};

/// Exact signal value of `lead` at sample `i` for beats anchored at `r_peaks`.
pub fn value(t: &BeatTemplate, lead: usize, r_peaks: &[usize], fs: f64, i: usize) -> f64 {
    let lt = &t.leads[lead];
    let mut v = 0.0;
    for &r in r_peaks {
        for w in [lt.p, lt.q, lt.r, lt.s, lt.t] {
            let c = r as f64 + w.center_ms * fs / 1000.0;
            let sigma = w.width_ms / 5.0 * fs / 1000.0;
            v += w.amplitude_mv * (-(i as f64 - c).powi(2) / (2.0 * sigma * sigma)).exp();
        }
    }
    v
}

#[derive(Clone, Copy, Debug)]
pub struct Points {
    pub p_on: usize,
    pub p_pk: usize,
    pub p_off: usize,
    pub qrs_on: usize,
    pub q_pk: Option<usize>,
    pub r_pk: usize,
    pub s_pk: Option<usize>,
    pub qrs_off: usize,
    pub t_on: usize,
    pub t_pk: usize,
    pub t_off: usize,
}

fn centre(w: &Wave, r: usize, fs: f64) -> f64 {
    r as f64 + w.center_ms * fs / 1000.0
}

fn half(w: &Wave, fs: f64) -> f64 {
    w.width_ms / 2.0 * fs / 1000.0
}

/// Boundaries at center ± 2.5 sigma, taken to the first sample outside the wave.
pub fn points(t: &BeatTemplate, lead: usize, r: usize, fs: f64) -> Points {
    let lt = &t.leads[lead];
    let on = |w: &Wave| (centre(w, r, fs) - half(w, fs)).floor() as usize;
    let off = |w: &Wave| (centre(w, r, fs) + half(w, fs)).ceil() as usize;
    let pk = |w: &Wave| centre(w, r, fs).round() as usize;
    let has = |w: &Wave| w.amplitude_mv != 0.0;
    Points {
        p_on: on(&lt.p),
        p_pk: pk(&lt.p),
        p_off: off(&lt.p),
        qrs_on: if has(&lt.q) { on(&lt.q) } else { on(&lt.r) },
        q_pk: has(&lt.q).then(|| pk(&lt.q)),
        r_pk: r,
        s_pk: has(&lt.s).then(|| pk(&lt.s)),
        qrs_off: if has(&lt.s) { off(&lt.s) } else { off(&lt.r) },
        t_on: on(&lt.t),
        t_pk: pk(&lt.t),
        t_off: off(&lt.t),
    }
}

/// All 194 expected values for the retained beat whose R peak is `r_peaks[b]`
/// (`1 <= b < len - 1`), with lead II as the timing reference.
pub fn expected_features(t: &BeatTemplate, r_peaks: &[usize], fs: f64, b: usize) -> Vec<Option<f64>> {
    let (prev, r, next) = (r_peaks[b - 1], r_peaks[b], r_peaks[b + 1]);
    let f = points(t, 1, r, fs);
    let s = |a: usize, b: usize| (b as f64 - a as f64) / fs;
    let rr_prev = s(prev, r);
    let rr_next = s(r, next);
    let qt = s(f.qrs_on, f.t_off);
    let mut out: Vec<Option<f64>> = vec![
        rr_prev,
        rr_next,
        rr_next / rr_prev,
        s(f.p_on, f.qrs_on),
        s(f.p_off, f.qrs_on),
        s(f.qrs_on, f.qrs_off),
        s(f.p_on, f.p_off),
        s(f.t_on, f.t_off),
        s(f.t_on, f.t_pk),
        qt,
        qt / rr_prev.sqrt(),
        s(f.qrs_off, f.t_on),
        s(f.p_on, f.t_off),
        s(f.p_on, f.qrs_off),
    ]
    .into_iter()
    .map(Some)
    .collect();
    for lead in 0..12 {
        let p = points(t, lead, r, fs);
        let v = |i: usize| value(t, lead, r_peaks, fs, i);
        let (pa, ra, ta) = (Some(v(p.p_pk)), Some(v(p.r_pk)), Some(v(p.t_pk)));
        let qa = p.q_pk.map(v);
        let sa = p.s_pk.map(v);
        let d = |a: Option<f64>, b: Option<f64>| Some(a? - b?);
        let seg: Vec<f64> = (p.qrs_off..p.t_on).map(v).collect();
        let n = seg.len() as f64;
        let mean = seg.iter().sum::<f64>() / n;
        let std = (seg.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt();
        out.extend([
            ra,
            pa,
            qa,
            sa,
            ta,
            d(pa, qa),
            d(qa, ra),
            d(ra, sa),
            d(sa, ta),
            d(pa, sa),
            d(pa, ta),
            d(qa, sa),
            d(qa, ta),
            Some(mean),
            Some(std),
        ]);
    }
    out
}

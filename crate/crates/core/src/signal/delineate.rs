//! Per-lead fiducial delineation around a shared R-peak clock.

use serde::{Deserialize, Serialize};

use super::DelineationConfig;
use crate::ecg_io::EcgRecord;
use crate::lead::N_LEADS;
use crate::num::Scalar;

/// Landmarks of one beat, in temporal order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Fiducial {
    POnset,
    PPeak,
    POffset,
    ROnset,
    QPeak,
    RPeak,
    SPeak,
    ROffset,
    TOnset,
    TPeak,
    TOffset,
}

impl Fiducial {
    pub const ORDER: [Fiducial; 11] = [
        Fiducial::POnset,
        Fiducial::PPeak,
        Fiducial::POffset,
        Fiducial::ROnset,
        Fiducial::QPeak,
        Fiducial::RPeak,
        Fiducial::SPeak,
        Fiducial::ROffset,
        Fiducial::TOnset,
        Fiducial::TPeak,
        Fiducial::TOffset,
    ];
}

/// Fiducials of one lead in one beat. `r_onset`/`r_offset` bound the whole QRS complex,
/// so the temporal order is P < QRS onset < Q < R < S < QRS offset < T.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LeadFiducials {
    pub p_onset: Option<usize>,
    pub p_peak: Option<usize>,
    pub p_offset: Option<usize>,
    pub r_onset: Option<usize>,
    pub q_peak: Option<usize>,
    pub r_peak: Option<usize>,
    pub s_peak: Option<usize>,
    pub r_offset: Option<usize>,
    pub t_onset: Option<usize>,
    pub t_peak: Option<usize>,
    pub t_offset: Option<usize>,
}

impl LeadFiducials {
    pub fn get(&self, f: Fiducial) -> Option<usize> {
        *self.slot(f)
    }

    pub fn set(&mut self, f: Fiducial, v: Option<usize>) {
        *self.slot_mut(f) = v;
    }

    /// S offset is taken to be the QRS offset.
    pub fn s_offset(&self) -> Option<usize> {
        self.r_offset
    }

    fn slot(&self, f: Fiducial) -> &Option<usize> {
        match f {
            Fiducial::POnset => &self.p_onset,
            Fiducial::PPeak => &self.p_peak,
            Fiducial::POffset => &self.p_offset,
            Fiducial::ROnset => &self.r_onset,
            Fiducial::QPeak => &self.q_peak,
            Fiducial::RPeak => &self.r_peak,
            Fiducial::SPeak => &self.s_peak,
            Fiducial::ROffset => &self.r_offset,
            Fiducial::TOnset => &self.t_onset,
            Fiducial::TPeak => &self.t_peak,
            Fiducial::TOffset => &self.t_offset,
        }
    }

    fn slot_mut(&mut self, f: Fiducial) -> &mut Option<usize> {
        match f {
            Fiducial::POnset => &mut self.p_onset,
            Fiducial::PPeak => &mut self.p_peak,
            Fiducial::POffset => &mut self.p_offset,
            Fiducial::ROnset => &mut self.r_onset,
            Fiducial::QPeak => &mut self.q_peak,
            Fiducial::RPeak => &mut self.r_peak,
            Fiducial::SPeak => &mut self.s_peak,
            Fiducial::ROffset => &mut self.r_offset,
            Fiducial::TOnset => &mut self.t_onset,
            Fiducial::TPeak => &mut self.t_peak,
            Fiducial::TOffset => &mut self.t_offset,
        }
    }

    /// True when all present indices increase strictly in [`Fiducial::ORDER`].
    pub fn is_ordered(&self) -> bool {
        let present: Vec<usize> = Fiducial::ORDER.iter().filter_map(|&f| self.get(f)).collect();
        present.windows(2).all(|w| w[0] < w[1])
    }

    /// Drops fiducials that break the temporal order, working outward from the R peak.
    fn enforce_order(&mut self) {
        let r_pos = Fiducial::ORDER.iter().position(|&f| f == Fiducial::RPeak).expect("R in order");
        let Some(r) = self.r_peak else { return };
        let mut bound = r;
        for &f in Fiducial::ORDER[..r_pos].iter().rev() {
            match self.get(f) {
                Some(v) if v < bound => bound = v,
                Some(_) => self.set(f, None),
                None => {}
            }
        }
        bound = r;
        for &f in &Fiducial::ORDER[r_pos + 1..] {
            match self.get(f) {
                Some(v) if v > bound => bound = v,
                Some(_) => self.set(f, None),
                None => {}
            }
        }
    }
}

/// One beat: the shared R peak plus twelve per-lead fiducial sets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatFiducials {
    pub r_peak: usize,
    pub leads: Vec<LeadFiducials>,
}

/// Fiducials for every detected R peak of a record, including the boundary beats.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FiducialSet {
    pub beats: Vec<BeatFiducials>,
}

enum Dir {
    Left,
    Right,
}

/// Walks away from `peak` until the magnitude drops below `frac * |x[peak]|`, stopping
/// early at a local minimum of the magnitude once in the wave's tail. `None` when the
/// walk would pass `limit`.
fn wave_boundary<T: Scalar>(x: &[T], peak: usize, dir: Dir, limit: usize, frac: f64) -> Option<usize> {
    let amp = x[peak].abs();
    let thr = amp * T::of(frac);
    let half = amp * T::of(0.5);
    let mut i = peak;
    loop {
        let next = match dir {
            Dir::Left if i > limit => i - 1,
            Dir::Right if i < limit => i + 1,
            _ => return None,
        };
        let m = x[next].abs();
        if m < thr {
            return Some(next);
        }
        if m > x[i].abs() && x[i].abs() < half {
            return Some(i);
        }
        i = next;
    }
}

/// Index of the largest |x| in `[lo, hi]` if it is a strict interior local extremum.
fn interior_extremum<T: Scalar>(x: &[T], lo: usize, hi: usize) -> Option<usize> {
    if hi <= lo + 1 {
        return None;
    }
    let mut best = lo;
    for i in lo..=hi {
        if x[i].abs() > x[best].abs() {
            best = i;
        }
    }
    if best == lo || best == hi {
        return None;
    }
    let m = x[best].abs();
    (m > x[best - 1].abs() && m > x[best + 1].abs()).then_some(best)
}

/// Minimum of `x` in `[lo, hi]` if it is a strict interior local minimum.
fn interior_minimum<T: Scalar>(x: &[T], lo: usize, hi: usize) -> Option<usize> {
    if hi <= lo + 1 {
        return None;
    }
    let mut best = lo;
    for i in lo..=hi {
        if x[i] < x[best] {
            best = i;
        }
    }
    if best == lo || best == hi {
        return None;
    }
    (x[best] < x[best - 1] && x[best] < x[best + 1]).then_some(best)
}

/// Delineates one lead of one beat.
fn delineate_lead<T: Scalar>(
    x: &[T],
    r: usize,
    rr_next: Option<usize>,
    fs: f64,
    cfg: &DelineationConfig,
) -> LeadFiducials {
    let n = x.len();
    let ms = |v: f64| DelineationConfig::samples(v, fs);
    let frac = cfg.boundary_fraction;
    let r_amp = x[r].abs();
    let min_amp = r_amp * T::of(cfg.min_wave_fraction);
    let mut f = LeadFiducials { r_peak: Some(r), ..Default::default() };

    // QRS
    let q = interior_minimum(x, r.saturating_sub(ms(cfg.q_window_ms)), r.saturating_sub(1))
        .filter(|&q| q < r && x[q] < x[r] && x[q] < -min_amp);
    let s = interior_minimum(x, (r + 1).min(n - 1), (r + ms(cfg.s_window_ms)).min(n - 1))
        .filter(|&s| s > r && x[s] < x[r] && x[s] < -min_amp);
    f.q_peak = q;
    f.s_peak = s;
    let bound = ms(cfg.qrs_bound_ms);
    f.r_onset = wave_boundary(x, q.unwrap_or(r), Dir::Left, r.saturating_sub(bound), frac);
    f.r_offset = wave_boundary(x, s.unwrap_or(r), Dir::Right, (r + bound).min(n - 1), frac);

    // P
    if r >= ms(cfg.p_window_end_ms) {
        let lo = r.saturating_sub(ms(cfg.p_window_start_ms));
        let hi = r - ms(cfg.p_window_end_ms);
        if let Some(p) = interior_extremum(x, lo, hi).filter(|&p| x[p].abs() >= min_amp) {
            let walk = ms(cfg.p_walk_ms);
            f.p_peak = Some(p);
            f.p_onset = wave_boundary(x, p, Dir::Left, p.saturating_sub(walk), frac);
            f.p_offset = wave_boundary(x, p, Dir::Right, (p + walk).min(r - 1), frac);
        }
    }

    // T
    let mut t_end = ms(cfg.t_window_end_ms);
    if let Some(rr) = rr_next {
        t_end = t_end.min((cfg.t_rr_fraction * rr as f64).floor() as usize);
    }
    let lo = r + ms(cfg.t_window_start_ms);
    let hi = (r + t_end).min(n - 1);
    if lo < hi {
        if let Some(t) = interior_extremum(x, lo, hi).filter(|&t| x[t].abs() >= min_amp) {
            let walk = ms(cfg.t_walk_ms);
            let mut right_limit = (t + walk).min(n - 1);
            if let Some(rr) = rr_next {
                right_limit = right_limit.min(r + rr - 1);
            }
            f.t_peak = Some(t);
            f.t_onset = wave_boundary(x, t, Dir::Left, t.saturating_sub(walk).max(r + 1), frac);
            f.t_offset = wave_boundary(x, t, Dir::Right, right_limit, frac);
        }
    }

    f.enforce_order();
    f
}

/// Delineates all leads of `record` around the shared `r_peaks`.
pub fn delineate<T: Scalar>(record: &EcgRecord<T>, r_peaks: &[usize], cfg: &DelineationConfig) -> FiducialSet {
    let fs = record.fs();
    let n = record.n_samples();
    let beats = r_peaks
        .iter()
        .enumerate()
        .filter(|(_, &r)| r < n)
        .map(|(i, &r)| {
            let rr_next = r_peaks.get(i + 1).map(|&nx| nx - r);
            let leads = (0..N_LEADS)
                .map(|l| delineate_lead(&record.signals[l], r, rr_next, fs, cfg))
                .collect();
            BeatFiducials { r_peak: r, leads }
        })
        .collect();
    FiducialSet { beats }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gauss(t: f64, c: f64, sigma: f64) -> f64 {
        (-(t - c) * (t - c) / (2.0 * sigma * sigma)).exp()
    }

    #[test]
    fn order_enforcement_keeps_r() {
        let mut f = LeadFiducials {
            p_onset: Some(10),
            p_peak: Some(30),
            p_offset: Some(25),
            r_peak: Some(50),
            t_peak: Some(40),
            t_offset: Some(90),
            ..Default::default()
        };
        f.enforce_order();
        assert!(f.is_ordered());
        assert_eq!(f.r_peak, Some(50));
        assert_eq!(f.t_peak, None);
        assert_eq!(f.t_offset, Some(90));
        assert_eq!(f.p_peak, None);
    }

    #[test]
    fn flat_p_segment_and_inverted_t() {
        // single beat at fs = 500 with no P wave and a negative T wave
        let fs = 500.0;
        let r = 400usize;
        let x: Vec<f64> = (0..1000)
            .map(|i| {
                let t = (i as f64 - r as f64) * 1000.0 / fs;
                1.0 * gauss(t, 0.0, 10.0) - 0.3 * gauss(t, 300.0, 40.0) - 0.2 * gauss(t, 30.0, 8.0)
            })
            .collect();
        let f = delineate_lead(&x, r, None, fs, &DelineationConfig::default());
        assert_eq!((f.p_onset, f.p_peak, f.p_offset), (None, None, None));
        assert_eq!(f.t_peak, Some(r + 150));
        assert!(f.s_peak.is_some() && f.r_onset.is_some() && f.r_offset.is_some());
        assert!(x[f.t_peak.unwrap()] < 0.0);
        assert!(f.is_ordered());
    }
}

//! Denoising, R-peak detection, per-lead delineation and beat segmentation.

mod config;
mod delineate;
mod detect;
mod filter;

use serde::{Deserialize, Serialize};

use crate::ecg_io::EcgRecord;
use crate::error::{Error, Result};
use crate::lead::Lead;
use crate::num::Scalar;

pub use config::DelineationConfig;
pub use delineate::{delineate, BeatFiducials, Fiducial, FiducialSet, LeadFiducials};
pub use detect::{detect_r_peaks, reference_peaks};
pub use filter::{denoise, denoise_lead, moving_median};

/// A retained beat. `peak` indexes the record's R-peak list (and its [`FiducialSet`]);
/// `beat_index` counts retained beats only.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeatWindow {
    pub beat_index: usize,
    pub peak: usize,
    pub r_peak_global: usize,
    pub start: usize,
    pub end: usize,
}

/// One window per R peak except the first and last, spanning midpoint to midpoint.
pub fn segment_beats(r_peaks: &[usize]) -> Result<Vec<BeatWindow>> {
    if r_peaks.len() < 3 {
        return Err(Error::TooFewBeats { peaks: r_peaks.len() });
    }
    Ok(r_peaks
        .windows(3)
        .enumerate()
        .map(|(i, w)| BeatWindow {
            beat_index: i,
            peak: i + 1,
            r_peak_global: w[1],
            start: (w[0] + w[1]) / 2,
            end: (w[1] + w[2]) / 2,
        })
        .collect())
}

/// Everything signal preparation learns about one record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Segmentation {
    pub reference_lead: Lead,
    pub r_peaks: Vec<usize>,
    pub fiducials: FiducialSet,
    pub windows: Vec<BeatWindow>,
}

impl Segmentation {
    pub fn beat(&self, beat_index: usize) -> Option<&BeatFiducials> {
        self.windows.get(beat_index).map(|w| &self.fiducials.beats[w.peak])
    }

    /// `(previous R, R, next R)` for a retained beat.
    pub fn rr_context(&self, beat_index: usize) -> Option<(usize, usize, usize)> {
        let w = self.windows.get(beat_index)?;
        Some((self.r_peaks[w.peak - 1], self.r_peaks[w.peak], self.r_peaks[w.peak + 1]))
    }
}

/// Detection, delineation and segmentation on an already prepared record.
pub fn segment_record<T: Scalar>(record: &EcgRecord<T>, cfg: &DelineationConfig) -> Result<Segmentation> {
    let (reference_lead, r_peaks) = reference_peaks(record, cfg)?;
    let windows = segment_beats(&r_peaks)?;
    let fiducials = delineate(record, &r_peaks, cfg);
    Ok(Segmentation { reference_lead, r_peaks, fiducials, windows })
}

//! Record containers, WFDB and CSV readers, and cohort construction.

mod cohort;
mod csv_record;
mod wfdb;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lead::{Lead, N_LEADS};
use crate::num::Scalar;

pub use cohort::{
    balanced_split, classify_codes, filter_cohort, parse_scp_codes, Cohort, CohortEntry,
    CohortManifest, Exclusion, FilterRules, ManifestRow, Split, SplitSide,
};
pub use csv_record::{load_record_csv, write_record_csv, CsvSidecar};
pub use wfdb::{
    decode_format16, encode_format16, load_wfdb_record, parse_wfdb_header, write_wfdb_record,
    Calibration,
};

/// Diagnostic class used by the binary classifier.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Class {
    #[serde(rename = "NORM")]
    Norm,
    #[serde(rename = "MI")]
    Mi,
}

impl Class {
    pub fn from_bit(bit: u8) -> Self {
        if bit == 0 {
            Class::Norm
        } else {
            Class::Mi
        }
    }

    pub fn bit(self) -> u8 {
        match self {
            Class::Norm => 0,
            Class::Mi => 1,
        }
    }

    pub fn opposite(self) -> Self {
        match self {
            Class::Norm => Class::Mi,
            Class::Mi => Class::Norm,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Norm => "NORM",
            Class::Mi => "MI",
        }
    }
}

impl std::str::FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "NORM" | "0" => Ok(Class::Norm),
            "MI" | "1" => Ok(Class::Mi),
            other => Err(Error::InvalidParam(format!("unknown class {other:?}"))),
        }
    }
}

/// Resolved record label: the binary class plus the statement code that decided it
/// (`NORM`, or the localized MI code such as `IMI`).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Label {
    pub class: Class,
    pub code: String,
}

impl Label {
    pub fn norm() -> Self {
        Label { class: Class::Norm, code: "NORM".into() }
    }

    pub fn mi(code: impl Into<String>) -> Self {
        Label { class: Class::Mi, code: code.into() }
    }
}

/// Per-signal line of a WFDB header.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSpec {
    pub file_name: String,
    pub storage_format: u16,
    /// ADC units per millivolt.
    pub gain: f64,
    /// ADC value corresponding to 0 mV.
    pub baseline: i32,
    pub lead_name: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecordHeader {
    pub record_name: String,
    pub n_signals: usize,
    pub sampling_rate: f64,
    pub n_samples: usize,
    pub signals: Vec<SignalSpec>,
}

/// Twelve lead signals in millivolts, always stored in [`Lead::ALL`] order.
#[derive(Clone, Debug, PartialEq)]
pub struct EcgRecord<T> {
    pub header: RecordHeader,
    pub signals: Vec<Vec<T>>,
    pub label: Option<Label>,
    pub patient_id: Option<String>,
}

impl<T: Scalar> EcgRecord<T> {
    /// Builds a record from lead-ordered signals. Every lead must have the same length.
    pub fn new(record_name: impl Into<String>, fs: f64, signals: Vec<Vec<T>>) -> Result<Self> {
        let record_name = record_name.into();
        if signals.len() != N_LEADS {
            return Err(Error::LeadCount(signals.len()));
        }
        if !(fs > 0.0) {
            return Err(Error::Record {
                record: record_name,
                message: format!("sampling rate must be positive, got {fs}"),
            });
        }
        let n = signals[0].len();
        if let Some(bad) = signals.iter().position(|s| s.len() != n) {
            return Err(Error::Record {
                record: record_name,
                message: format!(
                    "lead {} has {} samples, expected {n}",
                    Lead::ALL[bad],
                    signals[bad].len()
                ),
            });
        }
        let header = RecordHeader {
            record_name: record_name.clone(),
            n_signals: N_LEADS,
            sampling_rate: fs,
            n_samples: n,
            signals: Lead::ALL
                .iter()
                .map(|l| SignalSpec {
                    file_name: String::new(),
                    storage_format: 0,
                    gain: 1.0,
                    baseline: 0,
                    lead_name: l.name().to_string(),
                })
                .collect(),
        };
        Ok(EcgRecord { header, signals, label: None, patient_id: None })
    }

    pub fn name(&self) -> &str {
        &self.header.record_name
    }

    pub fn fs(&self) -> f64 {
        self.header.sampling_rate
    }

    pub fn n_samples(&self) -> usize {
        self.header.n_samples
    }

    pub fn lead(&self, lead: Lead) -> &[T] {
        &self.signals[lead.index()]
    }

    pub fn duration_s(&self) -> f64 {
        self.n_samples() as f64 / self.fs()
    }

    pub fn with_label(mut self, label: Label) -> Self {
        self.label = Some(label);
        self
    }

    pub fn with_patient(mut self, patient_id: impl Into<String>) -> Self {
        self.patient_id = Some(patient_id.into());
        self
    }

    /// Same record with every sample mapped through `f`.
    pub fn map_samples(&self, mut f: impl FnMut(T) -> T) -> Self {
        EcgRecord {
            header: self.header.clone(),
            signals: self.signals.iter().map(|s| s.iter().map(|&x| f(x)).collect()).collect(),
            label: self.label.clone(),
            patient_id: self.patient_id.clone(),
        }
    }
}

/// Reorders `(lead name, samples)` pairs into canonical lead order.
pub(crate) fn canonical_order<T>(record: &str, named: Vec<(String, Vec<T>)>) -> Result<Vec<Vec<T>>> {
    if named.len() != N_LEADS {
        return Err(Error::LeadCount(named.len()));
    }
    let mut slots: Vec<Option<Vec<T>>> = (0..N_LEADS).map(|_| None).collect();
    for (name, samples) in named {
        let lead: Lead = name.parse()?;
        if slots[lead.index()].is_some() {
            return Err(Error::Record {
                record: record.to_string(),
                message: format!("duplicate lead {lead}"),
            });
        }
        slots[lead.index()] = Some(samples);
    }
    Ok(slots.into_iter().map(|s| s.expect("12 distinct leads fill 12 slots")).collect())
}

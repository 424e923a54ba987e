//! Plain-text record format: one header row of lead names, one row per sample (mV),
//! with a `.meta` key-value sidecar carrying the sampling rate and identity.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{canonical_order, EcgRecord, Label};
use crate::error::{Error, Result};
use crate::lead::{Lead, N_LEADS};
use crate::num::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CsvSidecar {
    pub fs: Option<f64>,
    pub patient_id: Option<String>,
    pub label: Option<Label>,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta")
}

/// Reads a CSV record. `fs` overrides the sidecar's sampling rate; one of the two is required.
pub fn load_record_csv<T: Scalar>(path: &Path, fs: Option<f64>) -> Result<EcgRecord<T>> {
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let meta_path = sidecar_path(path);
    let sidecar: CsvSidecar = if meta_path.exists() {
        toml::from_str(&fs::read_to_string(&meta_path)?)
            .map_err(|e| Error::Config(format!("{}: {e}", meta_path.display())))?
    } else {
        CsvSidecar::default()
    };
    let fs = fs.or(sidecar.fs).ok_or_else(|| Error::Record {
        record: name.clone(),
        message: "sampling rate not given by sidecar or caller".into(),
    })?;

    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if headers.len() != N_LEADS {
        return Err(Error::LeadCount(headers.len()));
    }
    let mut cols: Vec<Vec<T>> = vec![Vec::new(); N_LEADS];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.len() != N_LEADS {
            return Err(Error::LeadCount(rec.len()));
        }
        for (c, cell) in rec.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::CsvCell {
                row: row + 1,
                message: format!("non-numeric cell {cell:?} in column {}", headers[c]),
            })?;
            cols[c].push(T::of(v));
        }
    }
    let signals = canonical_order(&name, headers.into_iter().zip(cols).collect())?;
    let mut record = EcgRecord::new(name, fs, signals)?;
    record.label = sidecar.label;
    record.patient_id = sidecar.patient_id;
    Ok(record)
}

/// Writes the record in canonical lead order plus its sidecar.
pub fn write_record_csv<T: Scalar>(path: &Path, record: &EcgRecord<T>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(Lead::ALL.iter().map(|l| l.name()))?;
    for i in 0..record.n_samples() {
        w.write_record(record.signals.iter().map(|s| s[i].to_string()))?;
    }
    w.flush()?;
    let sidecar = CsvSidecar {
        fs: Some(record.fs()),
        patient_id: record.patient_id.clone(),
        label: record.label.clone(),
    };
    let text = toml::to_string(&sidecar).map_err(|e| Error::Config(e.to_string()))?;
    fs::write(sidecar_path(path), text)?;
    Ok(())
}

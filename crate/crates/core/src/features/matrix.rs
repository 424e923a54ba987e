//! Beat-level feature matrix, its CSV form and the imputation sidecar.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ecg_io::{Class, EcgRecord};
use crate::error::{Error, Result};
use crate::num::Scalar;
use crate::signal::Segmentation;

use super::extract::{extract_amplitudes, extract_temporal};
use super::names::{feature_names, N_FEATURES};

/// Where a matrix row came from.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeatProvenance {
    pub record_id: String,
    pub patient_id: Option<String>,
    /// Ordinal among the record's retained beats.
    pub beat_index: usize,
    pub r_peak: usize,
    pub label: Option<Class>,
}

/// Rows of 194 optional values; `None` marks an undetected fiducial.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMatrix {
    pub names: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
    pub provenance: Vec<BeatProvenance>,
    pub fs: f64,
}

/// All 194 features of retained beat `beat_index`.
pub fn beat_features<T: Scalar>(record: &EcgRecord<T>, seg: &Segmentation, beat_index: usize) -> Option<Vec<Option<f64>>> {
    let beat = seg.beat(beat_index)?;
    let (prev, r, next) = seg.rr_context(beat_index)?;
    let reference = &beat.leads[seg.reference_lead.index()];
    let mut row = Vec::with_capacity(N_FEATURES);
    row.extend(extract_temporal(reference, prev, r, next, record.fs()));
    for (xs, f) in record.signals.iter().zip(&beat.leads) {
        row.extend(extract_amplitudes(xs, f).map(|v| v.map(T::as_f64)));
    }
    Some(row)
}

/// One row per retained beat, records in input order, beats in time order.
pub fn build_feature_matrix<T: Scalar>(records: &[(&EcgRecord<T>, &Segmentation)]) -> FeatureMatrix {
    let per_record: Vec<Vec<(Vec<Option<f64>>, BeatProvenance)>> = records
        .par_iter()
        .map(|(record, seg)| {
            seg.windows
                .iter()
                .filter_map(|w| {
                    let row = beat_features(record, seg, w.beat_index)?;
                    let prov = BeatProvenance {
                        record_id: record.name().to_string(),
                        patient_id: record.patient_id.clone(),
                        beat_index: w.beat_index,
                        r_peak: w.r_peak_global,
                        label: record.label.as_ref().map(|l| l.class),
                    };
                    Some((row, prov))
                })
                .collect()
        })
        .collect();
    let (rows, provenance) = per_record.into_iter().flatten().unzip();
    FeatureMatrix {
        names: feature_names(),
        rows,
        provenance,
        fs: records.first().map_or(0.0, |(r, _)| r.fs()),
    }
}

const META_COLUMNS: [&str; 5] = ["record_id", "patient_id", "beat_index", "r_peak", "label"];

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.names.len()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.names.iter().position(|n| n == name).ok_or_else(|| Error::UnknownFeature(name.to_string()))
    }

    /// Labels of every row; errors if any row is unlabelled.
    pub fn labels(&self) -> Result<Vec<Class>> {
        self.provenance
            .iter()
            .map(|p| {
                p.label.ok_or_else(|| Error::Record { record: p.record_id.clone(), message: "record has no label".into() })
            })
            .collect()
    }

    /// A copy restricted to the named columns, in the given order.
    pub fn select(&self, names: &[String]) -> Result<FeatureMatrix> {
        let idx = names.iter().map(|n| self.column_index(n)).collect::<Result<Vec<_>>>()?;
        Ok(FeatureMatrix {
            names: names.to_vec(),
            rows: self.rows.iter().map(|r| idx.iter().map(|&i| r[i]).collect()).collect(),
            provenance: self.provenance.clone(),
            fs: self.fs,
        })
    }

    /// A copy holding only the given rows.
    pub fn subset_rows(&self, rows: &[usize]) -> FeatureMatrix {
        FeatureMatrix {
            names: self.names.clone(),
            rows: rows.iter().map(|&i| self.rows[i].clone()).collect(),
            provenance: rows.iter().map(|&i| self.provenance[i].clone()).collect(),
            fs: self.fs,
        }
    }

    /// Per-column mean over present values of the given rows; 0 for a column with none.
    pub fn imputation_means(&self, rows: &[usize]) -> Vec<f64> {
        (0..self.n_cols())
            .map(|c| {
                let (sum, n) = rows
                    .iter()
                    .filter_map(|&r| self.rows[r][c])
                    .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
                if n == 0 {
                    0.0
                } else {
                    sum / n as f64
                }
            })
            .collect()
    }

    /// Dense rows with missing cells replaced by `means`.
    pub fn imputed(&self, means: &[f64]) -> Result<Vec<Vec<f64>>> {
        if means.len() != self.n_cols() {
            return Err(Error::LengthMismatch { expected: self.n_cols(), got: means.len() });
        }
        Ok(self
            .rows
            .iter()
            .map(|r| r.iter().zip(means).map(|(v, m)| v.unwrap_or(*m)).collect())
            .collect())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(META_COLUMNS.iter().copied().chain(self.names.iter().map(String::as_str)))?;
        for (row, p) in self.rows.iter().zip(&self.provenance) {
            let mut cells = vec![
                p.record_id.clone(),
                p.patient_id.clone().unwrap_or_default(),
                p.beat_index.to_string(),
                p.r_peak.to_string(),
                p.label.map(|c| c.name().to_string()).unwrap_or_default(),
            ];
            cells.extend(row.iter().map(|v| v.map(|v| v.to_string()).unwrap_or_default()));
            w.write_record(&cells)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a matrix written by [`write_csv`](Self::write_csv); `fs` comes from the sidecar.
    pub fn read_csv(path: &Path, fs: f64) -> Result<FeatureMatrix> {
        let mut r = csv::Reader::from_path(path)?;
        let header = r.headers()?.clone();
        if header.len() < META_COLUMNS.len() || header.iter().zip(META_COLUMNS).any(|(a, b)| a != b) {
            return Err(Error::CsvCell { row: 0, message: format!("expected leading columns {META_COLUMNS:?}") });
        }
        let names: Vec<String> = header.iter().skip(META_COLUMNS.len()).map(String::from).collect();
        let mut rows = Vec::new();
        let mut provenance = Vec::new();
        for (i, rec) in r.records().enumerate() {
            let rec = rec?;
            let row_no = i + 1;
            let cell = |msg: String| Error::CsvCell { row: row_no, message: msg };
            let int = |s: &str| s.parse::<usize>().map_err(|e| cell(format!("{s:?}: {e}")));
            let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
            provenance.push(BeatProvenance {
                record_id: rec[0].to_string(),
                patient_id: opt(&rec[1]),
                beat_index: int(&rec[2])?,
                r_peak: int(&rec[3])?,
                label: opt(&rec[4]).map(|s| s.parse()).transpose()?,
            });
            let row = rec
                .iter()
                .skip(META_COLUMNS.len())
                .map(|s| {
                    if s.is_empty() {
                        Ok(None)
                    } else {
                        s.parse::<f64>().map(Some).map_err(|e| cell(format!("{s:?}: {e}")))
                    }
                })
                .collect::<Result<Vec<_>>>()?;
            if row.len() != names.len() {
                return Err(cell(format!("expected {} values, found {}", names.len(), row.len())));
            }
            rows.push(row);
        }
        Ok(FeatureMatrix { names, rows, provenance, fs })
    }
}

/// JSON sidecar stored next to the matrix CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureSidecar {
    pub columns: Vec<String>,
    pub imputation_means: Option<Vec<f64>>,
    pub fs: f64,
}

impl FeatureSidecar {
    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, serde_json::to_string_pretty(self)?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> FeatureMatrix {
        let mut names = feature_names();
        names.truncate(3);
        FeatureMatrix {
            names,
            rows: vec![vec![Some(1.0), None, Some(0.1 + 0.2)], vec![Some(3.0), Some(-2.5e-7), None]],
            provenance: vec![
                BeatProvenance { record_id: "a".into(), patient_id: Some("7".into()), beat_index: 0, r_peak: 90, label: Some(Class::Mi) },
                BeatProvenance { record_id: "a".into(), patient_id: None, beat_index: 1, r_peak: 180, label: None },
            ],
            fs: 100.0,
        }
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.csv");
        let m = toy();
        m.write_csv(&p).unwrap();
        assert_eq!(FeatureMatrix::read_csv(&p, 100.0).unwrap(), m);
    }

    #[test]
    fn imputation() {
        let m = toy();
        assert_eq!(m.imputation_means(&[0, 1]), vec![2.0, -2.5e-7, 0.1 + 0.2]);
        assert_eq!(m.imputation_means(&[0]), vec![1.0, 0.0, 0.1 + 0.2]);
        let dense = m.imputed(&[9.0, 8.0, 7.0]).unwrap();
        assert_eq!(dense, vec![vec![1.0, 8.0, 0.1 + 0.2], vec![3.0, -2.5e-7, 7.0]]);
        assert!(m.labels().is_err());
        let s = m.select(&["RR_Rate".to_string(), "RR_Prev".to_string()]).unwrap();
        assert_eq!(s.rows[0], vec![Some(0.1 + 0.2), Some(1.0)]);
    }
}

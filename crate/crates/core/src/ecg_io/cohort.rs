//! Manifest parsing, inclusion rules and the balanced patient-level split.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Class, Label};
use crate::error::{Error, Result};

const DEFAULT_RULES: &str = include_str!("../../data/filter_rules.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterRules {
    pub norm_code: String,
    pub certainty: f64,
    pub exclude_any: Vec<String>,
    pub drop_any: Vec<String>,
    pub mi_priority: Vec<String>,
}

impl Default for FilterRules {
    fn default() -> Self {
        Self::from_toml(DEFAULT_RULES).expect("bundled filter rules parse")
    }
}

impl FilterRules {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(format!("filter rules: {e}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestRow {
    pub record_id: String,
    pub patient_id: String,
    pub record_path: Option<String>,
    pub scp_codes: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CohortManifest {
    pub rows: Vec<ManifestRow>,
}

/// Tolerant scanner for serialized dictionaries such as `{'NORM': 100.0, 'SR': 0.0}`.
pub fn parse_scp_codes(text: &str) -> Result<BTreeMap<String, f64>> {
    let body = text.trim().trim_start_matches('{').trim_end_matches('}');
    let mut out = BTreeMap::new();
    for item in body.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (k, v) = item
            .split_once(':')
            .ok_or_else(|| Error::Manifest(format!("expected key:value in {item:?}")))?;
        let key = k.trim().trim_matches(|c| c == '\'' || c == '"').trim().to_string();
        let value: f64 = v
            .trim()
            .trim_matches(|c| c == '\'' || c == '"')
            .parse()
            .map_err(|_| Error::Manifest(format!("bad likelihood in {item:?}")))?;
        if !(0.0..=100.0).contains(&value) {
            return Err(Error::Manifest(format!("likelihood {value} outside [0, 100] for {key}")));
        }
        out.insert(key, value);
    }
    Ok(out)
}

/// `15709.0` and `15709` name the same patient.
fn normalize_id(s: &str) -> String {
    let t = s.trim();
    t.strip_suffix(".0").unwrap_or(t).to_string()
}

impl CohortManifest {
    /// Reads the reduced `ptbxl_database.csv` schema: `ecg_id` (or `record_id`), `patient_id`,
    /// `scp_codes`, and optionally `filename_lr` (or `record_path`).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let col = |names: &[&str]| headers.iter().position(|h| names.contains(&h.trim()));
        let id_col = col(&["ecg_id", "record_id"])
            .ok_or_else(|| Error::Manifest("missing ecg_id/record_id column".into()))?;
        let patient_col =
            col(&["patient_id"]).ok_or_else(|| Error::Manifest("missing patient_id column".into()))?;
        let scp_col =
            col(&["scp_codes"]).ok_or_else(|| Error::Manifest("missing scp_codes column".into()))?;
        let path_col = col(&["filename_lr", "record_path"]);

        let mut rows = Vec::new();
        for (i, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let get = |c: usize| rec.get(c).unwrap_or("").to_string();
            let scp_codes = parse_scp_codes(&get(scp_col))
                .map_err(|e| Error::Manifest(format!("row {}: {e}", i + 1)))?;
            rows.push(ManifestRow {
                record_id: normalize_id(&get(id_col)),
                patient_id: normalize_id(&get(patient_col)),
                record_path: path_col.map(get).filter(|p| !p.is_empty()),
                scp_codes,
            });
        }
        Ok(CohortManifest { rows })
    }
}

/// Why a manifest row was left out of the cohort.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Exclusion {
    /// Carries an ST-T change statement.
    SttChange(String),
    /// Subendocardial injury or posterior MI.
    Dropped(String),
    /// NORM and MI both asserted.
    Conflicting,
    /// No deciding statement at the required certainty.
    Uncertain,
}

/// Applies the inclusion rules to one statement map.
pub fn classify_codes(codes: &BTreeMap<String, f64>, rules: &FilterRules) -> std::result::Result<Label, Exclusion> {
    if let Some(c) = codes.keys().find(|c| rules.exclude_any.contains(c)) {
        return Err(Exclusion::SttChange(c.clone()));
    }
    if let Some(c) = codes.keys().find(|c| rules.drop_any.contains(c)) {
        return Err(Exclusion::Dropped(c.clone()));
    }
    let certain = |c: &str| codes.get(c).is_some_and(|&p| p >= rules.certainty);
    let mi = rules.mi_priority.iter().find(|c| certain(c));
    let norm = certain(&rules.norm_code);
    match (norm, mi) {
        (true, Some(_)) => Err(Exclusion::Conflicting),
        (false, Some(code)) => Ok(Label::mi(code.clone())),
        (true, None) => {
            if codes.keys().any(|c| rules.mi_priority.contains(c)) {
                Err(Exclusion::Uncertain)
            } else {
                Ok(Label::norm())
            }
        }
        (false, None) => Err(Exclusion::Uncertain),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitSide {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortEntry {
    pub record_id: String,
    pub patient_id: String,
    pub record_path: Option<String>,
    pub label: Label,
    pub scp_codes: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Cohort {
    pub entries: Vec<CohortEntry>,
}

impl Cohort {
    pub fn to_manifest(&self) -> CohortManifest {
        CohortManifest {
            rows: self
                .entries
                .iter()
                .map(|e| ManifestRow {
                    record_id: e.record_id.clone(),
                    patient_id: e.patient_id.clone(),
                    record_path: e.record_path.clone(),
                    scp_codes: e.scp_codes.clone(),
                })
                .collect(),
        }
    }
}

/// Keeps the rows whose statements resolve to exactly one of NORM / MI.
pub fn filter_cohort(manifest: &CohortManifest, rules: &FilterRules) -> Result<Cohort> {
    let mut entries = Vec::new();
    for row in &manifest.rows {
        match classify_codes(&row.scp_codes, rules) {
            Ok(label) => entries.push(CohortEntry {
                record_id: row.record_id.clone(),
                patient_id: row.patient_id.clone(),
                record_path: row.record_path.clone(),
                label,
                scp_codes: row.scp_codes.clone(),
            }),
            Err(why) => log::debug!("excluding record {}: {why:?}", row.record_id),
        }
    }
    if entries.is_empty() {
        return Err(Error::EmptyCohort);
    }
    Ok(Cohort { entries })
}

#[derive(Clone, Debug, PartialEq)]
pub struct Split {
    pub train: Vec<CohortEntry>,
    pub test: Vec<CohortEntry>,
}

impl Split {
    pub fn patients(entries: &[CohortEntry], class: Class) -> BTreeSet<String> {
        entries
            .iter()
            .filter(|e| e.label.class == class)
            .map(|e| e.patient_id.clone())
            .collect()
    }
}

/// Orders numeric ids numerically and everything else lexically.
pub(crate) fn id_key(id: &str) -> (u64, String) {
    (id.parse::<u64>().unwrap_or(u64::MAX), id.to_string())
}

/// Undersamples the majority class to the minority's patient count, then splits each class
/// at patient level with `test_fraction` of patients (rounded) held out.
pub fn balanced_split(cohort: &Cohort, seed: u64, test_fraction: f64) -> Result<Split> {
    if !(0.0..1.0).contains(&test_fraction) {
        return Err(Error::InvalidParam(format!("test fraction {test_fraction} not in [0, 1)")));
    }
    let mut by_patient: BTreeMap<String, Vec<&CohortEntry>> = BTreeMap::new();
    for e in &cohort.entries {
        by_patient.entry(e.patient_id.clone()).or_default().push(e);
    }
    let mut per_class: [Vec<&String>; 2] = [Vec::new(), Vec::new()];
    for (pid, recs) in &by_patient {
        let class = recs[0].label.class;
        if recs.iter().any(|r| r.label.class != class) {
            log::debug!("patient {pid} has records of both classes; left out");
            continue;
        }
        per_class[class.bit() as usize].push(pid);
    }
    let n = per_class[0].len().min(per_class[1].len());
    if n == 0 {
        return Err(Error::Split(format!(
            "need both classes, have {} NORM and {} MI patients",
            per_class[0].len(),
            per_class[1].len()
        )));
    }
    let n_test = (n as f64 * test_fraction).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut test = Vec::new();
    for patients in &mut per_class {
        patients.shuffle(&mut rng);
        for (i, pid) in patients.iter().take(n).enumerate() {
            let side = if i < n_test { &mut test } else { &mut train };
            side.extend(by_patient[*pid].iter().map(|e| (*e).clone()));
        }
    }
    train.sort_by_key(|e| id_key(&e.record_id));
    test.sort_by_key(|e| id_key(&e.record_id));
    Ok(Split { train, test })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn codes(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn scanner_tolerates_python_dict_text() {
        let c = parse_scp_codes("{'NORM': 100.0, 'SR': 0.0}").unwrap();
        assert_eq!(c, codes(&[("NORM", 100.0), ("SR", 0.0)]));
        assert_eq!(parse_scp_codes("{}").unwrap().len(), 0);
        assert!(parse_scp_codes("{'IMI': 140}").is_err());
    }

    #[test]
    fn rule_examples() {
        let r = FilterRules::default();
        assert_eq!(classify_codes(&codes(&[("NORM", 100.0)]), &r), Ok(Label::norm()));
        assert!(matches!(
            classify_codes(&codes(&[("IMI", 100.0), ("STTC", 50.0)]), &r),
            Err(Exclusion::SttChange(_))
        ));
        assert!(matches!(classify_codes(&codes(&[("PMI", 100.0)]), &r), Err(Exclusion::Dropped(_))));
        assert_eq!(
            classify_codes(&codes(&[("MI", 100.0), ("IMI", 100.0), ("AMI", 100.0)]), &r),
            Ok(Label::mi("AMI"))
        );
        assert_eq!(classify_codes(&codes(&[("IMI", 50.0)]), &r), Err(Exclusion::Uncertain));
        assert_eq!(classify_codes(&codes(&[("NORM", 100.0), ("IMI", 15.0)]), &r), Err(Exclusion::Uncertain));
    }

    #[test]
    fn empty_cohort_is_an_error() {
        let m = CohortManifest {
            rows: vec![ManifestRow {
                record_id: "1".into(),
                patient_id: "1".into(),
                record_path: None,
                scp_codes: codes(&[("STTC", 100.0)]),
            }],
        };
        assert!(matches!(filter_cohort(&m, &FilterRules::default()), Err(Error::EmptyCohort)));
    }

    #[test]
    fn manifest_csv_reduced_schema() {
        let text = "ecg_id,patient_id,scp_codes,filename_lr\n\
                    1,15709.0,\"{'NORM': 100.0, 'SR': 0.0}\",records100/00000/00001_lr\n\
                    2,13243.0,\"{'IMI': 100.0}\",records100/00000/00002_lr\n";
        let m = CohortManifest::from_csv(text.as_bytes()).unwrap();
        assert_eq!(m.rows.len(), 2);
        assert_eq!(m.rows[0].patient_id, "15709");
        assert_eq!(m.rows[1].record_path.as_deref(), Some("records100/00000/00002_lr"));
    }

    fn synthetic_cohort(norm: usize, mi: usize) -> Cohort {
        let mut entries = Vec::new();
        for i in 0..norm + mi {
            let label = if i < norm { Label::norm() } else { Label::mi("IMI") };
            // every third patient has two records
            for r in 0..(1 + (i % 3 == 0) as usize) {
                entries.push(CohortEntry {
                    record_id: format!("{}", i * 10 + r),
                    patient_id: format!("p{i}"),
                    record_path: None,
                    label: label.clone(),
                    scp_codes: BTreeMap::new(),
                });
            }
        }
        Cohort { entries }
    }

    #[test]
    fn split_counts_match_the_published_cohort_arithmetic() {
        // 1,949 patients per class after balancing -> 1,559 train / 390 test.
        let c = synthetic_cohort(2500, 1949);
        let s = balanced_split(&c, 7, 0.2).unwrap();
        assert_eq!(Split::patients(&s.train, Class::Norm).len(), 1559);
        assert_eq!(Split::patients(&s.train, Class::Mi).len(), 1559);
        assert_eq!(Split::patients(&s.test, Class::Norm).len(), 390);
        assert_eq!(Split::patients(&s.test, Class::Mi).len(), 390);
        assert_eq!(s, balanced_split(&c, 7, 0.2).unwrap());
        assert!(balanced_split(&synthetic_cohort(5, 0), 1, 0.2).is_err());
    }

    proptest! {
        #[test]
        fn filter_is_idempotent(rows in prop::collection::vec(
            prop::collection::btree_map(
                prop::sample::select(vec!["NORM", "IMI", "AMI", "MI", "STTC", "PMI", "SR", "LVH"]),
                prop::sample::select(vec![0.0, 50.0, 100.0]), 1..4), 1..30)) {
            let m = CohortManifest { rows: rows.into_iter().enumerate().map(|(i, c)| ManifestRow {
                record_id: i.to_string(), patient_id: i.to_string(), record_path: None,
                scp_codes: c.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            }).collect() };
            let rules = FilterRules::default();
            if let Ok(once) = filter_cohort(&m, &rules) {
                let twice = filter_cohort(&once.to_manifest(), &rules).unwrap();
                prop_assert_eq!(once, twice);
            }
        }

        #[test]
        fn split_is_balanced_and_disjoint(norm in 2usize..40, mi in 2usize..40, seed in any::<u64>()) {
            let s = balanced_split(&synthetic_cohort(norm, mi), seed, 0.2).unwrap();
            let tn = Split::patients(&s.train, Class::Norm);
            let tm = Split::patients(&s.train, Class::Mi);
            let en = Split::patients(&s.test, Class::Norm);
            let em = Split::patients(&s.test, Class::Mi);
            prop_assert_eq!(tn.len(), tm.len());
            prop_assert_eq!(en.len(), em.len());
            let train: BTreeSet<_> = tn.union(&tm).collect();
            let test: BTreeSet<_> = en.union(&em).collect();
            prop_assert!(train.is_disjoint(&test));
        }
    }
}

//! Clinician-facing scores: lead alignment, visualization validity and tier aggregation.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lead::Lead;
use crate::num::{mean, population_std};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AlignmentMode {
    /// A lead counts when marked exactly if it is clinically important.
    #[default]
    Agreement,
    /// A lead counts whenever it is marked.
    MarkedOnly,
}

impl FromStr for AlignmentMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "agreement" => Ok(Self::Agreement),
            "marked-only" => Ok(Self::MarkedOnly),
            other => Err(Error::Config(format!("unknown alignment mode {other:?}"))),
        }
    }
}

/// Weighted agreement over the 12 leads: weight `important` for clinically important
/// leads, `other` for the rest.
pub fn alignment_score_weighted(important: &[Lead], marked: &[Lead], mode: AlignmentMode, w_important: f64, w_other: f64) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for lead in Lead::ALL {
        let imp = important.contains(&lead);
        let mk = marked.contains(&lead);
        let w = if imp { w_important } else { w_other };
        let hit = match mode {
            AlignmentMode::Agreement => imp == mk,
            AlignmentMode::MarkedOnly => mk,
        };
        den += w;
        if hit {
            num += w;
        }
    }
    num / den.max(1.0)
}

/// Alignment with the standard weights 3 (important) and 1 (other); lead names are parsed.
pub fn alignment_score<S: AsRef<str>>(important: &[S], marked: &[S], mode: AlignmentMode) -> Result<f64> {
    let parse = |xs: &[S]| xs.iter().map(|s| s.as_ref().parse::<Lead>()).collect::<Result<Vec<_>>>();
    Ok(alignment_score_weighted(&parse(important)?, &parse(marked)?, mode, 3.0, 1.0))
}

/// Visualization validity score: the sum of five per-waveform scores, each 0 to 5.
pub fn vvs(scores: &[u32; 5]) -> Result<u32> {
    if let Some(&bad) = scores.iter().find(|&&s| s > 5) {
        return Err(Error::ScoreRange(bad));
    }
    Ok(scores.iter().sum())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    Low,
    Moderate,
    Good,
}

impl FromStr for Tier {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "low" => Ok(Tier::Low),
            "moderate" => Ok(Tier::Moderate),
            "good" | "high" => Ok(Tier::Good),
            other => Err(Error::Config(format!("unknown interpretability tier {other:?}"))),
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Low => "low",
            Tier::Moderate => "moderate",
            Tier::Good => "good",
        })
    }
}

/// One clinician assessment of one report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClinicianLabel {
    pub record_id: String,
    pub tier: Tier,
    pub wrong_marks: u32,
    /// P, Q, R, S, T significance scores.
    pub scores: [u32; 5],
    pub important_leads: Vec<Lead>,
    /// Reason the report was set aside (e.g. artifact, VES), if any.
    pub exclusion: Option<String>,
}

impl ClinicianLabel {
    pub fn vvs(&self) -> Result<u32> {
        vvs(&self.scores)
    }
}

/// Reads the clinician label CSV (`record_id, tier, wrong_marks, p, q, r, s, t,
/// important_leads, exclusion`), with leads separated by semicolons.
pub fn read_clinician_labels(path: &Path) -> Result<Vec<ClinicianLabel>> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let row = i + 1;
        let cell = |c: usize| rec.get(c).unwrap_or("");
        let num = |c: usize| cell(c).parse::<u32>().map_err(|e| Error::CsvCell { row, message: format!("column {c}: {e}") });
        if rec.len() < 9 {
            return Err(Error::CsvCell { row, message: format!("expected at least 9 columns, found {}", rec.len()) });
        }
        let leads = cell(8)
            .split(';')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<Vec<Lead>>>()?;
        let exclusion = match cell(9).to_ascii_lowercase().as_str() {
            "" | "0" | "false" | "no" => None,
            _ => Some(cell(9).to_string()),
        };
        let scores = [num(3)?, num(4)?, num(5)?, num(6)?, num(7)?];
        vvs(&scores)?;
        out.push(ClinicianLabel {
            record_id: cell(0).to_string(),
            tier: cell(1).parse()?,
            wrong_marks: num(2)?,
            scores,
            important_leads: leads,
            exclusion,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub count: usize,
    pub mean: f64,
    /// Population standard deviation.
    pub std: f64,
}

impl MeanStd {
    pub fn of(xs: &[f64]) -> Self {
        MeanStd { count: xs.len(), mean: mean(xs).unwrap_or(0.0), std: population_std(xs).unwrap_or(0.0) }
    }
}

impl fmt::Display for MeanStd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}, {:.2} ± {:.2}", self.count, self.mean, self.std)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InterpretabilitySummary {
    pub tiers: BTreeMap<Tier, MeanStd>,
    /// Excluded reports grouped by exclusion reason.
    pub excluded: BTreeMap<String, MeanStd>,
}

/// VVS mean ± std per tier over retained reports, with exclusions summarized apart.
pub fn aggregate_interpretability(labels: &[ClinicianLabel]) -> Result<InterpretabilitySummary> {
    let mut tiers: BTreeMap<Tier, Vec<f64>> = BTreeMap::new();
    let mut excluded: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for l in labels {
        let v = f64::from(l.vvs()?);
        match &l.exclusion {
            Some(reason) => excluded.entry(reason.clone()).or_default().push(v),
            None => tiers.entry(l.tier).or_default().push(v),
        }
    }
    Ok(InterpretabilitySummary {
        tiers: tiers.into_iter().map(|(k, v)| (k, MeanStd::of(&v))).collect(),
        excluded: excluded.into_iter().map(|(k, v)| (k, MeanStd::of(&v))).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alignment_examples() {
        let imp = ["II", "III", "aVF"];
        let score = alignment_score(&imp, &["II", "III", "aVF", "V2"], AlignmentMode::Agreement).unwrap();
        assert!((score - 17.0 / 18.0).abs() < 1e-12);
        assert_eq!(alignment_score(&imp, &imp, AlignmentMode::Agreement).unwrap(), 1.0);
        let none: [&str; 0] = [];
        let all: Vec<&str> = Lead::ALL.iter().map(|l| l.name()).collect();
        let marked: Vec<&str> = all.iter().copied().filter(|l| !imp.contains(l)).collect();
        assert_eq!(alignment_score(&imp, &marked, AlignmentMode::Agreement).unwrap(), 0.0);
        assert_eq!(alignment_score(&none, &none, AlignmentMode::MarkedOnly).unwrap(), 0.0);
        assert!(alignment_score(&["V7"], &none, AlignmentMode::Agreement).is_err());
    }

    #[test]
    fn vvs_bounds() {
        assert_eq!(vvs(&[5; 5]).unwrap(), 25);
        assert_eq!(vvs(&[0; 5]).unwrap(), 0);
        assert!(matches!(vvs(&[5, 5, 6, 0, 0]), Err(Error::ScoreRange(6))));
    }

    #[test]
    fn tiers_and_display() {
        assert_eq!("High".parse::<Tier>().unwrap(), Tier::Good);
        let m = MeanStd { count: 17, mean: 23.294, std: 1.0449 };
        assert_eq!(m.to_string(), "17, 23.29 ± 1.04");
    }
}

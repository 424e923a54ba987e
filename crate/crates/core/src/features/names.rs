//! The 194-slot feature registry and its name codec.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::lead::{Lead, N_LEADS};

pub const N_TEMPORAL: usize = 14;
pub const N_AMPLITUDE_KINDS: usize = 15;
pub const N_FEATURES: usize = N_TEMPORAL + N_LEADS * N_AMPLITUDE_KINDS;

/// Beat-level durations, shared by all leads.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TemporalKind {
    RrPrev,
    RrNext,
    RrRate,
    PrInt,
    PrSeg,
    Qrs,
    PWave,
    TWave,
    TLeft,
    Qt,
    Qtc,
    St,
    Pt,
    Ps,
}

impl TemporalKind {
    pub const ALL: [TemporalKind; N_TEMPORAL] = [
        Self::RrPrev,
        Self::RrNext,
        Self::RrRate,
        Self::PrInt,
        Self::PrSeg,
        Self::Qrs,
        Self::PWave,
        Self::TWave,
        Self::TLeft,
        Self::Qt,
        Self::Qtc,
        Self::St,
        Self::Pt,
        Self::Ps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::RrPrev => "RR_Prev",
            Self::RrNext => "RR_Next",
            Self::RrRate => "RR_Rate",
            Self::PrInt => "PR_int",
            Self::PrSeg => "PR_seg",
            Self::Qrs => "QRS",
            Self::PWave => "P_Wave",
            Self::TWave => "T_Wave",
            Self::TLeft => "T_left",
            Self::Qt => "QT",
            Self::Qtc => "QTc",
            Self::St => "ST",
            Self::Pt => "PT",
            Self::Ps => "PS",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The waves whose peak amplitude enters amplitude features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Wave {
    P,
    Q,
    R,
    S,
    T,
}

impl Wave {
    pub const ALL: [Wave; 5] = [Wave::P, Wave::Q, Wave::R, Wave::S, Wave::T];

    pub fn name(self) -> &'static str {
        match self {
            Wave::P => "P",
            Wave::Q => "Q",
            Wave::R => "R",
            Wave::S => "S",
            Wave::T => "T",
        }
    }
}

/// Per-lead amplitude quantities, all in mV.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum AmplitudeKind {
    R,
    P,
    Q,
    S,
    T,
    PQ,
    QR,
    RS,
    ST,
    PS,
    PT,
    QS,
    QT,
    StMean,
    StStd,
}

/// How an amplitude feature is drawn on a report.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AmplitudeShape {
    Peak(Wave),
    /// Difference `first - second` between two peak amplitudes.
    Pair(Wave, Wave),
    /// Statistic of the ST segment samples.
    Segment,
}

impl AmplitudeKind {
    pub const ALL: [AmplitudeKind; N_AMPLITUDE_KINDS] = [
        Self::R,
        Self::P,
        Self::Q,
        Self::S,
        Self::T,
        Self::PQ,
        Self::QR,
        Self::RS,
        Self::ST,
        Self::PS,
        Self::PT,
        Self::QS,
        Self::QT,
        Self::StMean,
        Self::StStd,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::R => "R",
            Self::P => "P",
            Self::Q => "Q",
            Self::S => "S",
            Self::T => "T",
            Self::PQ => "PQ",
            Self::QR => "QR",
            Self::RS => "RS",
            Self::ST => "ST",
            Self::PS => "PS",
            Self::PT => "PT",
            Self::QS => "QS",
            Self::QT => "QT",
            Self::StMean => "ST_mean",
            Self::StStd => "ST_std",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn shape(self) -> AmplitudeShape {
        use AmplitudeShape::*;
        use Wave::*;
        match self {
            Self::R => Peak(R),
            Self::P => Peak(P),
            Self::Q => Peak(Q),
            Self::S => Peak(S),
            Self::T => Peak(T),
            Self::PQ => Pair(P, Q),
            Self::QR => Pair(Q, R),
            Self::RS => Pair(R, S),
            Self::ST => Pair(S, T),
            Self::PS => Pair(P, S),
            Self::PT => Pair(P, T),
            Self::QS => Pair(Q, S),
            Self::QT => Pair(Q, T),
            Self::StMean | Self::StStd => Segment,
        }
    }
}

/// A decoded feature name: a temporal quantity or a lead-scoped amplitude.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FeatureName {
    Temporal(TemporalKind),
    Amplitude { lead: Lead, kind: AmplitudeKind },
}

impl FeatureName {
    /// Column position in the fixed order: temporal features, then each lead's 15
    /// amplitude features in lead order.
    pub fn index(self) -> usize {
        match self {
            FeatureName::Temporal(k) => k.index(),
            FeatureName::Amplitude { lead, kind } => N_TEMPORAL + lead.index() * N_AMPLITUDE_KINDS + kind.index(),
        }
    }

    pub fn from_index(i: usize) -> Option<Self> {
        if i < N_TEMPORAL {
            Some(FeatureName::Temporal(TemporalKind::ALL[i]))
        } else if i < N_FEATURES {
            let j = i - N_TEMPORAL;
            Some(FeatureName::Amplitude {
                lead: Lead::ALL[j / N_AMPLITUDE_KINDS],
                kind: AmplitudeKind::ALL[j % N_AMPLITUDE_KINDS],
            })
        } else {
            None
        }
    }

    pub fn encode(self) -> String {
        self.to_string()
    }

    pub fn decode(name: &str) -> Result<Self> {
        name.parse()
    }

    /// Only amplitude features can be drawn on a lead panel.
    pub fn is_renderable(self) -> bool {
        matches!(self, FeatureName::Amplitude { .. })
    }

    pub fn lead(self) -> Option<Lead> {
        match self {
            FeatureName::Amplitude { lead, .. } => Some(lead),
            FeatureName::Temporal(_) => None,
        }
    }
}

impl fmt::Display for FeatureName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FeatureName::Temporal(k) => f.write_str(k.name()),
            FeatureName::Amplitude { lead, kind } => write!(f, "{}_{}", lead.name(), kind.name()),
        }
    }
}

impl FromStr for FeatureName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if let Some(k) = TemporalKind::ALL.iter().find(|k| k.name() == s) {
            return Ok(FeatureName::Temporal(*k));
        }
        let unknown = || Error::UnknownFeature(s.to_string());
        let (lead, kind) = s.split_once('_').ok_or_else(unknown)?;
        let lead = Lead::ALL.iter().find(|l| l.name() == lead).ok_or_else(unknown)?;
        let kind = AmplitudeKind::ALL.iter().find(|k| k.name() == kind).ok_or_else(unknown)?;
        Ok(FeatureName::Amplitude { lead: *lead, kind: *kind })
    }
}

impl Serialize for FeatureName {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureName {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// All 194 features in column order.
pub fn registry() -> Vec<FeatureName> {
    (0..N_FEATURES).map(|i| FeatureName::from_index(i).expect("in range")).collect()
}

pub fn feature_names() -> Vec<String> {
    registry().into_iter().map(FeatureName::encode).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn registry_is_complete_and_unique() {
        let names = feature_names();
        assert_eq!(names.len(), 194);
        assert_eq!(names.iter().collect::<HashSet<_>>().len(), 194);
        assert_eq!(names[0], "RR_Prev");
        assert_eq!(names[14], "I_R");
        assert_eq!(names[193], "V6_ST_std");
    }

    #[test]
    fn codec_round_trip() {
        for (i, f) in registry().into_iter().enumerate() {
            assert_eq!(FeatureName::decode(&f.encode()).unwrap(), f);
            assert_eq!(f.index(), i);
        }
    }

    #[test]
    fn decode_examples() {
        assert_eq!(
            FeatureName::decode("V3_ST").unwrap(),
            FeatureName::Amplitude { lead: Lead::V3, kind: AmplitudeKind::ST }
        );
        assert_eq!(
            FeatureName::decode("aVF_ST_mean").unwrap(),
            FeatureName::Amplitude { lead: Lead::AVF, kind: AmplitudeKind::StMean }
        );
        assert_eq!(FeatureName::decode("II_R").unwrap().lead(), Some(Lead::II));
        let qtc = FeatureName::decode("QTc").unwrap();
        assert!(!qtc.is_renderable());
        assert_eq!(AmplitudeKind::ST.shape(), AmplitudeShape::Pair(Wave::S, Wave::T));
        for bad in ["V7_R", "II_X", "qtc", "", "II", "AVF_R"] {
            assert!(matches!(FeatureName::decode(bad), Err(Error::UnknownFeature(_))), "{bad}");
        }
    }
}

//! Plausible value ranges and robust scales per feature.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{median, percentile_sorted};

pub const MAD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureRange {
    pub name: String,
    /// 1st percentile.
    pub lo: f64,
    /// 99th percentile.
    pub hi: f64,
    /// Median absolute deviation, floored at [`MAD_FLOOR`].
    pub mad: f64,
}

impl FeatureRange {
    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    /// The range stretched to contain `v`.
    pub fn including(&self, v: f64) -> FeatureRange {
        FeatureRange { lo: self.lo.min(v), hi: self.hi.max(v), ..self.clone() }
    }
}

/// Ranges of every column of dense training rows.
pub fn derive_ranges(names: &[String], rows: &[Vec<f64>]) -> Result<Vec<FeatureRange>> {
    if rows.is_empty() {
        return Err(Error::InvalidParam("cannot derive ranges from an empty matrix".into()));
    }
    names
        .iter()
        .enumerate()
        .map(|(c, name)| {
            let mut col: Vec<f64> = rows.iter().map(|r| r[c]).collect();
            if col.iter().any(|v| !v.is_finite()) {
                return Err(Error::MissingFeatureData { what: "finite values", feature: name.clone() });
            }
            col.sort_by(f64::total_cmp);
            let med = median(&col).expect("non-empty");
            let dev: Vec<f64> = col.iter().map(|v| (v - med).abs()).collect();
            Ok(FeatureRange {
                name: name.clone(),
                lo: percentile_sorted(&col, 0.01).expect("non-empty"),
                hi: percentile_sorted(&col, 0.99).expect("non-empty"),
                mad: median(&dev).expect("non-empty").max(MAD_FLOOR),
            })
        })
        .collect()
}

/// Looks up ranges by name, in the order of `names`.
pub fn ranges_for(all: &[FeatureRange], names: &[String]) -> Result<Vec<FeatureRange>> {
    names
        .iter()
        .map(|n| {
            all.iter()
                .find(|r| &r.name == n)
                .cloned()
                .ok_or_else(|| Error::MissingFeatureData { what: "range", feature: n.clone() })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_range_and_mad() {
        let rows: Vec<Vec<f64>> = (1..=100).map(|i| vec![i as f64, 5.0, [-2.0, -1.0, 0.0, 1.0, 2.0][i % 5]]).collect();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let r = derive_ranges(&names, &rows).unwrap();
        assert!((r[0].lo - 1.99).abs() < 1e-12 && (r[0].hi - 99.01).abs() < 1e-12);
        assert_eq!(r[0].mad, 25.0);
        assert_eq!((r[1].lo, r[1].hi, r[1].mad), (5.0, 5.0, MAD_FLOOR));
        // |x - 0| over {-2,-1,0,1,2} repeated: median deviation 1
        assert_eq!(r[2].mad, 1.0);
        assert!(ranges_for(&r, &["z".to_string()]).is_err());
    }
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DEFAULT_CONFIG: &str = include_str!("../../data/delineation.toml");

/// Filter, detector and delineation parameters. Loaded from a key-value TOML file;
/// missing keys fall back to the bundled defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DelineationConfig {
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub median_window_ms: f64,
    pub integration_ms: f64,
    pub refractory_ms: f64,
    pub refine_ms: f64,
    pub q_window_ms: f64,
    pub s_window_ms: f64,
    pub qrs_bound_ms: f64,
    pub p_window_start_ms: f64,
    pub p_window_end_ms: f64,
    pub p_walk_ms: f64,
    pub t_window_start_ms: f64,
    pub t_window_end_ms: f64,
    pub t_rr_fraction: f64,
    pub t_walk_ms: f64,
    pub boundary_fraction: f64,
    pub min_wave_fraction: f64,
}

impl Default for DelineationConfig {
    fn default() -> Self {
        // Spelled out so that `serde(default)` on partial files cannot recurse.
        DelineationConfig {
            band_low_hz: 0.5,
            band_high_hz: 40.0,
            median_window_ms: 600.0,
            integration_ms: 150.0,
            refractory_ms: 200.0,
            refine_ms: 50.0,
            q_window_ms: 80.0,
            s_window_ms: 80.0,
            qrs_bound_ms: 120.0,
            p_window_start_ms: 300.0,
            p_window_end_ms: 100.0,
            p_walk_ms: 120.0,
            t_window_start_ms: 120.0,
            t_window_end_ms: 450.0,
            t_rr_fraction: 0.7,
            t_walk_ms: 250.0,
            boundary_fraction: 0.04394,
            min_wave_fraction: 0.02,
        }
    }
}

impl DelineationConfig {
    pub fn bundled() -> Self {
        Self::from_toml(DEFAULT_CONFIG).expect("bundled delineation config parses")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(format!("delineation: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("median_window_ms", self.median_window_ms),
            ("integration_ms", self.integration_ms),
            ("refractory_ms", self.refractory_ms),
            ("q_window_ms", self.q_window_ms),
            ("s_window_ms", self.s_window_ms),
            ("t_window_end_ms", self.t_window_end_ms),
            ("boundary_fraction", self.boundary_fraction),
        ];
        if let Some((k, v)) = positive.iter().find(|(_, v)| !(*v > 0.0)) {
            return Err(Error::Config(format!("{k} must be positive, got {v}")));
        }
        if !(self.band_low_hz > 0.0 && self.band_low_hz < self.band_high_hz) {
            return Err(Error::Config("need 0 < band_low_hz < band_high_hz".into()));
        }
        if self.p_window_end_ms >= self.p_window_start_ms || self.t_window_start_ms >= self.t_window_end_ms {
            return Err(Error::Config("search windows must have positive length".into()));
        }
        Ok(())
    }

    /// Milliseconds to a sample count at `fs`.
    pub(crate) fn samples(ms: f64, fs: f64) -> usize {
        (ms * fs / 1000.0).round().max(0.0) as usize
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_file_matches_defaults() {
        assert_eq!(DelineationConfig::bundled(), DelineationConfig::default());
        let partial = DelineationConfig::from_toml("q_window_ms = 60.0\n").unwrap();
        assert_eq!(partial.q_window_ms, 60.0);
        assert_eq!(partial.s_window_ms, 80.0);
        assert!(DelineationConfig::from_toml("bogus = 1\n").is_err());
        assert!(DelineationConfig::from_toml("refractory_ms = 0.0\n").is_err());
    }
}

//! Pipeline configuration: one TOML file with a section per stage.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use vcce_core::cf::SearchParams;
use vcce_core::eval::{AlignmentMode, DeviationMode};
use vcce_core::model::TrainParams;
use vcce_core::signal::DelineationConfig;
use vcce_core::vcce::ReportLayout;

use crate::Precondition;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    /// Root that manifest record paths are relative to.
    pub records: Option<PathBuf>,
    /// PTB-XL style database CSV.
    pub manifest: Option<PathBuf>,
    pub workdir: Option<PathBuf>,
    /// Inclusion rules; the bundled rules when absent.
    pub filter_rules: Option<PathBuf>,
    /// Clinical feature weights; the bundled table when absent.
    pub clinical_weights: Option<PathBuf>,
    /// Clinician assessments of rendered reports, if collected.
    pub clinician_labels: Option<PathBuf>,
    /// Sampling rate for CSV records without a sidecar.
    pub csv_fs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CohortConfig {
    pub test_fraction: f64,
}

impl Default for CohortConfig {
    fn default() -> Self {
        CohortConfig { test_fraction: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RankConfig {
    /// Features left unranked (rank 1) when elimination stops.
    pub keep: usize,
    pub step: usize,
    /// Overrides `train.n_trees` during elimination rounds.
    pub n_trees: Option<usize>,
}

impl Default for RankConfig {
    fn default() -> Self {
        RankConfig { keep: 97, step: 1, n_trees: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CurveConfig {
    /// Largest feature count on the curve; all ranked survivors when absent.
    pub max_k: Option<usize>,
    pub stride: usize,
    /// F1 slack for the smallest near-best feature count.
    pub tolerance: f64,
    /// Sizes of the top-N models kept for explanation.
    pub feature_sets: Vec<usize>,
    /// Top-N size that the clinician features are appended to for the report model.
    pub vcce_size: usize,
    pub clinician_features: Vec<String>,
}

impl Default for CurveConfig {
    fn default() -> Self {
        CurveConfig {
            max_k: None,
            stride: 1,
            tolerance: 0.02,
            feature_sets: vec![5, 10, 15, 20],
            vcce_size: 20,
            clinician_features: ["V2_T", "V3_T", "V4_T", "V6_T"].map(String::from).to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExplainConfig {
    pub k: usize,
    /// Beats explained per feature set, sampled from the correctly classified test beats.
    pub max_queries: usize,
    pub search: SearchParams,
}

impl Default for ExplainConfig {
    fn default() -> Self {
        ExplainConfig { k: 3, max_queries: 200, search: SearchParams::default() }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateConfig {
    pub alignment_mode: AlignmentMode,
    pub deviation_mode: DeviationMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads per stage; 0 uses one per core.
    pub workers: usize,
    pub paths: Paths,
    pub cohort: CohortConfig,
    pub delineation: DelineationConfig,
    pub train: TrainParams,
    pub rank: RankConfig,
    pub curve: CurveConfig,
    pub explain: ExplainConfig,
    pub render: ReportLayout,
    pub evaluate: EvaluateConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 42,
            workers: 0,
            paths: Paths::default(),
            cohort: CohortConfig::default(),
            delineation: DelineationConfig::default(),
            train: TrainParams::default(),
            rank: RankConfig::default(),
            curve: CurveConfig::default(),
            explain: ExplainConfig::default(),
            render: ReportLayout::default(),
            evaluate: EvaluateConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Precondition(format!("config {}: {e}", path.display())))?;
        Self::from_toml(&text).with_context(|| format!("config {}", path.display()))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| Precondition(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dump(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |e: vcce_core::Error| Precondition(e.to_string());
        self.delineation.validate().map_err(bad)?;
        self.train.validate().map_err(bad)?;
        self.render.validate().map_err(bad)?;
        if !(0.0..1.0).contains(&self.cohort.test_fraction) {
            return Err(Precondition(format!("cohort.test_fraction {} not in [0, 1)", self.cohort.test_fraction)).into());
        }
        if self.rank.keep == 0 || self.rank.step == 0 || self.curve.stride == 0 || self.explain.k == 0 {
            return Err(Precondition("rank.keep, rank.step, curve.stride and explain.k must be positive".into()).into());
        }
        Ok(())
    }

    /// Training parameters driven by the run seed.
    pub fn train_params(&self) -> TrainParams {
        TrainParams { seed: self.seed, ..self.train.clone() }
    }

    pub fn rank_params(&self) -> TrainParams {
        let mut p = self.train_params();
        if let Some(n) = self.rank.n_trees {
            p.n_trees = n;
        }
        p
    }

    pub fn search_params(&self) -> SearchParams {
        SearchParams { seed: self.seed.wrapping_add(self.explain.search.seed), ..self.explain.search.clone() }
    }
}

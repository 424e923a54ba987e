//! The nine pipeline stages, their preconditions and the resumable runner.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{anyhow, Context, Result};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use vcce_core::cf::{
    alteration_stats, derive_ranges, filter_correct, generate, ranges_for, CounterfactualQuery, CounterfactualSet, FeatureRange,
};
use vcce_core::ecg_io::{
    balanced_split, filter_cohort, load_record_csv, load_wfdb_record, Class, CohortManifest, FilterRules, Label, SplitSide,
};
use vcce_core::eval::{
    aggregate_interpretability, alignment_score, compare_sparsity, mcnemar, prf1, read_clinician_labels, roc_auc, ClinicalWeights,
    Confusion,
};
use vcce_core::features::{build_feature_matrix, FeatureMatrix, FeatureSidecar};
use vcce_core::model::{incremental_curve, rank_order, rfe_rank, tolerance_minimal_k, train, GbdtModel, RankedFeature};
use vcce_core::signal::{denoise, segment_record, Segmentation};
use vcce_core::vcce::{build_markings, prepare_data, render_report, Marking};
use vcce_core::{Error as CoreError, Record};

use crate::artifacts::{
    hash_files, read_json, read_jsonl, sha256_bytes, write_atomic, write_csv, write_json, write_jsonl, RunManifest, StageEntry,
};
use crate::config::PipelineConfig;
use crate::Precondition;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Stage {
    Ingest,
    Segment,
    Features,
    Train,
    Rank,
    Curve,
    Explain,
    Render,
    Evaluate,
}

impl Stage {
    pub const ALL: [Stage; 9] = [
        Stage::Ingest,
        Stage::Segment,
        Stage::Features,
        Stage::Train,
        Stage::Rank,
        Stage::Curve,
        Stage::Explain,
        Stage::Render,
        Stage::Evaluate,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Segment => "segment",
            Stage::Features => "features",
            Stage::Train => "train",
            Stage::Rank => "rank",
            Stage::Curve => "curve",
            Stage::Explain => "explain",
            Stage::Render => "render",
            Stage::Evaluate => "evaluate",
        }
    }

    /// File whose presence marks the stage as done.
    pub fn marker(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest/cohort.jsonl",
            Stage::Segment => "segment/beats.jsonl",
            Stage::Features => "features/matrix.csv",
            Stage::Train => "train/model.json",
            Stage::Rank => "rank/ranking.csv",
            Stage::Curve => "curve/sets.json",
            Stage::Explain => "explain/summary.csv",
            Stage::Render => "render/markings.jsonl",
            Stage::Evaluate => "evaluate/metrics.json",
        }
    }

    fn requires(self) -> &'static [Stage] {
        use Stage::*;
        match self {
            Ingest => &[],
            Segment => &[Ingest],
            Features => &[Ingest, Segment],
            Train | Rank => &[Ingest, Features],
            Curve => &[Ingest, Features, Rank],
            Explain => &[Ingest, Features, Train, Rank, Curve],
            Render => &[Ingest, Segment, Features, Explain],
            Evaluate => &[Ingest, Features, Train, Curve, Explain, Render],
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL.into_iter().find(|st| st.name() == s).ok_or_else(|| anyhow!("unknown stage {s:?}"))
    }
}

pub struct Ctx {
    pub cfg: PipelineConfig,
    pub workdir: PathBuf,
}

impl Ctx {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.workdir.join(rel)
    }

    fn require(&self, stage: Stage) -> Result<()> {
        for &dep in stage.requires() {
            if !self.path(dep.marker()).exists() {
                return Err(Precondition(format!("{stage} needs {}: run {dep} first", dep.marker())).into());
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outcome {
    Ran,
    Skipped,
}

/// Runs one stage unless its recorded config hash, input hashes and output hashes all
/// still match.
pub fn run_stage(stage: Stage, ctx: &Ctx) -> Result<Outcome> {
    ctx.require(stage)?;
    let inputs = stage_inputs(stage, ctx)?;
    let config_hash = sha256_bytes(serde_json::to_string(&config_fragment(stage, &ctx.cfg))?.as_bytes());
    let input_hashes = hash_files(&ctx.workdir, &inputs)?;
    let mut manifest = RunManifest::load(&ctx.workdir)?;
    if let Some(prev) = manifest.stages.get(stage.name()) {
        if prev.config_hash == config_hash && prev.inputs == input_hashes && outputs_intact(ctx, prev) {
            log::info!("{stage}: up to date, skipped");
            return Ok(Outcome::Skipped);
        }
    }
    let started = Instant::now();
    let mut outputs = match stage {
        Stage::Ingest => ingest(ctx)?,
        Stage::Segment => segment(ctx)?,
        Stage::Features => features(ctx)?,
        Stage::Train => train_stage(ctx)?,
        Stage::Rank => rank(ctx)?,
        Stage::Curve => curve(ctx)?,
        Stage::Explain => explain(ctx)?,
        Stage::Render => render(ctx)?,
        Stage::Evaluate => evaluate(ctx)?,
    };
    outputs.sort();
    log::info!("{stage}: done in {:.2?}", started.elapsed());
    let entry = StageEntry { config_hash, inputs: input_hashes, outputs: hash_files(&ctx.workdir, &outputs)? };
    manifest.stages.insert(stage.name().to_string(), entry);
    manifest.save(&ctx.workdir)?;
    Ok(Outcome::Ran)
}

fn outputs_intact(ctx: &Ctx, entry: &StageEntry) -> bool {
    entry.outputs.iter().all(|(rel, hash)| {
        crate::artifacts::sha256_file(&ctx.workdir.join(rel)).map(|h| &h == hash).unwrap_or(false)
    })
}

fn config_fragment(stage: Stage, cfg: &PipelineConfig) -> serde_json::Value {
    match stage {
        Stage::Ingest => json!({"seed": cfg.seed, "cohort": cfg.cohort, "records": cfg.paths.records}),
        Stage::Segment | Stage::Features => json!({"delineation": cfg.delineation, "csv_fs": cfg.paths.csv_fs}),
        Stage::Train => json!({"train": cfg.train_params()}),
        Stage::Rank => json!({"train": cfg.rank_params(), "rank": cfg.rank}),
        Stage::Curve => json!({"train": cfg.train_params(), "curve": cfg.curve}),
        Stage::Explain => json!({"explain": cfg.explain, "search": cfg.search_params(), "seed": cfg.seed}),
        Stage::Render => json!({"render": cfg.render, "delineation": cfg.delineation, "csv_fs": cfg.paths.csv_fs}),
        Stage::Evaluate => json!({"evaluate": cfg.evaluate}),
    }
}

fn existing(paths: impl IntoIterator<Item = PathBuf>) -> Vec<PathBuf> {
    paths.into_iter().filter(|p| p.is_file()).collect()
}

fn files_in(dir: &Path, ext: &str) -> Result<Vec<PathBuf>> {
    if !dir.is_dir() {
        return Ok(Vec::new());
    }
    let mut out: Vec<PathBuf> = fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.is_file() && p.extension().is_some_and(|e| e == ext))
        .collect();
    out.sort();
    Ok(out)
}

fn stage_inputs(stage: Stage, ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let p = |rel: &str| ctx.path(rel);
    let mut v = match stage {
        Stage::Ingest => {
            let mut v = vec![manifest_path(&ctx.cfg)?];
            v.extend(ctx.cfg.paths.filter_rules.clone());
            v
        }
        Stage::Segment => {
            let mut v = vec![p("ingest/cohort.jsonl"), p("ingest/source.json")];
            v.extend(record_files(ctx)?);
            v
        }
        Stage::Features => {
            let mut v = vec![p("ingest/cohort.jsonl"), p("segment/beats.jsonl")];
            v.extend(record_files(ctx)?);
            v
        }
        Stage::Train | Stage::Rank => vec![p("ingest/cohort.jsonl"), p("features/matrix.csv"), p("features/features.json")],
        Stage::Curve => {
            let mut v = vec![p("ingest/cohort.jsonl"), p("features/matrix.csv"), p("features/features.json"), p("rank/ranking.csv")];
            v.extend(ctx.cfg.paths.clinical_weights.clone());
            v
        }
        Stage::Explain => {
            let mut v = vec![p("ingest/cohort.jsonl"), p("features/matrix.csv"), p("features/features.json"), p("curve/sets.json")];
            v.extend(files_in(&p("curve/models"), "json")?);
            v
        }
        Stage::Render => {
            let mut v = vec![p("ingest/cohort.jsonl"), p("segment/beats.jsonl"), p("features/matrix.csv"), p("explain/vcce.jsonl")];
            v.extend(record_files(ctx)?);
            v
        }
        Stage::Evaluate => {
            let mut v = vec![
                p("ingest/cohort.jsonl"),
                p("features/matrix.csv"),
                p("features/features.json"),
                p("train/model.json"),
                p("curve/sets.json"),
                p("curve/summary.json"),
                p("explain/ranges.json"),
                p("render/markings.jsonl"),
            ];
            v.extend(files_in(&p("curve/models"), "json")?);
            v.extend(files_in(&p("explain"), "jsonl")?);
            v.extend(ctx.cfg.paths.clinical_weights.clone());
            v.extend(ctx.cfg.paths.clinician_labels.clone());
            v
        }
    };
    for f in &v {
        if !f.is_file() {
            return Err(Precondition(format!("{stage}: missing input {}", f.display())).into());
        }
    }
    v.dedup();
    Ok(v)
}

// ---------------------------------------------------------------- shared data

/// One cohort record as written by `ingest`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CohortLine {
    pub record_id: String,
    pub patient_id: String,
    pub split: SplitSide,
    pub label: Label,
    pub record_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct Source {
    records: PathBuf,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct SegmentLine {
    record_id: String,
    segmentation: Segmentation,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
struct RecordMarkings {
    record_id: String,
    markings: Vec<Marking>,
}

fn manifest_path(cfg: &PipelineConfig) -> Result<PathBuf> {
    let p = cfg.paths.manifest.clone().ok_or_else(|| Precondition("no cohort manifest given (paths.manifest or --manifest)".into()))?;
    if !p.is_file() {
        return Err(Precondition(format!("cohort manifest {} not found", p.display())).into());
    }
    Ok(p)
}

fn read_cohort(ctx: &Ctx) -> Result<Vec<CohortLine>> {
    read_jsonl(&ctx.path("ingest/cohort.jsonl"))
}

fn record_base(ctx: &Ctx, line: &CohortLine) -> Result<PathBuf> {
    let src: Source = read_json(&ctx.path("ingest/source.json"))?;
    Ok(src.records.join(&line.record_path))
}

fn record_files(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let src: Source = read_json(&ctx.path("ingest/source.json"))?;
    let mut out = Vec::new();
    for line in read_cohort(ctx)? {
        let base = src.records.join(&line.record_path);
        let with = |ext: &str| {
            let mut s = base.as_os_str().to_owned();
            s.push(ext);
            PathBuf::from(s)
        };
        out.extend(existing([base.clone(), with(".hea"), with(".dat"), with(".json")]));
    }
    Ok(out)
}

fn is_csv(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv"))
}

/// Loads and denoises one cohort record, naming it by its cohort id.
fn load_prepared(ctx: &Ctx, line: &CohortLine) -> Result<Record> {
    let base = record_base(ctx, line)?;
    let raw: Record = if is_csv(&base) { load_record_csv(&base, ctx.cfg.paths.csv_fs)? } else { load_wfdb_record(&base)? };
    let mut rec = denoise(&raw, &ctx.cfg.delineation)?;
    rec.header.record_name = line.record_id.clone();
    Ok(rec.with_label(line.label.clone()).with_patient(line.patient_id.clone()))
}

fn read_segmentations(ctx: &Ctx) -> Result<BTreeMap<String, Segmentation>> {
    Ok(read_jsonl::<SegmentLine>(&ctx.path("segment/beats.jsonl"))?.into_iter().map(|s| (s.record_id, s.segmentation)).collect())
}

/// The feature matrix with imputed values and the train/test partition of its rows.
pub struct Dataset {
    pub matrix: FeatureMatrix,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Class>,
    pub means: Vec<f64>,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

impl Dataset {
    pub fn load(ctx: &Ctx) -> Result<Self> {
        let sidecar = FeatureSidecar::read(&ctx.path("features/features.json"))?;
        let matrix = FeatureMatrix::read_csv(&ctx.path("features/matrix.csv"), sidecar.fs)?;
        let means = sidecar.imputation_means.ok_or_else(|| anyhow!("features.json lacks imputation means"))?;
        let x = matrix.imputed(&means)?;
        let y = matrix.labels()?;
        let split: BTreeMap<String, SplitSide> = read_cohort(ctx)?.into_iter().map(|l| (l.record_id, l.split)).collect();
        let (mut train_rows, mut test_rows) = (Vec::new(), Vec::new());
        for (i, p) in matrix.provenance.iter().enumerate() {
            match split.get(&p.record_id) {
                Some(SplitSide::Train) => train_rows.push(i),
                Some(SplitSide::Test) => test_rows.push(i),
                None => return Err(anyhow!("matrix row {i} from record {} is not in the cohort", p.record_id)),
            }
        }
        Ok(Dataset { matrix, x, y, means, train_rows, test_rows })
    }

    pub fn columns(&self, names: &[String]) -> Result<Vec<usize>> {
        names.iter().map(|n| Ok(self.matrix.column_index(n)?)).collect()
    }

    pub fn pick(&self, rows: &[usize], cols: &[usize]) -> Vec<Vec<f64>> {
        rows.iter().map(|&r| cols.iter().map(|&c| self.x[r][c]).collect()).collect()
    }

    pub fn labels(&self, rows: &[usize]) -> Vec<Class> {
        rows.iter().map(|&r| self.y[r]).collect()
    }

    /// Trains on the training rows restricted to `names`.
    pub fn fit(&self, names: &[String], params: &vcce_core::model::TrainParams) -> Result<GbdtModel> {
        let cols = self.columns(names)?;
        let mut model = train(&self.pick(&self.train_rows, &cols), &self.labels(&self.train_rows), names, params)?;
        model.imputation_means = cols.iter().map(|&c| self.means[c]).collect();
        Ok(model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scores {
    pub model: String,
    pub n_features: usize,
    pub n_beats: usize,
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub auc: Option<f64>,
}

/// Held-out scores of `model` plus its per-row predictions.
fn score(ds: &Dataset, name: &str, model: &GbdtModel, rows: &[usize]) -> Result<(Scores, Vec<Class>)> {
    let cols = ds.columns(&model.feature_names)?;
    let x = ds.pick(rows, &cols);
    let truth = ds.labels(rows);
    let proba = x.iter().map(|r| model.predict_proba(r)).collect::<vcce_core::Result<Vec<f64>>>()?;
    let pred: Vec<Class> = proba.iter().map(|&p| if p >= 0.5 { Class::Mi } else { Class::Norm }).collect();
    let cm = Confusion::from_pairs(&truth, &pred);
    let m = prf1(cm.tp, cm.fp, cm.fn_);
    let s = Scores {
        model: name.to_string(),
        n_features: model.n_features(),
        n_beats: rows.len(),
        accuracy: cm.accuracy(),
        precision: m.precision,
        recall: m.recall,
        f1: m.f1,
        auc: roc_auc(&proba, &truth),
    };
    Ok((s, pred))
}

fn write_model(path: &Path, model: &GbdtModel) -> Result<()> {
    let mut text = model.to_json()?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn read_model(path: &Path) -> Result<GbdtModel> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(GbdtModel::from_json(&text)?)
}

fn clinical_weights(cfg: &PipelineConfig) -> Result<ClinicalWeights> {
    match &cfg.paths.clinical_weights {
        Some(p) => Ok(ClinicalWeights::from_toml(&fs::read_to_string(p)?)?),
        None => Ok(ClinicalWeights::bundled()),
    }
}

// ---------------------------------------------------------------- stages

#[derive(Serialize)]
struct CohortCount {
    split: SplitSide,
    class: Class,
    patients: usize,
    records: usize,
}

fn ingest(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let records = ctx.cfg.paths.records.clone().ok_or_else(|| Precondition("no records directory given (paths.records or --records)".into()))?;
    if !records.is_dir() {
        return Err(Precondition(format!("records directory {} not found", records.display())).into());
    }
    let manifest = CohortManifest::from_csv(fs::File::open(manifest_path(&ctx.cfg)?)?)?;
    let rules = match &ctx.cfg.paths.filter_rules {
        Some(p) => FilterRules::from_toml(&fs::read_to_string(p)?)?,
        None => FilterRules::default(),
    };
    let cohort = filter_cohort(&manifest, &rules)?;
    let split = balanced_split(&cohort, ctx.cfg.seed, ctx.cfg.cohort.test_fraction)?;
    let mut lines = Vec::new();
    for (side, entries) in [(SplitSide::Train, &split.train), (SplitSide::Test, &split.test)] {
        for e in entries {
            lines.push(CohortLine {
                record_id: e.record_id.clone(),
                patient_id: e.patient_id.clone(),
                split: side,
                label: e.label.clone(),
                record_path: e.record_path.clone().unwrap_or_else(|| e.record_id.clone()),
            });
        }
    }
    let mut counts = Vec::new();
    for side in [SplitSide::Train, SplitSide::Test] {
        for class in [Class::Norm, Class::Mi] {
            let sel: Vec<&CohortLine> = lines.iter().filter(|l| l.split == side && l.label.class == class).collect();
            let patients: BTreeSet<&str> = sel.iter().map(|l| l.patient_id.as_str()).collect();
            counts.push(CohortCount { split: side, class, patients: patients.len(), records: sel.len() });
        }
    }
    log::info!("ingest: {} of {} manifest rows kept, {} after balancing", cohort.entries.len(), manifest.rows.len(), lines.len());
    let out = [ctx.path("ingest/cohort.jsonl"), ctx.path("ingest/counts.csv"), ctx.path("ingest/source.json")];
    write_jsonl(&out[0], &lines)?;
    write_csv(&out[1], &counts)?;
    write_json(&out[2], &Source { records })?;
    Ok(out.to_vec())
}

#[derive(Serialize)]
struct FiducialRow<'a> {
    record_id: &'a str,
    beat: usize,
    r_peak: usize,
    lead: vcce_core::Lead,
    #[serde(flatten)]
    fiducials: &'a vcce_core::signal::LeadFiducials,
}

#[derive(Serialize)]
struct Skipped {
    record_id: String,
    reason: String,
}

fn segment(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cohort = read_cohort(ctx)?;
    let results: Vec<Result<std::result::Result<SegmentLine, Skipped>>> = cohort
        .par_iter()
        .map(|line| {
            let rec = match load_prepared(ctx, line) {
                Ok(r) => r,
                Err(e) => return Ok(Err(Skipped { record_id: line.record_id.clone(), reason: format!("{e:#}") })),
            };
            Ok(match segment_record(&rec, &ctx.cfg.delineation) {
                Ok(s) => Ok(SegmentLine { record_id: line.record_id.clone(), segmentation: s }),
                Err(e) => Err(Skipped { record_id: line.record_id.clone(), reason: e.to_string() }),
            })
        })
        .collect();
    let mut segs = Vec::new();
    let mut skipped = Vec::new();
    for r in results {
        match r? {
            Ok(s) => segs.push(s),
            Err(s) => {
                log::warn!("segment: skipping {}: {}", s.record_id, s.reason);
                skipped.push(s);
            }
        }
    }
    if segs.is_empty() {
        return Err(anyhow!("no record could be segmented"));
    }
    let mut fid = Vec::new();
    for s in &segs {
        for w in &s.segmentation.windows {
            let beat = &s.segmentation.fiducials.beats[w.peak];
            for (lead, f) in vcce_core::Lead::ALL.iter().zip(&beat.leads) {
                fid.push(FiducialRow { record_id: &s.record_id, beat: w.beat_index, r_peak: w.r_peak_global, lead: *lead, fiducials: f });
            }
        }
    }
    let out = [ctx.path("segment/beats.jsonl"), ctx.path("segment/fiducials.jsonl"), ctx.path("segment/skipped.csv")];
    write_jsonl(&out[0], &segs)?;
    write_jsonl(&out[1], &fid)?;
    if skipped.is_empty() {
        write_atomic(&out[2], b"record_id,reason\n")?;
    } else {
        write_csv(&out[2], &skipped)?;
    }
    Ok(out.to_vec())
}

fn features(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cohort = read_cohort(ctx)?;
    let segs = read_segmentations(ctx)?;
    let kept: Vec<&CohortLine> = cohort.iter().filter(|l| segs.contains_key(&l.record_id)).collect();
    let records = kept.par_iter().map(|l| load_prepared(ctx, l)).collect::<Result<Vec<Record>>>()?;
    let pairs: Vec<(&Record, &Segmentation)> = records.iter().zip(&kept).map(|(r, l)| (r, &segs[&l.record_id])).collect();
    let matrix = build_feature_matrix(&pairs);
    if matrix.n_rows() == 0 {
        return Err(anyhow!("no beats retained"));
    }
    let train: BTreeSet<&str> = kept.iter().filter(|l| l.split == SplitSide::Train).map(|l| l.record_id.as_str()).collect();
    let train_rows: Vec<usize> =
        matrix.provenance.iter().enumerate().filter(|(_, p)| train.contains(p.record_id.as_str())).map(|(i, _)| i).collect();
    let sidecar = FeatureSidecar { columns: matrix.names.clone(), imputation_means: Some(matrix.imputation_means(&train_rows)), fs: matrix.fs };
    let out = [ctx.path("features/matrix.csv"), ctx.path("features/features.json")];
    write_via(&out[0], |tmp| Ok(matrix.write_csv(tmp)?))?;
    write_json(&out[1], &sidecar)?;
    Ok(out.to_vec())
}

/// Lets a library writer target a temp path that is then renamed into place.
fn write_via(path: &Path, f: impl FnOnce(&Path) -> Result<()>) -> Result<()> {
    if let Some(d) = path.parent() {
        fs::create_dir_all(d)?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    f(&tmp)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

#[derive(Serialize)]
struct Importance<'a> {
    feature: &'a str,
    gain: f64,
}

fn train_stage(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let ds = Dataset::load(ctx)?;
    let model = ds.fit(&ds.matrix.names, &ctx.cfg.train_params())?;
    let (train_scores, _) = score(&ds, "train", &model, &ds.train_rows)?;
    let (test_scores, _) = score(&ds, "test", &model, &ds.test_rows)?;
    log::info!("train: held-out F1 {:.4} over {} beats", test_scores.f1, test_scores.n_beats);
    let imp = model.gain_importance();
    let importance: Vec<Importance> = model.feature_names.iter().zip(&imp).map(|(f, &g)| Importance { feature: f, gain: g }).collect();
    let out = [ctx.path("train/model.json"), ctx.path("train/report.csv"), ctx.path("train/importance.csv")];
    write_model(&out[0], &model)?;
    write_csv(&out[1], &[train_scores, test_scores])?;
    write_csv(&out[2], &importance)?;
    Ok(out.to_vec())
}

fn rank(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let ds = Dataset::load(ctx)?;
    let names = &ds.matrix.names;
    if ctx.cfg.rank.keep >= names.len() {
        return Err(Precondition(format!("rank.keep ({}) must be below the feature count ({})", ctx.cfg.rank.keep, names.len())).into());
    }
    let all: Vec<usize> = (0..names.len()).collect();
    let ranking = rfe_rank(
        &ds.pick(&ds.train_rows, &all),
        &ds.labels(&ds.train_rows),
        names,
        &ctx.cfg.rank_params(),
        ctx.cfg.rank.keep,
        ctx.cfg.rank.step,
    )?;
    let out = ctx.path("rank/ranking.csv");
    write_csv(&out, &ranking)?;
    Ok(vec![out])
}

fn read_ranking(ctx: &Ctx) -> Result<Vec<RankedFeature>> {
    let mut r = csv::Reader::from_path(ctx.path("rank/ranking.csv"))?;
    Ok(r.deserialize().collect::<std::result::Result<Vec<RankedFeature>, _>>()?)
}

/// Named feature sets explained downstream: the top-N sets, the report set (top N plus
/// the clinician features) and the clinically weighted set.
pub fn feature_sets(ctx: &Ctx, ordered: &[String]) -> Result<BTreeMap<String, Vec<String>>> {
    let cfg = &ctx.cfg.curve;
    let mut sets = BTreeMap::new();
    for &n in &cfg.feature_sets {
        if n == 0 || n > ordered.len() {
            return Err(Precondition(format!("feature set size {n} outside 1..={}", ordered.len())).into());
        }
        sets.insert(format!("top{n}"), ordered[..n].to_vec());
    }
    let mut vcce: Vec<String> = ordered[..cfg.vcce_size.min(ordered.len())].to_vec();
    for f in &cfg.clinician_features {
        if !vcce.contains(f) {
            vcce.push(f.clone());
        }
    }
    sets.insert("vcce".into(), vcce);
    let clinical: Vec<String> = clinical_weights(&ctx.cfg)?.feature.iter().map(|f| f.name.clone()).collect();
    sets.insert("clinical".into(), clinical);
    Ok(sets)
}

#[derive(Serialize, Deserialize)]
struct CurveSummary {
    tolerance: f64,
    minimal_k: Option<usize>,
    best_k: Option<usize>,
    best_f1: Option<f64>,
}

fn curve(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let ds = Dataset::load(ctx)?;
    let ranking = read_ranking(ctx)?;
    let ordered = rank_order(&ranking);
    let survivors = ranking.iter().filter(|r| r.rank == 1).count();
    let max_k = ctx.cfg.curve.max_k.unwrap_or(survivors).min(ordered.len());
    let mut ks: BTreeSet<usize> = (1..=max_k).step_by(ctx.cfg.curve.stride).collect();
    ks.insert(max_k);
    ks.extend(ctx.cfg.curve.feature_sets.iter().copied().filter(|&n| n >= 1 && n <= max_k));
    let ks: Vec<usize> = ks.into_iter().collect();
    let params = ctx.cfg.train_params();
    let points = incremental_curve(&ds.x, &ds.y, &ds.matrix.names, &ordered, &ks, &ds.train_rows, &ds.test_rows, &params)?;
    let best = points.iter().max_by(|a, b| a.f1.total_cmp(&b.f1).then(b.k.cmp(&a.k)));
    let summary = CurveSummary {
        tolerance: ctx.cfg.curve.tolerance,
        minimal_k: tolerance_minimal_k(&points, ctx.cfg.curve.tolerance),
        best_k: best.map(|p| p.k),
        best_f1: best.map(|p| p.f1),
    };
    let sets = feature_sets(ctx, &ordered)?;
    let models: Vec<(String, GbdtModel)> =
        sets.par_iter().map(|(name, names)| Ok((name.clone(), ds.fit(names, &params)?))).collect::<Result<_>>()?;
    let mut out = vec![ctx.path("curve/curve.csv"), ctx.path("curve/summary.json"), ctx.path("curve/sets.json")];
    write_csv(&out[0], &points)?;
    write_json(&out[1], &summary)?;
    write_json(&out[2], &sets)?;
    let model_dir = ctx.path("curve/models");
    for stale in files_in(&model_dir, "json")? {
        fs::remove_file(stale)?;
    }
    for (name, model) in &models {
        let p = model_dir.join(format!("{name}.json"));
        write_model(&p, model)?;
        out.push(p);
    }
    Ok(out)
}

fn read_sets(ctx: &Ctx) -> Result<BTreeMap<String, Vec<String>>> {
    read_json(&ctx.path("curve/sets.json"))
}

#[derive(Serialize, Deserialize)]
struct ExplainSummary {
    set: String,
    n_features: usize,
    correct: String,
    queries: usize,
    explained: usize,
    failed: usize,
    counterfactuals: usize,
    top_altered: String,
}

#[derive(Serialize)]
struct AlterationRow<'a> {
    feature: &'a str,
    count: usize,
}

fn explain(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let ds = Dataset::load(ctx)?;
    let train_x = ds.pick(&ds.train_rows, &(0..ds.matrix.n_cols()).collect::<Vec<_>>());
    let ranges = derive_ranges(&ds.matrix.names, &train_x)?;
    let sets = read_sets(ctx)?;
    let params = ctx.cfg.search_params();
    let mut out = vec![ctx.path("explain/ranges.json"), ctx.path("explain/summary.csv")];
    write_json(&out[0], &ranges)?;
    for stale in files_in(&ctx.path("explain"), "jsonl")?.into_iter().chain(files_in(&ctx.path("explain"), "csv")?) {
        if !out.contains(&stale) {
            fs::remove_file(stale)?;
        }
    }
    let mut summary = Vec::new();
    for (set_name, names) in &sets {
        let model = read_model(&ctx.path(&format!("curve/models/{set_name}.json")))?;
        let cols = ds.columns(names)?;
        let test_x = ds.pick(&ds.test_rows, &cols);
        let (correct_idx, correct) = filter_correct(&model, &test_x, &ds.labels(&ds.test_rows))?;
        let mut chosen = correct_idx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(ctx.cfg.seed ^ u64::from_le_bytes(sha_prefix(set_name)));
        chosen.shuffle(&mut rng);
        chosen.truncate(ctx.cfg.explain.max_queries);
        chosen.sort_unstable();
        let set_ranges = ranges_for(&ranges, names)?;
        let results: Vec<Result<Option<CounterfactualSet>>> = chosen
            .par_iter()
            .map(|&i| {
                let row = ds.test_rows[i];
                let prov = &ds.matrix.provenance[row];
                let target = ds.y[row].opposite();
                let query = CounterfactualQuery::new(names.clone(), test_x[i].clone(), target, ctx.cfg.explain.k, set_ranges.clone());
                let p = vcce_core::cf::SearchParams { seed: params.seed.wrapping_add(row as u64), ..params.clone() };
                let started = Instant::now();
                let res = generate(&model, &query, &p);
                log::debug!("explain {set_name}: record {} beat {} in {:.2?}", prov.record_id, prov.beat_index, started.elapsed());
                match res {
                    Ok(cfs) => Ok(Some(CounterfactualSet {
                        record_id: prov.record_id.clone(),
                        beat_index: prov.beat_index,
                        feature_names: names.clone(),
                        original: query.original.clone(),
                        target,
                        counterfactuals: cfs,
                    })),
                    Err(e @ (CoreError::NoValidCounterfactual { .. } | CoreError::AlreadyTarget)) => {
                        log::warn!("explain {set_name}: record {} beat {}: {e}", prov.record_id, prov.beat_index);
                        Ok(None)
                    }
                    Err(e) => Err(e.into()),
                }
            })
            .collect();
        let mut cf_sets = Vec::new();
        for r in results {
            cf_sets.extend(r?);
        }
        let stats = alteration_stats(&cf_sets, Some(correct));
        summary.push(ExplainSummary {
            set: set_name.clone(),
            n_features: names.len(),
            correct: correct.to_string(),
            queries: chosen.len(),
            explained: cf_sets.len(),
            failed: chosen.len() - cf_sets.len(),
            counterfactuals: stats.n_counterfactuals,
            top_altered: stats.top(3).join("; "),
        });
        let alterations: Vec<AlterationRow> = stats.counts.iter().map(|(f, c)| AlterationRow { feature: f, count: *c }).collect();
        let sets_path = ctx.path(&format!("explain/{set_name}.jsonl"));
        let alt_path = ctx.path(&format!("explain/{set_name}_alterations.csv"));
        write_jsonl(&sets_path, &cf_sets)?;
        if alterations.is_empty() {
            write_atomic(&alt_path, b"feature,count\n")?;
        } else {
            write_csv(&alt_path, &alterations)?;
        }
        out.push(sets_path);
        out.push(alt_path);
    }
    write_csv(&out[1], &summary)?;
    Ok(out)
}

fn sha_prefix(s: &str) -> [u8; 8] {
    let h = sha256_bytes(s.as_bytes());
    let mut b = [0u8; 8];
    for (i, byte) in b.iter_mut().enumerate() {
        *byte = u8::from_str_radix(&h[2 * i..2 * i + 2], 16).unwrap_or(0);
    }
    b
}

fn render(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let cohort = read_cohort(ctx)?;
    let segs = read_segmentations(ctx)?;
    let sidecar = FeatureSidecar::read(&ctx.path("features/features.json"))?;
    let matrix = FeatureMatrix::read_csv(&ctx.path("features/matrix.csv"), sidecar.fs)?;
    let sets: Vec<CounterfactualSet> = read_jsonl(&ctx.path("explain/vcce.jsonl"))?;
    let combined = prepare_data(&sets, &matrix.provenance)?;
    let mut by_record: BTreeMap<&str, Vec<_>> = BTreeMap::new();
    for c in &combined {
        by_record.entry(c.record_id.as_str()).or_default().push(c.clone());
    }
    let lines: BTreeMap<&str, &CohortLine> = cohort.iter().map(|l| (l.record_id.as_str(), l)).collect();
    let dir = ctx.path("render");
    for stale in files_in(&dir, "svg")? {
        fs::remove_file(stale)?;
    }
    let rendered: Vec<(PathBuf, RecordMarkings)> = by_record
        .par_iter()
        .map(|(id, rows)| {
            let line = lines.get(id).ok_or_else(|| anyhow!("record {id} not in cohort"))?;
            let seg = segs.get(*id).ok_or_else(|| anyhow!("record {id} has no segmentation"))?;
            let rec = load_prepared(ctx, line)?;
            let markings = build_markings(rows, &rec, seg);
            let svg = render_report(&rec, &markings, &ctx.cfg.render)?;
            let path = dir.join(format!("{id}.svg"));
            write_atomic(&path, svg.as_bytes())?;
            Ok((path, RecordMarkings { record_id: id.to_string(), markings }))
        })
        .collect::<Result<_>>()?;
    let mut out = vec![dir.join("markings.jsonl")];
    let marks: Vec<&RecordMarkings> = rendered.iter().map(|(_, m)| m).collect();
    write_jsonl(&out[0], &marks)?;
    out.extend(rendered.into_iter().map(|(p, _)| p));
    Ok(out)
}

#[derive(Serialize)]
struct AlignmentRow {
    record_id: String,
    score: f64,
}

fn evaluate(ctx: &Ctx) -> Result<Vec<PathBuf>> {
    let ds = Dataset::load(ctx)?;
    let sets = read_sets(ctx)?;
    let all_model = read_model(&ctx.path("train/model.json"))?;
    let (all_scores, all_pred) = score(&ds, "all", &all_model, &ds.test_rows)?;
    let mut scores = vec![all_scores];
    let mut vcce_pred = None;
    let mut models = BTreeMap::new();
    for name in sets.keys() {
        let model = read_model(&ctx.path(&format!("curve/models/{name}.json")))?;
        let (s, pred) = score(&ds, name, &model, &ds.test_rows)?;
        if name == "vcce" {
            vcce_pred = Some(pred);
        }
        scores.push(s);
        models.insert(name.clone(), model);
    }
    let truth = ds.labels(&ds.test_rows);
    let mcnemar_vcce = vcce_pred.map(|p| mcnemar(&truth, &p, &all_pred));

    let ranges: Vec<FeatureRange> = read_json(&ctx.path("explain/ranges.json"))?;
    let clinical_sets: Vec<CounterfactualSet> = read_jsonl(&ctx.path("explain/clinical.jsonl"))?;
    let clinical_model = &models["clinical"];
    let importances: BTreeMap<String, f64> =
        clinical_model.feature_names.iter().cloned().zip(clinical_model.gain_importance()).collect();
    let comparison = if clinical_sets.is_empty() {
        None
    } else {
        match compare_sparsity(&clinical_sets, &clinical_weights(&ctx.cfg)?.as_map(), &importances, &ranges, ctx.cfg.evaluate.deviation_mode) {
            Ok(c) => Some(c),
            Err(e) => {
                log::warn!("evaluate: sparsity comparison unavailable: {e}");
                None
            }
        }
    };

    let curve: serde_json::Value = read_json(&ctx.path("curve/summary.json"))?;
    let mut interpretability = None;
    let mut alignment = Vec::new();
    if let Some(path) = &ctx.cfg.paths.clinician_labels {
        let labels = read_clinician_labels(path)?;
        interpretability = Some(aggregate_interpretability(&labels)?);
        let marks: Vec<RecordMarkings> = read_jsonl(&ctx.path("render/markings.jsonl"))?;
        let marked: BTreeMap<&str, BTreeSet<String>> =
            marks.iter().map(|m| (m.record_id.as_str(), m.markings.iter().map(|k| k.lead.to_string()).collect())).collect();
        for l in labels.iter().filter(|l| l.exclusion.is_none()) {
            let important: Vec<String> = l.important_leads.iter().map(|x| x.to_string()).collect();
            let leads: Vec<String> = marked.get(l.record_id.as_str()).map(|s| s.iter().cloned().collect()).unwrap_or_default();
            alignment.push(AlignmentRow {
                record_id: l.record_id.clone(),
                score: alignment_score(&important, &leads, ctx.cfg.evaluate.alignment_mode)?,
            });
        }
    }

    let metrics = json!({
        "models": scores,
        "mcnemar_vcce_vs_all": mcnemar_vcce,
        "curve": curve,
        "sparsity": comparison.as_ref().map(|c| json!({
            "clinical": c.clinical,
            "model": c.model,
            "paired": c.paired(),
        })),
        "interpretability": interpretability,
        "alignment": alignment.iter().map(|a| json!({"record_id": a.record_id, "score": a.score})).collect::<Vec<_>>(),
    });
    let out = [ctx.path("evaluate/metrics.json"), ctx.path("evaluate/metrics.csv"), ctx.path("evaluate/sparsity.csv")];
    write_json(&out[0], &metrics)?;
    write_csv(&out[1], &scores)?;
    match comparison.filter(|c| !c.rows.is_empty()) {
        Some(c) => write_csv(&out[2], &c.rows)?,
        None => write_atomic(&out[2], b"record_id,beat_index,cf_index,clinical,model\n")?,
    }
    Ok(out.to_vec())
}

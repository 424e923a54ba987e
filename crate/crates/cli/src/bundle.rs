//! Collects rendered reports, per-beat counterfactual tables and metrics into one folder.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Result;
use serde::Serialize;
use vcce_core::cf::CounterfactualSet;

use crate::artifacts::{read_jsonl, write_atomic, write_csv};
use crate::stages::Stage;
use crate::Precondition;

#[derive(Serialize)]
struct CfRow<'a> {
    beat: usize,
    cf: usize,
    target: &'a str,
    p_target: f64,
    feature: &'a str,
    old: f64,
    new: f64,
}

fn copy(from: &Path, to: &Path) -> Result<()> {
    write_atomic(to, &fs::read(from)?)
}

/// Writes `{workdir}/bundle`: one folder per rendered record with `report.svg` and
/// `counterfactuals.csv`, plus the metrics and alteration tables. Returns the bundle path.
pub fn make_report_bundle(workdir: &Path) -> Result<PathBuf> {
    for stage in [Stage::Explain, Stage::Render, Stage::Evaluate] {
        if !workdir.join(stage.marker()).exists() {
            return Err(Precondition(format!("bundle needs {}: run {stage} first", stage.marker())).into());
        }
    }
    let bundle = workdir.join("bundle");
    if bundle.exists() {
        fs::remove_dir_all(&bundle)?;
    }
    let sets: Vec<CounterfactualSet> = read_jsonl(&workdir.join("explain/vcce.jsonl"))?;
    let mut by_record: BTreeMap<&str, Vec<&CounterfactualSet>> = BTreeMap::new();
    for s in &sets {
        by_record.entry(s.record_id.as_str()).or_default().push(s);
    }
    let mut svgs: Vec<PathBuf> = fs::read_dir(workdir.join("render"))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "svg"))
        .collect();
    svgs.sort();
    for svg in &svgs {
        let id = svg.file_stem().unwrap_or_default().to_string_lossy().to_string();
        let dir = bundle.join(&id);
        copy(svg, &dir.join("report.svg"))?;
        let mut rows = Vec::new();
        for set in by_record.get(id.as_str()).into_iter().flatten() {
            for (j, cf) in set.counterfactuals.iter().enumerate() {
                for ch in &cf.changed {
                    rows.push(CfRow {
                        beat: set.beat_index,
                        cf: j,
                        target: set.target.name(),
                        p_target: cf.p_target,
                        feature: &ch.name,
                        old: ch.old,
                        new: ch.new,
                    });
                }
            }
        }
        let table = dir.join("counterfactuals.csv");
        if rows.is_empty() {
            write_atomic(&table, b"beat,cf,target,p_target,feature,old,new\n")?;
        } else {
            write_csv(&table, &rows)?;
        }
    }
    copy(&workdir.join("evaluate/metrics.csv"), &bundle.join("metrics.csv"))?;
    copy(&workdir.join("evaluate/sparsity.csv"), &bundle.join("sparsity.csv"))?;
    copy(&workdir.join("explain/summary.csv"), &bundle.join("alterations/summary.csv"))?;
    for e in fs::read_dir(workdir.join("explain"))? {
        let p = e?.path();
        let name = p.file_name().unwrap_or_default().to_string_lossy().to_string();
        if let Some(set) = name.strip_suffix("_alterations.csv") {
            copy(&p, &bundle.join("alterations").join(format!("{set}.csv")))?;
        }
    }
    Ok(bundle)
}

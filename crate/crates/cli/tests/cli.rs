use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const FAST: &str = r#"
[train]
n_trees = 30
max_depth = 3
[rank]
step = 16
n_trees = 15
[curve]
stride = 16
[explain]
max_queries = 4
[explain.search]
population = 40
generations = 40
"#;

fn vcce(args: &[&str], extra: &[&Path]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_vcce"));
    cmd.args(args);
    for p in extra {
        cmd.arg(p);
    }
    cmd.output().unwrap()
}

struct Fixture {
    _tmp: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn new() -> Self {
        let tmp = tempfile::tempdir().unwrap();
        let root = tmp.path().to_path_buf();
        vcce_core::synth::write_synthetic_cohort(&root.join("data"), 8, 6, 3).unwrap();
        let config = format!(
            "[paths]\nrecords = {:?}\nmanifest = {:?}\nworkdir = {:?}\n{FAST}",
            root.join("data"),
            root.join("data/ptbxl_database.csv"),
            root.join("work")
        );
        fs::write(root.join("fast.toml"), config).unwrap();
        Fixture { _tmp: tmp, root }
    }

    fn run(&self, args: &[&str]) -> Output {
        let cfg = self.root.join("fast.toml");
        let mut all = vec!["--config", cfg.to_str().unwrap()];
        all.extend_from_slice(args);
        vcce(&all, &[])
    }

    fn work(&self, rel: &str) -> PathBuf {
        self.root.join("work").join(rel)
    }
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn config_dump_is_a_loadable_config() {
    let tmp = tempfile::tempdir().unwrap();
    let dump = vcce(&["config", "--dump"], &[]);
    assert!(dump.status.success());
    let text = stdout(&dump);
    for section in ["[paths]", "[train]", "[rank]", "[curve]", "[explain.search]", "[render]", "[delineation]"] {
        assert!(text.contains(section), "missing {section}");
    }
    let path = tmp.path().join("c.toml");
    fs::write(&path, &text).unwrap();
    let again = vcce(&["--config", path.to_str().unwrap(), "config"], &[]);
    assert_eq!(stdout(&again), text);
}

#[test]
fn bad_config_exits_with_precondition_code() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("c.toml");
    fs::write(&path, "[train]\ntrees = 3\n").unwrap();
    let out = vcce(&["--config", path.to_str().unwrap(), "config"], &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn stage_out_of_order_names_the_missing_stage() {
    let fx = Fixture::new();
    assert_eq!(fx.run(&["ingest"]).status.code(), Some(0));
    assert_eq!(fx.run(&["segment"]).status.code(), Some(0));
    assert_eq!(fx.run(&["features"]).status.code(), Some(0));
    let out = fx.run(&["explain"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("run train first"), "{}", stderr(&out));
}

#[test]
fn empty_workdir_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vcce(&["--workdir"], &[tmp.path()]);
    assert_ne!(out.status.code(), Some(0));
    let bundle = vcce(&["bundle", "--workdir"], &[tmp.path()]);
    assert_eq!(bundle.status.code(), Some(2), "{}", stderr(&bundle));
    let segment = vcce(&["segment", "--workdir"], &[tmp.path()]);
    assert_eq!(segment.status.code(), Some(2));
    assert!(stderr(&segment).contains("run ingest first"));
}

#[test]
fn missing_manifest_is_a_precondition() {
    let tmp = tempfile::tempdir().unwrap();
    let out = vcce(&["ingest", "--records"], &[tmp.path(), Path::new("--manifest"), &tmp.path().join("nope.csv"), Path::new("--out"), tmp.path()]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}

#[test]
fn full_run_resumes_and_bundles() {
    let fx = Fixture::new();
    let first = fx.run(&["run"]);
    assert!(first.status.success(), "{}", stderr(&first));
    assert_eq!(stdout(&first).matches(": done").count(), 9);

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(fx.work("manifest.json")).unwrap()).unwrap();
    let stages = manifest["stages"].as_object().unwrap();
    assert_eq!(stages.len(), 9);
    for entry in stages.values() {
        assert_eq!(entry["config_hash"].as_str().unwrap().len(), 64);
        assert!(!entry["outputs"].as_object().unwrap().is_empty());
    }
    assert_eq!(manifest["version"], env!("CARGO_PKG_VERSION"));

    let second = fx.run(&["run"]);
    assert_eq!(stdout(&second).matches(": up to date").count(), 9, "{}", stdout(&second));

    // a changed seed leaves segmentation alone but reruns the split and everything after it
    let reseeded = fx.run(&["--seed", "5", "run"]);
    assert!(reseeded.status.success());
    assert!(stdout(&reseeded).contains("ingest: done"));
    assert!(stdout(&reseeded).contains("train: done"));
    let back = fx.run(&["--seed", "42", "run"]);
    assert!(back.status.success());

    // a tampered output is regenerated
    fs::write(fx.work("train/report.csv"), "junk").unwrap();
    let repaired = fx.run(&["train"]);
    assert_eq!(stdout(&repaired).trim(), "train: done");

    let b1 = fx.run(&["bundle"]);
    assert!(b1.status.success(), "{}", stderr(&b1));
    let bundle = fx.work("bundle");
    let snap = snapshot(&bundle);
    let svgs = snap.keys().filter(|p| p.extension().is_some_and(|e| e == "svg")).count();
    let rendered = fs::read_dir(fx.work("render")).unwrap().filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "svg")).count();
    assert!(svgs >= 1);
    assert_eq!(svgs, rendered);
    assert_eq!(snap.keys().filter(|p| p.file_name().is_some_and(|n| n == "metrics.csv")).count(), 1);
    assert_eq!(snap.keys().filter(|p| p.file_name().is_some_and(|n| n == "counterfactuals.csv")).count(), svgs);

    let b2 = fx.run(&["bundle"]);
    assert!(b2.status.success());
    assert_eq!(snapshot(&bundle), snap);
}

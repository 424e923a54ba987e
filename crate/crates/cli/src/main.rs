//! `vcce`: runs the ECG counterfactual pipeline stage by stage.

mod artifacts;
mod bundle;
mod config;
mod stages;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use config::PipelineConfig;
use stages::{run_stage, Ctx, Outcome, Stage};

/// An input or ordering problem the user can fix; exits with status 2.
#[derive(Debug)]
pub struct Precondition(pub String);

impl fmt::Display for Precondition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Precondition {}

#[derive(Parser)]
#[command(name = "vcce", version, about = "ECG counterfactual explanation pipeline")]
struct Cli {
    /// Pipeline configuration (TOML); built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the configured working directory.
    #[arg(long, global = true)]
    workdir: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Inputs {
    /// Directory the manifest's record paths are relative to.
    #[arg(long)]
    records: Option<PathBuf>,
    /// PTB-XL style database CSV.
    #[arg(long)]
    manifest: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Print the effective configuration.
    Config {
        #[arg(long)]
        dump: bool,
    },
    /// Filter the manifest and split it into balanced train/test patients.
    Ingest {
        #[command(flatten)]
        inputs: Inputs,
        /// Working directory to write into (same as --workdir).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Denoise, detect R peaks and delineate every cohort record.
    Segment,
    /// Extract the beat-level feature matrix.
    Features,
    /// Train the all-feature classifier.
    Train,
    /// Rank features by recursive elimination.
    Rank,
    /// Score top-k models and train the explained feature-set models.
    Curve,
    /// Generate counterfactuals for every feature set.
    Explain,
    /// Render counterfactual markings onto ECG reports.
    Render,
    /// Compute classification, sparsity and interpretability metrics.
    Evaluate,
    /// Run all stages in order, skipping those already up to date.
    Run {
        #[command(flatten)]
        inputs: Inputs,
    },
    /// Gather reports, counterfactual tables and metrics into `bundle/`.
    Bundle,
    /// Write a synthetic two-class cohort (WFDB records plus manifest).
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 20)]
        per_class: usize,
        #[arg(long, default_value_t = 8)]
        beats: usize,
    },
}

fn stage_of(cmd: &Command) -> Option<Stage> {
    Some(match cmd {
        Command::Segment => Stage::Segment,
        Command::Features => Stage::Features,
        Command::Train => Stage::Train,
        Command::Rank => Stage::Rank,
        Command::Curve => Stage::Curve,
        Command::Explain => Stage::Explain,
        Command::Render => Stage::Render,
        Command::Evaluate => Stage::Evaluate,
        _ => return None,
    })
}

fn report(stage: Stage, outcome: Outcome) {
    match outcome {
        Outcome::Ran => println!("{stage}: done"),
        Outcome::Skipped => println!("{stage}: up to date"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let mut workdir = cli.workdir.clone();
    match &cli.command {
        Command::Ingest { inputs, out } => {
            apply_inputs(&mut cfg, inputs);
            if out.is_some() {
                workdir = out.clone();
            }
        }
        Command::Run { inputs } => apply_inputs(&mut cfg, inputs),
        _ => {}
    }
    let workdir = workdir.or_else(|| cfg.paths.workdir.clone()).unwrap_or_else(|| PathBuf::from("work"));
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build().context("building worker pool")?;
    let ctx = Ctx { cfg, workdir };
    pool.install(|| match &cli.command {
        Command::Config { dump } => {
            if *dump {
                print!("{}", PipelineConfig::default().dump()?);
            } else {
                print!("{}", ctx.cfg.dump()?);
            }
            Ok(())
        }
        Command::Ingest { .. } => {
            report(Stage::Ingest, run_stage(Stage::Ingest, &ctx)?);
            Ok(())
        }
        Command::Run { .. } => {
            for stage in Stage::ALL {
                report(stage, run_stage(stage, &ctx)?);
            }
            Ok(())
        }
        Command::Bundle => {
            let dir = bundle::make_report_bundle(&ctx.workdir)?;
            println!("bundle written to {}", dir.display());
            Ok(())
        }
        Command::Synth { out, per_class, beats } => {
            let manifest = vcce_core::synth::write_synthetic_cohort(out, *per_class, *beats, ctx.cfg.seed)?;
            println!("synthetic cohort manifest: {}", manifest.display());
            Ok(())
        }
        cmd => {
            let stage = stage_of(cmd).expect("remaining commands are stages");
            report(stage, run_stage(stage, &ctx)?);
            Ok(())
        }
    })
}

fn apply_inputs(cfg: &mut PipelineConfig, inputs: &Inputs) {
    if inputs.records.is_some() {
        cfg.paths.records = inputs.records.clone();
    }
    if inputs.manifest.is_some() {
        cfg.paths.manifest = inputs.manifest.clone();
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.downcast_ref::<Precondition>().is_some()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

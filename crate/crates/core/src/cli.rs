//! Command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use log::info;
use serde_json::json;

use crate::datagen::{generate, SynthSpec};
use crate::error::{Error, Result};
use crate::io::{load_dataset, read_json, write_dataset, write_json, GraphDump, Report, StateDump};
use crate::math::Space;
use crate::pipeline::{Engine, EngineConfig, StreamResult};
use crate::predict::sweep_betas;

#[derive(Debug, Parser)]
#[command(name = "cosmic", version, about = "Training-free test-time adaptation over precomputed embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SpaceArg {
    Css,
    Afv,
}

impl From<SpaceArg> for Space {
    fn from(s: SpaceArg) -> Self {
        match s {
            SpaceArg::Css => Space::Css,
            SpaceArg::Afv => Space::Afv,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Adapt over a dataset and report per-path accuracy.
    Run {
        #[arg(long)]
        manifest: PathBuf,
        /// Engine config JSON; defaults apply to missing fields.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Write the final engine state here.
        #[arg(long)]
        dump_state: Option<PathBuf>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Include per-sample records in the report.
        #[arg(long)]
        verbose: bool,
    },
    /// Generate a synthetic dataset.
    GenSynth {
        /// Generator spec JSON; defaults apply to missing fields.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Grid-search the fusion weights and print the grid as CSV.
    SweepBetas {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 0.05)]
        step: f64,
        #[arg(long, default_value_t = 10.0)]
        max: f64,
    },
    /// Serialize the graph and cliques of one space from a state dump.
    DumpGraph {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, value_enum)]
        space: SpaceArg,
        /// Output path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Side-by-side accuracy table of several reports.
    Eval {
        #[arg(long = "report", required = true)]
        reports: Vec<PathBuf>,
    },
}

fn load_config(path: Option<&Path>) -> Result<EngineConfig> {
    match path {
        Some(p) => read_json(p),
        None => Ok(EngineConfig::default()),
    }
}

fn run_manifest(manifest: &Path, config: Option<&Path>) -> Result<(Engine, StreamResult)> {
    let cfg = load_config(config)?;
    let ds = load_dataset(manifest)?;
    info!(
        "loaded {} samples over {} classes from {}",
        ds.samples.len(),
        ds.classes(),
        manifest.display()
    );
    let mut engine = Engine::new(cfg, ds.text_features.clone(), Some(ds.afv_dim))?;
    let result = engine.run(&ds.samples)?;
    Ok((engine, result))
}

fn emit_json(out: &mut dyn Write, path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    match path {
        Some(p) => write_json(p, value),
        None => {
            let s = serde_json::to_string_pretty(value)?;
            writeln!(out, "{s}").map_err(|e| Error::io("<stdout>", e))
        }
    }
}

pub fn execute(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let w = |out: &mut dyn Write, s: String| writeln!(out, "{s}").map_err(|e| Error::io("<stdout>", e));
    match cli.command {
        Command::Run {
            manifest,
            config,
            dump_state,
            report,
            verbose,
        } => {
            let (engine, result) = run_manifest(&manifest, config.as_deref())?;
            if let Some(p) = dump_state {
                StateDump::capture(&engine).write(&p)?;
            }
            let value = serde_json::to_value(Report::new(engine.config(), &result, verbose))?;
            emit_json(out, report.as_deref(), &value)
        }
        Command::GenSynth { spec, out: dir } => {
            let spec: SynthSpec = match spec {
                Some(p) => read_json(p)?,
                None => SynthSpec::default(),
            };
            let data = generate(&spec)?;
            let manifest = write_dataset(&dir, &data.dataset)?;
            write_json(dir.join("spec.json"), &spec)?;
            w(out, manifest.display().to_string())
        }
        Command::SweepBetas {
            manifest,
            config,
            step,
            max,
        } => {
            let (_, result) = run_manifest(&manifest, config.as_deref())?;
            let sweep = sweep_betas(&result.scores, step, max)?;
            info!(
                "best weights {:?} at accuracy {}",
                sweep.best, sweep.best_accuracy
            );
            w(out, "beta1,beta2,beta3,accuracy,best".into())?;
            for p in &sweep.grid {
                let best = p.beta2 == sweep.best.beta2 && p.beta3 == sweep.best.beta3;
                w(
                    out,
                    format!("1,{},{},{},{}", p.beta2, p.beta3, p.accuracy, u8::from(best)),
                )?;
            }
            Ok(())
        }
        Command::DumpGraph { state, space, out: path } => {
            let engine = StateDump::read(&state)?.into_engine()?;
            let dump = GraphDump::capture(&engine, space.into());
            emit_json(out, path.as_deref(), &serde_json::to_value(&dump)?)
        }
        Command::Eval { reports } => {
            let loaded = reports
                .iter()
                .map(|p| read_json::<Report>(p).map(|r| (p, r)))
                .collect::<Result<Vec<_>>>()?;
            let name_width = loaded
                .iter()
                .map(|(p, _)| p.display().to_string().len())
                .max()
                .unwrap_or(6)
                .max(6);
            w(
                out,
                format!(
                    "{:<name_width$}  {:>7}  {:>9}  {:>7}  {:>7}  {:>7}  {:>7}",
                    "report", "samples", "zero_shot", "tda", "css", "afv", "fused"
                ),
            )?;
            for (p, r) in &loaded {
                let a = r.accuracy;
                w(
                    out,
                    format!(
                        "{:<name_width$}  {:>7}  {:>9.4}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}",
                        p.display(),
                        r.samples,
                        a.zero_shot,
                        a.tda,
                        a.css,
                        a.afv,
                        a.fused
                    ),
                )?;
            }
            Ok(())
        }
    }
}

/// JSON object printed on failure.
pub fn error_json(e: &Error) -> serde_json::Value {
    json!({ "error": { "kind": e.kind(), "message": e.to_string() } })
}

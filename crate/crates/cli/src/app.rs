use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use glyphtag_service::AppState;

use crate::config::{resolve, Layers};
use crate::error::{CliError, Result};
use crate::pipeline::{self, ModelChoice, RunLock, Workspace};

#[derive(Debug, Parser)]
#[command(name = "glyphtag", version, about = "Tag-based font retrieval pipeline")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Global {
    /// TOML file layered over the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Run directory holding every artifact.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// `key.path=value`, applied last; repeatable.
    #[arg(long = "override", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize the corpus, query sets and AMT-style groups.
    Synth,
    /// Write glyph PNGs.
    Render {
        #[arg(long)]
        size: Option<usize>,
        /// Restrict to these fonts; repeatable.
        #[arg(long = "font")]
        fonts: Vec<String>,
    },
    /// Tag recognizer.
    #[command(name = "train-stage1")]
    TrainStage1,
    /// Generative feature learning.
    #[command(name = "train-stage2")]
    TrainStage2,
    /// Font classifier and attention module.
    #[command(name = "train-stage3")]
    TrainStage3,
    /// Retrieval head.
    #[command(name = "train-stage4")]
    TrainStage4,
    /// mAP and nDCG over the three query sets.
    Evaluate {
        /// oracle, basic, full or full-product.
        #[arg(long, default_value = "full")]
        model: String,
    },
    /// Accuracy and average rank over the AMT-style groups.
    #[command(name = "amt-eval")]
    AmtEval {
        /// oracle, random, basic, full or full-product.
        #[arg(long, default_value = "full")]
        model: String,
    },
    /// Precompute the font index served by `serve`.
    #[command(name = "build-index")]
    BuildIndex,
    /// HTTP API over the built index.
    Serve {
        #[arg(long)]
        addr: Option<String>,
    },
    /// Masked-feature glyph reconstructions.
    Reconstruct {
        /// Kept feature nodes (default: half of them).
        #[arg(long)]
        k: Option<usize>,
        /// Fonts whose strips are written as PNG.
        #[arg(long, default_value_t = 2)]
        images: usize,
    },
    /// Rank every font for a query with one checkpoint; JSON lines.
    Score {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        tags: Vec<String>,
        #[arg(long)]
        k: Option<usize>,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Synth => "synth",
            Command::Render { .. } => "render",
            Command::TrainStage1 => "train-stage1",
            Command::TrainStage2 => "train-stage2",
            Command::TrainStage3 => "train-stage3",
            Command::TrainStage4 => "train-stage4",
            Command::Evaluate { .. } => "evaluate",
            Command::AmtEval { .. } => "amt-eval",
            Command::BuildIndex => "build-index",
            Command::Serve { .. } => "serve",
            Command::Reconstruct { .. } => "reconstruct",
            Command::Score { .. } => "score",
        }
    }
}

fn print_json(v: &impl serde::Serialize) {
    println!("{}", serde_json::to_string(v).expect("serializable"));
}

/// Runs one subcommand; `args` is recorded in the run manifest.
pub fn run(cli: Cli, args: &[String]) -> Result<()> {
    let cfg = resolve(&Layers {
        file: cli.global.config.clone(),
        seed: cli.global.seed,
        out: cli.global.out.clone(),
        overrides: cli.global.overrides.clone(),
    })?;
    let name = cli.command.name();
    let mut ws = Workspace::new(cfg);

    if let Command::Serve { addr } = &cli.command {
        let manifest = ws.manifest()?;
        let index = pipeline::load_index(&mut ws)?;
        let addr = addr.clone().unwrap_or_else(|| ws.cfg.serve.addr.clone());
        let addr: SocketAddr = addr
            .parse()
            .map_err(|e| CliError::Config(format!("bad address `{addr}`: {e}")))?;
        let state = AppState::new(index, manifest, ws.path("previews"), ws.cfg.serve.preview_size)?;
        let rt = tokio::runtime::Runtime::new().map_err(crate::error::io(ws.dir()))?;
        return rt
            .block_on(glyphtag_service::serve(state, addr))
            .map_err(crate::error::io(ws.dir()));
    }
    if let Command::Score { checkpoint, tags, k } = &cli.command {
        let manifest = ws.manifest()?;
        let mut ranked = pipeline::score(&manifest, checkpoint, tags)?;
        if let Some(k) = k {
            ranked.truncate(*k);
        }
        for r in &ranked {
            print_json(r);
        }
        return Ok(());
    }

    let _lock = RunLock::acquire(ws.dir())?;
    match &cli.command {
        Command::Synth => {
            let m = pipeline::synth(&mut ws)?;
            log::info!("{} fonts, {} tags", m.fonts.len(), m.vocabulary.len());
        }
        Command::Render { size, fonts } => {
            let n = pipeline::render(&mut ws, fonts, *size)?;
            log::info!("{n} glyph images");
        }
        Command::TrainStage1 => {
            pipeline::train_stage_1(&mut ws)?;
        }
        Command::TrainStage2 => {
            pipeline::train_stage_2(&mut ws)?;
        }
        Command::TrainStage3 => {
            pipeline::train_stage_3(&mut ws)?;
        }
        Command::TrainStage4 => {
            pipeline::train_stage_4(&mut ws)?;
        }
        Command::Evaluate { model } => {
            let report = pipeline::evaluate(&mut ws, model.parse::<ModelChoice>()?)?;
            print!("{}", report.to_table());
        }
        Command::AmtEval { model } => {
            let s = pipeline::amt(&mut ws, model.parse::<ModelChoice>()?)?;
            print_json(&s);
        }
        Command::BuildIndex => {
            let index = pipeline::build_index(&mut ws)?;
            log::info!("indexed {} fonts", index.header.fonts.len());
        }
        Command::Reconstruct { k, images } => {
            let s = pipeline::reconstruct(&mut ws, *k, *images)?;
            print_json(&s);
        }
        Command::Serve { .. } | Command::Score { .. } => unreachable!("handled above"),
    }
    ws.finish(name, args)?;
    Ok(())
}

/// Shared by tests: the state `serve` would run with.
pub fn serve_state(ws: &mut Workspace) -> Result<Arc<AppState>> {
    let manifest = ws.manifest()?;
    let index = pipeline::load_index(ws)?;
    Ok(Arc::new(AppState::new(
        index,
        manifest,
        ws.path("previews"),
        ws.cfg.serve.preview_size,
    )?))
}

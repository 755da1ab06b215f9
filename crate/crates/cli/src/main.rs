//! `tenure`: homeowner tenure and survey analysis pipeline.

mod bundle;
mod config;
mod pipeline;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};

use bundle::{Bundle, StageStatus};
use config::RunConfig;
use pipeline::{Run, Stage};

#[derive(Parser)]
#[command(
    name = "tenure",
    version,
    about = "Homeowner tenure survival and resident survey analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; overrides the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads. Never changes the output.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Pre/post period cutoff date (YYYY-MM-DD); overrides the config.
    #[arg(long, global = true)]
    cutoff: Option<NaiveDate>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Parse transactions into ownership spells.
    Ingest,
    /// Kaplan-Meier curves, bootstrap medians and log-rank tests.
    Survival,
    /// Daily and annualized hazard with departure peaks.
    Hazard,
    /// Mixture fits of the closed-spell durations.
    Fit,
    /// Per-neighborhood pre/post impact index table.
    Cii,
    /// Tenure statistics: ANOVA, normality, appraisal regression.
    Stats,
    /// Survey encoding, group tables and test battery.
    Survey,
    /// Every stage in order, with simlab inputs when configured.
    Report,
    /// Write synthetic inputs with known ground truth.
    Simlab,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Ingest => "ingest",
            Command::Survival => "survival",
            Command::Hazard => "hazard",
            Command::Fit => "fit",
            Command::Cii => "cii",
            Command::Stats => "stats",
            Command::Survey => "survey",
            Command::Report => "report",
            Command::Simlab => "simlab",
        }
    }

    fn stages(self) -> Vec<Stage> {
        match self {
            Command::Ingest => vec![Stage::Ingest],
            Command::Survival => vec![Stage::Ingest, Stage::Survival],
            Command::Hazard => vec![Stage::Ingest, Stage::Hazard],
            Command::Fit => vec![Stage::Ingest, Stage::Fit],
            Command::Cii => vec![Stage::Ingest, Stage::Cii],
            Command::Stats => vec![Stage::Ingest, Stage::Stats],
            Command::Survey => vec![Stage::Survey],
            Command::Report => Stage::REPORT.to_vec(),
            Command::Simlab => vec![],
        }
    }
}

fn load_config(common: &Common) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::parse("", Path::new("."))?,
    };
    if let Some(seed) = common.seed {
        cfg.seed = Some(seed);
    }
    if let Some(out) = &common.out {
        cfg.out = out.clone();
    }
    if let Some(cutoff) = common.cutoff {
        cfg.segmentation.cutoff_date = cutoff;
    }
    Ok(cfg)
}

fn simlab(mut cfg: RunConfig) -> Result<bool> {
    let seed = cfg.seed()?;
    let sim = cfg.simlab.get_or_insert_with(Default::default).clone();
    let mut bundle = Bundle::create(&cfg.out)?;
    match pipeline::simulate(&sim, &cfg, seed) {
        Ok(files) => {
            bundle.write("transactions.csv", &files.transactions)?;
            bundle.write("survey.csv", &files.survey)?;
            bundle.write("codebook.json", &files.codebook)?;
            bundle.write("simlab_truth.json", &files.truth)?;
            bundle.stage("simlab", StageStatus::Ok, None);
        }
        Err(e) => {
            eprintln!("stage simlab failed: {e:#}");
            bundle.stage("simlab", StageStatus::Failed, Some(format!("{e:#}")));
        }
    }
    bundle.finish("simlab", &cfg)
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.common.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    let cfg = load_config(&cli.common)?;
    if let Command::Simlab = cli.command {
        return simlab(cfg);
    }
    cfg.seed()?;
    let bundle = Bundle::create(&cfg.out)?;
    let lenient = matches!(cli.command, Command::Report);
    Run::new(cfg, bundle)?.execute(cli.command.name(), &cli.command.stages(), lenient)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

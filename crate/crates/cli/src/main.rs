//! `mvlayout` command-line runner.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvlayout::metrics::MetricReport;
use mvlayout::pipeline::{eval_command, run_stage, PipelineReport, ScenarioConfig, Stage};
use mvlayout::{LayoutError, Result};

#[derive(Debug, Parser)]
#[command(name = "mvlayout", version, about = "Seeded multi-view room layout scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate rooms and camera poses.
    GenScene(RunArgs),
    /// Render ground-truth horizon depth for every view.
    Render(RunArgs),
    /// Render, then apply the configured noise.
    Corrupt(RunArgs),
    /// Run up to multi-view pseudo-label consensus.
    Consensus(RunArgs),
    /// Run up to cost-volume depth fusion.
    Costvolume(RunArgs),
    /// Every stage, plus metrics.csv and losses.csv.
    Pipeline(RunArgs),
    /// Score a directory of predictions against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Scenario JSON; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `outputs` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (all cores when omitted).
    #[arg(long)]
    threads: Option<usize>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    #[arg(long, default_value = "eval")]
    out: PathBuf,
}

impl RunArgs {
    fn scenario(&self) -> Result<ScenarioConfig> {
        let mut cfg = match &self.config {
            Some(path) => ScenarioConfig::load(path)?,
            None => ScenarioConfig::with_seed(0),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.outputs = out.clone();
        }
        if self.threads == Some(0) {
            return Err(LayoutError::Config {
                path: "threads".into(),
                message: "must be at least 1".into(),
            });
        }
        Ok(cfg)
    }
}

fn print_means(report: &PipelineReport) {
    println!("{:<8} {:>8} {:>8} {:>8} {:>8}", "variant", "iou2d", "iou3d", "rmse", "delta1");
    for variant in ["noisy", "pseudo", "fused"] {
        if let Some(MetricReport { iou2d, iou3d, rmse, delta1, .. }) = report.mean(variant) {
            println!("{variant:<8} {iou2d:>8.4} {iou3d:>8.4} {rmse:>8.4} {delta1:>8.4}");
        }
    }
}

fn stage(args: &RunArgs, stage: Stage) -> Result<()> {
    let cfg = args.scenario()?;
    let report = run_stage(&cfg, stage, args.threads)?;
    println!("{} room(s) written to {}", report.rooms.len(), report.out_dir.display());
    if stage == Stage::Evaluate {
        print_means(&report);
        println!("metrics: {}", report.out_dir.join("metrics.csv").display());
        println!("losses:  {}", report.out_dir.join("losses.csv").display());
    }
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<()> {
    let summary = eval_command(&args.pred, &args.gt, &args.out)?;
    println!(
        "{} file(s) scored, {} skipped; {}",
        summary.rows.len(),
        summary.skipped.len(),
        Path::new(&args.out).join("metrics.csv").display()
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::GenScene(a) => stage(a, Stage::Scene),
        Command::Render(a) => stage(a, Stage::Render),
        Command::Corrupt(a) => stage(a, Stage::Corrupt),
        Command::Consensus(a) => stage(a, Stage::Consensus),
        Command::Costvolume(a) => stage(a, Stage::CostVolume),
        Command::Pipeline(a) => stage(a, Stage::Evaluate),
        Command::Eval(a) => eval(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

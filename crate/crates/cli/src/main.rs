use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use inrlab::experiment::{load_trace, rank_report, run_experiment, run_sweep, ExperimentConfig, RawConfig, SweepSpec};
use inrlab::{Error, Result};

/// Coordinate-network experiments with Adam and Muon.
#[derive(Parser)]
#[command(name = "inrlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit an image (PNG/PGM/PPM).
    FitImage(RunArgs),
    /// Fit a WAV file or a synthetic chirp.
    FitAudio(RunArgs),
    /// Reconstruct a phantom from its sinogram.
    Ct(RunArgs),
    /// Super-resolve an image from its block-mean downsampling.
    Sisr(RunArgs),
    /// Fit a signed distance field.
    Sdf(RunArgs),
    /// Run a learning-rate grid.
    Sweep(RunArgs),
    /// Summarize one rank trace or compare two.
    RankReport(ReportArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Config file of `key = value` lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Extra `key=value` settings applied after the config file.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct ReportArgs {
    /// One or two `ranks.csv` files.
    traces: Vec<PathBuf>,
    /// Directory for the report CSVs; defaults to the first trace's directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run config; its `output_dir/ranks.csv` is used when no trace is given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Accepted for symmetry with the other commands; unused.
    #[arg(long)]
    seed: Option<u64>,
}

fn raw_config(args: &RunArgs, task: Option<&str>) -> Result<RawConfig> {
    let mut raw = match &args.config {
        Some(p) => RawConfig::load(p)?,
        None => RawConfig::default(),
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        raw.set(k.trim(), v.trim());
    }
    if let Some(task) = task {
        match raw.get("task") {
            None => raw.set("task", task),
            Some(t) if t == task => {}
            Some(t) => {
                return Err(Error::Config(format!(
                    "config sets task = {t}, but this command runs the {task} task"
                )))
            }
        }
    }
    if let Some(seed) = args.seed {
        raw.set("seed", seed.to_string());
    }
    Ok(raw)
}

fn run(args: &RunArgs, task: &str) -> Result<()> {
    let cfg = ExperimentConfig::from_raw(&raw_config(args, Some(task))?)?;
    let out = run_experiment(&cfg)?;
    for (name, value) in &out.final_metrics {
        println!("{name:>8} {value:.6}");
    }
    for p in &out.artifacts {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<()> {
    let spec = SweepSpec::from_raw(raw_config(args, None)?)?;
    let result = run_sweep(&spec)?;
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    println!("{} runs, {} failed", result.rows.len(), failed);
    match result.best {
        Some(b) => {
            let row = &result.rows[b];
            let aux = row.aux_lr.map(|a| format!(" aux_lr {a}")).unwrap_or_default();
            println!(
                "best: run {b} ({} lr {}{aux}) {} = {:.6}",
                row.optimizer.name(),
                row.lr,
                result.metric,
                row.value.unwrap()
            );
        }
        None => println!("best: none (every run failed)"),
    }
    println!("wrote {}", spec.base.output_dir.join("results.csv").display());
    Ok(())
}

fn report(args: &ReportArgs) -> Result<()> {
    let mut paths = args.traces.clone();
    let mut out = args.out.clone();
    if let Some(cfg) = &args.config {
        let raw = RawConfig::load(cfg)?;
        let dir = PathBuf::from(raw.get("output_dir").ok_or_else(|| Error::Config(format!("{} has no output_dir", cfg.display())))?);
        if paths.is_empty() {
            paths.push(dir.join("ranks.csv"));
        }
        out.get_or_insert(dir);
    }
    if paths.is_empty() || paths.len() > 2 {
        return Err(Error::Config(format!("rank-report takes one or two trace files, got {}", paths.len())));
    }
    let mut traces = paths.iter().map(|p| load_trace(p)).collect::<Result<Vec<_>>>()?;
    if traces.len() == 2 && traces[0].0 == traces[1].0 {
        traces[0].0 = "A".into();
        traces[1].0 = "B".into();
    }
    let report = rank_report(&traces)?;
    print!("{}", report.table());
    let dir = out.unwrap_or_else(|| paths[0].parent().map(Path::to_path_buf).unwrap_or_default());
    for p in report.write(&dir)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    inrlab::alloc::retain_heap();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::FitImage(a) => run(a, "image"),
        Command::FitAudio(a) => run(a, "audio"),
        Command::Ct(a) => run(a, "ct"),
        Command::Sisr(a) => run(a, "sisr"),
        Command::Sdf(a) => run(a, "sdf"),
        Command::Sweep(a) => sweep(a),
        Command::RankReport(a) => report(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

//! `lowlight-rppg`: run the enhancement + rPPG pipeline on one recording or
//! benchmark a dataset of recordings.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use log::{error, info, warn};
use rppg_core::pipeline::{
    find_recordings, generate_dataset, run_benchmark, run_pipeline, RunConfig, RunSummary, SynthPlan, REPORT_FILE,
};
use rppg_core::recording::META_FILE;
use rppg_core::{Enhancement, Error, Method};

const EXIT_RUNTIME: u8 = 1;
const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "lowlight-rppg", version, about = "Low-light video enhancement and remote heart-rate estimation")]
struct Args {
    /// Recording directory, or a dataset root holding recording directories.
    #[arg(long)]
    input: Option<PathBuf>,

    /// Enhancements to run (comma separated): none, he, lime.
    #[arg(long, value_delimiter = ',')]
    enhance: Option<Vec<Enhancement>>,

    /// Pulse extractors to run (comma separated): green, ica, pos.
    #[arg(long, value_delimiter = ',')]
    method: Option<Vec<Method>>,

    /// Output directory for reports and spectrograms.
    #[arg(long)]
    out: Option<PathBuf>,

    /// Recordings processed in parallel.
    #[arg(long)]
    jobs: Option<usize>,

    /// 66-point landmark CSV used to place the ROI.
    #[arg(long)]
    landmarks: Option<PathBuf>,

    /// Fraction trimmed from each side of the landmark box.
    #[arg(long)]
    roi_inset: Option<f64>,

    /// Seed for ICA initialization.
    #[arg(long)]
    seed: Option<u64>,

    /// Write spectrogram SVG/CSV files for every run.
    #[arg(long)]
    emit_spectrogram: bool,

    /// Generate synthetic recordings from this JSON plan, then benchmark them.
    #[arg(long, value_name = "CONFIG.json")]
    synth: Option<PathBuf>,

    /// JSON run configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

enum Failure {
    Usage(String),
    Runtime(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::NotFound(_) => Failure::Usage(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

fn build_config(args: &Args) -> Result<RunConfig, Failure> {
    let mut cfg = match &args.config {
        Some(path) => RunConfig::load(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?,
        None => RunConfig::default(),
    };
    if let Some(v) = &args.input {
        cfg.input = Some(v.clone());
    }
    if let Some(v) = &args.enhance {
        cfg.enhance = v.clone();
    }
    if let Some(v) = &args.method {
        cfg.method = v.clone();
    }
    if let Some(v) = &args.out {
        cfg.out = v.clone();
    }
    if args.jobs.is_some() {
        cfg.jobs = args.jobs;
    }
    if let Some(v) = &args.landmarks {
        cfg.landmarks = Some(v.clone());
    }
    if let Some(v) = args.roi_inset {
        cfg.roi_inset = v;
    }
    if let Some(v) = args.seed {
        cfg.seed = v;
    }
    if let Some(v) = &args.synth {
        cfg.synth = Some(v.clone());
    }
    cfg.emit_spectrogram |= args.emit_spectrogram;
    dedup(&mut cfg.enhance);
    dedup(&mut cfg.method);
    cfg.validate()?;
    Ok(cfg)
}

fn dedup<T: PartialEq + Copy>(v: &mut Vec<T>) {
    let mut seen = Vec::with_capacity(v.len());
    v.retain(|x| {
        let fresh = !seen.contains(x);
        seen.push(*x);
        fresh
    });
}

fn run(cfg: &RunConfig) -> Result<RunSummary, Failure> {
    if let Some(plan_path) = &cfg.synth {
        let plan = SynthPlan::load(plan_path).map_err(|e| Failure::Usage(format!("{}: {e}", plan_path.display())))?;
        let root = cfg.input.clone().unwrap_or_else(|| cfg.out.join("synth"));
        let dirs = generate_dataset(&plan, &root)?;
        info!("generated {} synthetic recordings under {}", dirs.len(), root.display());
        return Ok(run_benchmark(&root, cfg)?);
    }
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| Failure::Usage("--input is required unless --synth is given".into()))?;
    if input.join(META_FILE).is_file() {
        Ok(run_pipeline(input, cfg)?)
    } else {
        find_recordings(input)?;
        Ok(run_benchmark(input, cfg)?)
    }
}

fn report(summary: &RunSummary, out: &Path) {
    print!("{}", summary.report.to_csv());
    for f in &summary.failures {
        warn!("{f}");
    }
    eprintln!(
        "{} runs, {} failures; report written to {}",
        summary.videos.len(),
        summary.failures.len(),
        out.join(REPORT_FILE).display()
    );
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = match args.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let outcome = build_config(&args).and_then(|cfg| run(&cfg).map(|s| (cfg, s)));
    match outcome {
        Ok((cfg, summary)) => {
            report(&summary, &cfg.out);
            if summary.videos.is_empty() {
                error!("no run completed");
                ExitCode::from(EXIT_RUNTIME)
            } else {
                ExitCode::SUCCESS
            }
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_RUNTIME)
        }
    }
}

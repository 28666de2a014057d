//! Command-line front end for the offline eye-tracking pipeline.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use gazekit_core::pipeline::{run_eval, run_process, run_synth, PipelineConfig, ProcessSummary};
use gazekit_core::synth::SceneScript;

#[derive(Parser)]
#[command(name = "gazekit", version, about = "Offline eye-tracking pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline over a recording and write all CSV outputs.
    Process {
        /// Project directory holding recording subdirectories.
        #[arg(long)]
        project: PathBuf,
        /// Recording subdirectory name.
        #[arg(long)]
        recording: String,
        /// Scene-frame range used for calibration, inclusive (A:B).
        #[arg(long, value_name = "A:B")]
        calib_range: Option<String>,
        /// key=value configuration file.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Worker threads for per-frame feature stages.
        #[arg(long)]
        jobs: Option<usize>,
        /// Seed for every stochastic fit.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Generate a synthetic recording with ground truth.
    Synth {
        /// Scene script file; the built-in default script when omitted.
        #[arg(long)]
        script: Option<PathBuf>,
        /// Directory to create the recording in.
        #[arg(long)]
        out: PathBuf,
    },
    /// Score pipeline outputs against a recording's ground truth.
    Eval {
        /// Output directory of a `process` run.
        #[arg(long)]
        out: PathBuf,
        /// Recording directory holding the `truth/` data.
        #[arg(long)]
        truth: PathBuf,
    },
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run() -> anyhow::Result<()> {
    match Cli::parse().command {
        Command::Process {
            project,
            recording,
            calib_range,
            config,
            jobs,
            seed,
            out,
        } => {
            let mut resolved = PipelineConfig::default();
            if let Some(path) = &config {
                resolved.apply_file(path).map_err(anyhow::Error::msg)?;
            }
            if let Some(range) = &calib_range {
                resolved
                    .apply("calib_range", range)
                    .map_err(anyhow::Error::msg)?;
            }
            if let Some(jobs) = jobs {
                resolved.jobs = jobs;
            }
            if let Some(seed) = seed {
                resolved.seed = seed;
            }
            let summary = run_process(&project, &recording, &resolved, &out)?;
            print_summary(&summary);
            Ok(())
        }
        Command::Synth { script, out } => {
            let script = match script {
                Some(path) => std::fs::read_to_string(&path)?.parse::<SceneScript>()?,
                None => SceneScript::default_script(),
            };
            let dir = run_synth(&script, &out)?;
            println!("recording written to {}", dir.display());
            Ok(())
        }
        Command::Eval { out, truth } => {
            let report = run_eval(&out, &truth)?;
            print!("{report}");
            println!(
                "report written to {}",
                out.join("eval_report.txt").display()
            );
            Ok(())
        }
    }
}

fn print_summary(summary: &ProcessSummary) {
    println!("stage timings (ms per stage):");
    for timing in &summary.timings {
        println!("  {:<16} {:>10.2}", timing.name, timing.millis);
    }
    println!(
        "frames: {} left eye, {} right eye, {} scene; {} gaze rows",
        summary.eye_frames.0, summary.eye_frames.1, summary.scene_frames, summary.gaze_rows
    );
    for (combo, (kept, dropped)) in &summary.calibration_kept {
        println!("calibration {combo}: kept {kept}, dropped {dropped}");
    }
    if let Some(report) = &summary.accuracy_heldout {
        println!("held-out accuracy (mean px, all rows / nearest row per scene frame):");
        for (key, acc) in &report.per_estimator {
            println!(
                "  {:<12} {:>9} / {:>9}",
                key.to_string(),
                acc.mean_px_all.map_or("-".into(), |v| format!("{v:.2}")),
                acc.mean_px_nearest
                    .map_or("-".into(), |v| format!("{v:.2}")),
            );
        }
    }
    println!(
        "validity over {} gaze rows, {} scene frames (valid rows % / scene frames with ≥1 valid %):",
        summary.validity.rows, summary.validity.scene_frames
    );
    for (key, v) in &summary.validity.per_estimator {
        println!(
            "  {:<12} {:>6.2} / {:>6.2}",
            key.to_string(),
            v.valid_fraction * 100.0,
            v.scene_fraction * 100.0
        );
    }
    for warning in &summary.warnings {
        println!("warning: {warning}");
    }
    println!("outputs in {}", summary.out_dir.display());
}

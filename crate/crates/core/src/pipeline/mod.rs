//! Pipeline configuration and stage orchestration.
//!
//! `run_process` executes the full stage chain over a recording directory
//! (features, eyeball/vectors, opening, movements, synchronization,
//! calibration, gaze, depth, CSV outputs) and reports per-stage timings.
//! `run_synth` and `run_eval` wrap the synthetic generator and the
//! ground-truth scorer.

mod config;
mod process;

pub use config::{EyeballFeatureSource, PipelineConfig};
pub use process::{run_eval, run_process, run_synth, PipelineError, ProcessSummary, StageTiming};

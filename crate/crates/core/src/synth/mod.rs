//! Synthetic recordings with exact ground truth.
//!
//! A [`SceneScript`] drives an analytic eye/scene world: eyeballs with known
//! center and radius, a gaze trajectory stitched from motion regimes, eyelid
//! curves that close during blinks, and a marker whose scene position follows
//! a chosen polynomial map of the gaze and whose area encodes a known depth.
//! Generated landmark streams load like any recorded data; the retained
//! ground truth scores every downstream stage.

mod generate;
mod score;
mod script;

pub use generate::{
    generate, read_ground_truth, write_recording, EyeFrameTruth, GeneratedRecording, GroundTruth,
    SceneFrameTruth,
};
pub use score::{score_pipeline, Confusion, PipelineOutputs, ScoreReport};
pub use script::{EyeTruth, Regime, RegimeKind, SceneScript, TrueGazeMap};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid script: {0}")]
    InvalidScript(String),
    #[error("outputs do not align with the ground truth: {0}")]
    Misaligned(String),
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Recording(#[from] crate::recording::RecordingError),
}

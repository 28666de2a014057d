//! Offline eye-tracking numerics.
//!
//! This crate turns per-frame landmark detections from a head-mounted eye
//! tracker (two eye cameras plus a scene camera) into derived eye features,
//! eye-movement labels, calibrated gaze estimates, and marker-based depth:
//!
//! - [`recording`]: landmark/manifest file ingestion and all CSV outputs.
//! - [`geometry`]: ellipse fits, eyelid splines, eye opening, marker polygons.
//! - [`eyeball`]: eyeball center/radius estimation and optical unit vectors.
//! - [`movement`]: fixation/saccade/pursuit/blink/error labeling.
//! - [`optim`]: shared numerical engines: Levenberg–Marquardt, polynomial
//!   feature maps, small MLPs trained by SGD, and KNN regression.
//! - [`calibration`]: stream synchronization, calibration-pair selection,
//!   and the bank of 24 gaze estimators.
//! - [`depth`]: marker-area-to-distance models (power law and KNN).
//! - [`synth`]: synthetic recording generator with exact ground truth, plus
//!   pipeline scoring against that truth.
//! - [`pipeline`]: configuration and stage orchestration for the CLI.

pub mod calibration;
pub mod depth;
pub mod eyeball;
pub mod geometry;
pub mod movement;
pub mod optim;
pub mod pipeline;
pub mod recording;
pub mod synth;

//! Scoring pipeline outputs against generated ground truth.

use std::collections::BTreeMap;
use std::path::Path;

use crate::calibration::EstimatorKey;
use crate::movement::MovementLabel;
use crate::recording::{
    read_depth_csv, read_features_csv, read_gaze_csv, read_movements_csv, DepthRecord,
    EyeFeaturesRecord, GazeRecord, MovementRecord,
};

use super::generate::GroundTruth;
use super::SynthError;

/// The file set one `process` run leaves in its output directory.
#[derive(Debug)]
pub struct PipelineOutputs {
    pub features_left: Vec<EyeFeaturesRecord>,
    pub features_right: Vec<EyeFeaturesRecord>,
    pub gaze: Vec<GazeRecord>,
    pub movements_left: Vec<MovementRecord>,
    pub movements_right: Vec<MovementRecord>,
    pub depth: Vec<DepthRecord>,
}

impl PipelineOutputs {
    /// Read every output CSV from a `process` output directory.
    pub fn read_dir(dir: &Path) -> Result<Self, SynthError> {
        Ok(Self {
            features_left: read_features_csv(&dir.join("features_left.csv"))?,
            features_right: read_features_csv(&dir.join("features_right.csv"))?,
            gaze: read_gaze_csv(&dir.join("gaze.csv"))?,
            movements_left: read_movements_csv(&dir.join("movements_left.csv"))?,
            movements_right: read_movements_csv(&dir.join("movements_right.csv"))?,
            depth: read_depth_csv(&dir.join("depth.csv"))?,
        })
    }
}

/// Confusion matrix over the five movement labels (rows = truth, columns =
/// output).
#[derive(Debug, Clone, Default)]
pub struct Confusion {
    pub counts: [[usize; 5]; 5],
}

impl Confusion {
    fn index(label: MovementLabel) -> usize {
        MovementLabel::ALL.iter().position(|l| *l == label).unwrap()
    }

    pub fn record(&mut self, truth: MovementLabel, output: MovementLabel) {
        self.counts[Self::index(truth)][Self::index(output)] += 1;
    }

    /// Per-class accuracy; `None` for classes absent from the truth.
    pub fn per_class_accuracy(&self) -> BTreeMap<MovementLabel, Option<f64>> {
        MovementLabel::ALL
            .iter()
            .map(|&label| {
                let i = Self::index(label);
                let total: usize = self.counts[i].iter().sum();
                let acc = (total > 0).then(|| self.counts[i][i] as f64 / total as f64);
                (label, acc)
            })
            .collect()
    }

    pub fn is_diagonal(&self) -> bool {
        self.counts
            .iter()
            .enumerate()
            .all(|(i, row)| row.iter().enumerate().all(|(j, &c)| i == j || c == 0))
    }
}

/// Deterministic comparison of pipeline outputs against the ground truth.
#[derive(Debug, Clone)]
pub struct ScoreReport {
    /// Mean gaze error per estimator over every scored row.
    pub gaze_mean_error_px: BTreeMap<EstimatorKey, f64>,
    /// Mean gaze error restricted to rows outside the calibration range.
    pub gaze_mean_error_heldout_px: BTreeMap<EstimatorKey, f64>,
    pub movement_confusion_left: Confusion,
    pub movement_confusion_right: Confusion,
    pub depth_mean_abs_error_powerlaw_cm: Option<f64>,
    pub depth_mean_abs_error_knn_cm: Option<f64>,
    pub eyeball_center_error_left_px: Option<f64>,
    pub eyeball_center_error_right_px: Option<f64>,
    pub eyeball_radius_rel_error_left: Option<f64>,
    pub eyeball_radius_rel_error_right: Option<f64>,
}

impl std::fmt::Display for ScoreReport {
    /// key=value report text.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use std::fmt::Write as _;
        let mut s = String::new();
        for (key, err) in &self.gaze_mean_error_px {
            let _ = writeln!(s, "gaze_error_px.{key}={err}");
        }
        for (key, err) in &self.gaze_mean_error_heldout_px {
            let _ = writeln!(s, "gaze_error_heldout_px.{key}={err}");
        }
        for (name, confusion) in [
            ("left", &self.movement_confusion_left),
            ("right", &self.movement_confusion_right),
        ] {
            for (label, acc) in confusion.per_class_accuracy() {
                if let Some(acc) = acc {
                    let _ = writeln!(s, "movement_accuracy_{name}.{}={acc}", label.as_str());
                }
            }
        }
        if let Some(v) = self.depth_mean_abs_error_powerlaw_cm {
            let _ = writeln!(s, "depth_error_powerlaw_cm={v}");
        }
        if let Some(v) = self.depth_mean_abs_error_knn_cm {
            let _ = writeln!(s, "depth_error_knn_cm={v}");
        }
        if let Some(v) = self.eyeball_center_error_left_px {
            let _ = writeln!(s, "eyeball_center_error_left_px={v}");
        }
        if let Some(v) = self.eyeball_center_error_right_px {
            let _ = writeln!(s, "eyeball_center_error_right_px={v}");
        }
        if let Some(v) = self.eyeball_radius_rel_error_left {
            let _ = writeln!(s, "eyeball_radius_rel_error_left={v}");
        }
        if let Some(v) = self.eyeball_radius_rel_error_right {
            let _ = writeln!(s, "eyeball_radius_rel_error_right={v}");
        }
        f.write_str(&s)
    }
}

/// Score pipeline outputs against the ground truth.
///
/// Alignment is exact: movement streams must match the truth frame count and
/// timestamps, gaze rows must reference known eye timestamps, and depth rows
/// known scene frames.
pub fn score_pipeline(
    outputs: &PipelineOutputs,
    truth: &GroundTruth,
) -> Result<ScoreReport, SynthError> {
    // Movements: one label per eye frame, timestamps aligned.
    let mut confusion = Vec::new();
    for (name, records, frames) in [
        ("left", &outputs.movements_left, &truth.left),
        ("right", &outputs.movements_right, &truth.right),
    ] {
        if records.len() != frames.len() {
            return Err(SynthError::Misaligned(format!(
                "movements_{name}: {} rows vs {} truth frames",
                records.len(),
                frames.len()
            )));
        }
        let mut c = Confusion::default();
        for (rec, truth_frame) in records.iter().zip(frames) {
            if rec.timestamp_ns != truth_frame.timestamp_ns {
                return Err(SynthError::Misaligned(format!(
                    "movements_{name}: timestamp {} vs truth {}",
                    rec.timestamp_ns, truth_frame.timestamp_ns
                )));
            }
            c.record(truth_frame.label, rec.label);
        }
        confusion.push(c);
    }
    let movement_confusion_right = confusion.pop().unwrap();
    let movement_confusion_left = confusion.pop().unwrap();

    // Gaze: rows join the truth by their left-eye timestamp.
    let truth_by_left_ts: BTreeMap<i64, &super::generate::EyeFrameTruth> =
        truth.left.iter().map(|f| (f.timestamp_ns, f)).collect();
    let in_calib = |scene_id: u64| {
        truth
            .calib_range
            .is_none_or(|(a, b)| scene_id >= a && scene_id <= b)
    };
    let mut sums: BTreeMap<EstimatorKey, (f64, usize, f64, usize)> = BTreeMap::new();
    let keys = EstimatorKey::all();
    for row in &outputs.gaze {
        let Some(frame) = truth_by_left_ts.get(&row.left_timestamp_ns) else {
            return Err(SynthError::Misaligned(format!(
                "gaze row references unknown eye timestamp {}",
                row.left_timestamp_ns
            )));
        };
        if row.estimates.len() != keys.len() {
            return Err(SynthError::Misaligned(
                "gaze row does not carry 24 estimates".into(),
            ));
        }
        let heldout = !in_calib(row.scene_frame_id);
        for (key, est) in keys.iter().zip(&row.estimates) {
            let Some((x, y)) = est else { continue };
            let err = ((x - frame.gaze_scene.0).powi(2) + (y - frame.gaze_scene.1).powi(2)).sqrt();
            let entry = sums.entry(*key).or_insert((0.0, 0, 0.0, 0));
            entry.0 += err;
            entry.1 += 1;
            if heldout {
                entry.2 += err;
                entry.3 += 1;
            }
        }
    }
    let mut gaze_mean_error_px = BTreeMap::new();
    let mut gaze_mean_error_heldout_px = BTreeMap::new();
    for (key, (sum, n, sum_h, n_h)) in sums {
        if n > 0 {
            gaze_mean_error_px.insert(key, sum / n as f64);
        }
        if n_h > 0 {
            gaze_mean_error_heldout_px.insert(key, sum_h / n_h as f64);
        }
    }

    // Depth rows against per-scene-frame truth.
    let scene_truth: BTreeMap<u64, &super::generate::SceneFrameTruth> =
        truth.scene.iter().map(|f| (f.frame_id, f)).collect();
    let mut law = (0.0, 0usize);
    let mut knn = (0.0, 0usize);
    for row in &outputs.depth {
        let Some(frame) = scene_truth.get(&row.scene_frame_id) else {
            return Err(SynthError::Misaligned(format!(
                "depth row references unknown scene frame {}",
                row.scene_frame_id
            )));
        };
        if let Some(d) = row.depth_cm_powerlaw {
            law.0 += (d - frame.depth_cm).abs();
            law.1 += 1;
        }
        if let Some(d) = row.depth_cm_knn {
            knn.0 += (d - frame.depth_cm).abs();
            knn.1 += 1;
        }
    }

    // Eyeball recovery from the feature records (constant per recording).
    let eyeball_errors = |records: &[EyeFeaturesRecord], truth: (f64, f64, f64)| {
        records
            .iter()
            .find_map(|r| r.eyeball)
            .map(|(cx, cy, radius)| {
                (
                    ((cx - truth.0).powi(2) + (cy - truth.1).powi(2)).sqrt(),
                    (radius - truth.2).abs() / truth.2,
                )
            })
    };
    let left_eye = eyeball_errors(&outputs.features_left, truth.left_eyeball);
    let right_eye = eyeball_errors(&outputs.features_right, truth.right_eyeball);

    Ok(ScoreReport {
        gaze_mean_error_px,
        gaze_mean_error_heldout_px,
        movement_confusion_left,
        movement_confusion_right,
        depth_mean_abs_error_powerlaw_cm: (law.1 > 0).then(|| law.0 / law.1 as f64),
        depth_mean_abs_error_knn_cm: (knn.1 > 0).then(|| knn.0 / knn.1 as f64),
        eyeball_center_error_left_px: left_eye.map(|e| e.0),
        eyeball_center_error_right_px: right_eye.map(|e| e.0),
        eyeball_radius_rel_error_left: left_eye.map(|e| e.1),
        eyeball_radius_rel_error_right: right_eye.map(|e| e.1),
    })
}

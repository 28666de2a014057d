//! Eye-movement labeling from optical-vector velocities and eye opening.
//!
//! Every eye frame receives exactly one label. The default classifier is a
//! threshold rule on the angle between consecutive pupil/iris vectors and on
//! the opening relative to the recording median; a trainable softmax network
//! with one hidden layer of 100 neurons covers the same motion classes when
//! labeled data is available. Frames whose pupil and iris are both invalid
//! while the eye is open are errors in either path.

use ndarray::Array2;

use crate::optim::{
    mlp_train, MlpDataset, MlpModel, MlpTrainSettings, OptimError, OutputActivation,
};

#[derive(Debug, thiserror::Error)]
pub enum MovementError {
    /// Training data must contain every motion class at least once.
    #[error("training data is missing the {0:?} class")]
    MissingClass(MovementLabel),
    #[error("label file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// Per-frame movement label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum MovementLabel {
    Fixation,
    Saccade,
    SmoothPursuit,
    Blink,
    Error,
}

impl MovementLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Fixation => "fixation",
            Self::Saccade => "saccade",
            Self::SmoothPursuit => "smooth_pursuit",
            Self::Blink => "blink",
            Self::Error => "error",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fixation" => Self::Fixation,
            "saccade" => Self::Saccade,
            "smooth_pursuit" => Self::SmoothPursuit,
            "blink" => Self::Blink,
            "error" => Self::Error,
            _ => return None,
        })
    }

    pub const ALL: [MovementLabel; 5] = [
        Self::Fixation,
        Self::Saccade,
        Self::SmoothPursuit,
        Self::Blink,
        Self::Error,
    ];
}

/// The four classes the trainable network distinguishes; errors are always
/// produced by the validity pre-filter instead.
pub const MOTION_CLASSES: [MovementLabel; 4] = [
    MovementLabel::Fixation,
    MovementLabel::Saccade,
    MovementLabel::SmoothPursuit,
    MovementLabel::Blink,
];

/// Vector and opening state of one frame, as consumed by feature
/// extraction.
#[derive(Debug, Clone, Copy, Default)]
pub struct FrameMotionState {
    pub pupil_vector: Option<(f64, f64, f64)>,
    pub iris_vector: Option<(f64, f64, f64)>,
    pub opening: Option<f64>,
}

/// Frame-to-frame motion features.
#[derive(Debug, Clone, Copy)]
pub struct MotionFeatures {
    /// Angle between consecutive pupil vectors, radians per frame.
    pub pupil_angle_delta: f64,
    pub pupil_valid: bool,
    /// Angle between consecutive iris vectors, radians per frame.
    pub iris_angle_delta: f64,
    pub iris_valid: bool,
    /// Change of the eye opening, px per frame.
    pub opening_delta: f64,
    /// Current eye opening, px.
    pub opening: f64,
    pub opening_valid: bool,
}

fn vector_angle(a: (f64, f64, f64), b: (f64, f64, f64)) -> f64 {
    let dot = a.0 * b.0 + a.1 * b.1 + a.2 * b.2;
    dot.clamp(-1.0, 1.0).acos()
}

/// Features of frame `current` relative to `previous`. The first frame of a
/// stream passes `None` and gets zero deltas.
pub fn extract_motion_features(
    previous: Option<&FrameMotionState>,
    current: &FrameMotionState,
) -> MotionFeatures {
    let pupil = match (previous, current.pupil_vector) {
        (Some(prev), Some(cur)) => prev.pupil_vector.map(|p| vector_angle(p, cur)),
        (None, Some(_)) => Some(0.0),
        _ => None,
    };
    let iris = match (previous, current.iris_vector) {
        (Some(prev), Some(cur)) => prev.iris_vector.map(|p| vector_angle(p, cur)),
        (None, Some(_)) => Some(0.0),
        _ => None,
    };
    let opening_delta = match (previous, current.opening) {
        (Some(prev), Some(cur)) => prev.opening.map(|p| cur - p),
        (None, Some(_)) => Some(0.0),
        _ => None,
    };
    MotionFeatures {
        pupil_angle_delta: pupil.unwrap_or(0.0),
        pupil_valid: pupil.is_some(),
        iris_angle_delta: iris.unwrap_or(0.0),
        iris_valid: iris.is_some(),
        opening_delta: opening_delta.unwrap_or(0.0),
        opening: current.opening.unwrap_or(0.0),
        opening_valid: current.opening.is_some(),
    }
}

/// Median of the valid openings of a recording; `None` when nothing is
/// valid.
pub fn median_opening(openings: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let mut values: Vec<f64> = openings.into_iter().flatten().collect();
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values[values.len() / 2])
}

/// Velocity thresholds for the rule-based classifier, in frame units.
#[derive(Debug, Clone)]
pub struct ThresholdConfig {
    /// Blink when the opening drops below this fraction of the recording
    /// median.
    pub blink_fraction: f64,
    /// Angle delta above which a frame is a saccade, rad/frame.
    pub saccade_threshold: f64,
    /// Lower edge of the smooth-pursuit band, rad/frame.
    pub pursuit_low: f64,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            blink_fraction: 0.3,
            saccade_threshold: 0.02,
            pursuit_low: 0.004,
        }
    }
}

/// Rule-based movement classifier bound to a recording's median opening.
///
/// Precedence: Error ≻ Blink ≻ Saccade ≻ SmoothPursuit ≻ Fixation.
#[derive(Debug, Clone)]
pub struct ThresholdClassifier {
    pub config: ThresholdConfig,
    pub median_opening: Option<f64>,
}

impl ThresholdClassifier {
    pub fn new(config: ThresholdConfig, median_opening: Option<f64>) -> Self {
        Self {
            config,
            median_opening,
        }
    }

    fn blink_threshold(&self) -> Option<f64> {
        self.median_opening.map(|m| m * self.config.blink_fraction)
    }

    /// True on frames with no usable pupil or iris while the eye is open:
    /// the detector-error signature.
    pub fn error_rule(&self, f: &MotionFeatures) -> bool {
        if f.pupil_valid || f.iris_valid {
            return false;
        }
        match (f.opening_valid, self.blink_threshold()) {
            (true, Some(threshold)) => f.opening >= threshold,
            // Without an opening signal (or a median to compare against)
            // nothing distinguishes the frame from a failure.
            _ => true,
        }
    }

    pub fn classify(&self, f: &MotionFeatures) -> MovementLabel {
        if !f.pupil_valid && !f.iris_valid {
            return if self.error_rule(f) {
                MovementLabel::Error
            } else {
                MovementLabel::Blink
            };
        }
        if let Some(threshold) = self.blink_threshold() {
            if f.opening_valid && f.opening < threshold {
                return MovementLabel::Blink;
            }
        }
        let mut sum = 0.0;
        let mut count = 0;
        if f.pupil_valid {
            sum += f.pupil_angle_delta;
            count += 1;
        }
        if f.iris_valid {
            sum += f.iris_angle_delta;
            count += 1;
        }
        let delta = sum / count as f64;
        if delta > self.config.saccade_threshold {
            MovementLabel::Saccade
        } else if delta > self.config.pursuit_low {
            MovementLabel::SmoothPursuit
        } else {
            MovementLabel::Fixation
        }
    }
}

/// A labeled feature row for classifier training.
#[derive(Debug, Clone, Copy)]
pub struct LabeledMotion {
    pub timestamp_ns: i64,
    pub pupil_delta: f64,
    pub iris_delta: f64,
    pub opening_delta: f64,
    pub label: MovementLabel,
}

/// Trained softmax movement classifier over the four motion classes.
#[derive(Debug)]
pub struct MovementMlp {
    model: MlpModel,
    feature_mean: [f64; 3],
    feature_std: [f64; 3],
}

impl MovementMlp {
    fn standardized(&self, f: &MotionFeatures) -> [f64; 3] {
        let raw = [f.pupil_angle_delta, f.iris_angle_delta, f.opening_delta];
        let mut out = [0.0; 3];
        for i in 0..3 {
            out[i] = (raw[i] - self.feature_mean[i]) / self.feature_std[i];
        }
        out
    }

    /// Classify one frame. The error pre-filter runs before the network;
    /// frames without any vector data never reach it.
    pub fn classify(
        &self,
        f: &MotionFeatures,
        error_filter: &ThresholdClassifier,
    ) -> MovementLabel {
        if !f.pupil_valid && !f.iris_valid {
            return if error_filter.error_rule(f) {
                MovementLabel::Error
            } else {
                MovementLabel::Blink
            };
        }
        let x = self.standardized(f);
        let probs = self.model.eval(&x).expect("input dim fixed at 3");
        let best = probs
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        MOTION_CLASSES[best]
    }
}

/// Train the movement network on labeled rows.
///
/// Rows labeled `Error` are ignored (the pre-filter owns that class); each
/// of the four motion classes must appear at least once.
pub fn train_movement_mlp(
    rows: &[LabeledMotion],
    settings: &MlpTrainSettings,
) -> Result<MovementMlp, MovementError> {
    let usable: Vec<&LabeledMotion> = rows
        .iter()
        .filter(|r| r.label != MovementLabel::Error)
        .collect();
    if usable.is_empty() {
        return Err(MovementError::Optim(OptimError::EmptyDataset));
    }
    for class in MOTION_CLASSES {
        if !usable.iter().any(|r| r.label == class) {
            return Err(MovementError::MissingClass(class));
        }
    }

    let n = usable.len();
    let mut inputs = Array2::zeros((n, 3));
    let mut targets = Array2::zeros((n, MOTION_CLASSES.len()));
    for (i, row) in usable.iter().enumerate() {
        inputs[(i, 0)] = row.pupil_delta;
        inputs[(i, 1)] = row.iris_delta;
        inputs[(i, 2)] = row.opening_delta;
        let class = MOTION_CLASSES.iter().position(|c| *c == row.label).unwrap();
        targets[(i, class)] = 1.0;
    }
    let mut feature_mean = [0.0; 3];
    let mut feature_std = [0.0; 3];
    for j in 0..3 {
        let col = inputs.column(j);
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        feature_mean[j] = mean;
        feature_std[j] = var.sqrt().max(1e-12);
        for i in 0..n {
            inputs[(i, j)] = (inputs[(i, j)] - feature_mean[j]) / feature_std[j];
        }
    }

    let data = MlpDataset { inputs, targets };
    let trained = mlp_train(
        &[3, 100, MOTION_CLASSES.len()],
        OutputActivation::Softmax,
        &data,
        settings,
    )?;
    Ok(MovementMlp {
        model: trained.model,
        feature_mean,
        feature_std,
    })
}

/// Write a label training file: `timestamp_ns,pupil_delta,iris_delta,opening_delta,label`.
pub fn write_label_csv(
    path: &std::path::Path,
    rows: &[LabeledMotion],
) -> Result<(), MovementError> {
    use std::fmt::Write as _;
    let mut out = String::from("timestamp_ns,pupil_delta,iris_delta,opening_delta,label\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.timestamp_ns,
            r.pupil_delta,
            r.iris_delta,
            r.opening_delta,
            r.label.as_str()
        );
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// Read a label training file.
pub fn read_label_csv(path: &std::path::Path) -> Result<Vec<LabeledMotion>, MovementError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| MovementError::Format("empty label file".into()))?;
    if header != "timestamp_ns,pupil_delta,iris_delta,opening_delta,label" {
        return Err(MovementError::Format(format!("bad header: {header}")));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 5 {
            return Err(MovementError::Format(format!(
                "line {}: bad field count",
                i + 2
            )));
        }
        let parse_f = |s: &str| {
            s.parse::<f64>()
                .map_err(|_| MovementError::Format(format!("line {}: bad float {s}", i + 2)))
        };
        rows.push(LabeledMotion {
            timestamp_ns: parts[0]
                .parse()
                .map_err(|_| MovementError::Format(format!("line {}: bad timestamp", i + 2)))?,
            pupil_delta: parse_f(parts[1])?,
            iris_delta: parse_f(parts[2])?,
            opening_delta: parse_f(parts[3])?,
            label: MovementLabel::parse(parts[4]).ok_or_else(|| {
                MovementError::Format(format!("line {}: bad label {}", i + 2, parts[4]))
            })?,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    fn state(v: Option<(f64, f64, f64)>, opening: Option<f64>) -> FrameMotionState {
        FrameMotionState {
            pupil_vector: v,
            iris_vector: v,
            opening,
        }
    }

    #[test]
    fn identical_vectors_have_zero_delta() {
        let a = state(Some((0.0, 0.0, 1.0)), Some(10.0));
        let f = extract_motion_features(Some(&a), &a);
        assert_eq!(f.pupil_angle_delta, 0.0);
        assert!(f.pupil_valid);
    }

    #[test]
    fn orthogonal_vectors_measure_half_pi() {
        let a = state(Some((0.0, 0.0, 1.0)), Some(10.0));
        let b = state(Some((1.0, 0.0, 0.0)), Some(10.0));
        let f = extract_motion_features(Some(&a), &b);
        assert_relative_eq!(f.pupil_angle_delta, std::f64::consts::FRAC_PI_2);
    }

    #[test]
    #[allow(clippy::approx_constant)] // 0.5236 is the contract's stated value
    fn generated_rotation_of_thirty_degrees_per_frame() {
        let step = 30.0f64.to_radians();
        let frames: Vec<FrameMotionState> = (0..3)
            .map(|k| {
                let a = step * k as f64;
                state(Some((a.sin(), 0.0, a.cos())), Some(10.0))
            })
            .collect();
        for k in 1..frames.len() {
            let f = extract_motion_features(Some(&frames[k - 1]), &frames[k]);
            assert_relative_eq!(f.pupil_angle_delta, 0.5236, epsilon = 1e-4);
            assert_relative_eq!(f.pupil_angle_delta, step, epsilon = 1e-6);
        }
    }

    #[test]
    fn first_frame_gets_zero_deltas() {
        let a = state(Some((0.1, 0.0, 0.99)), Some(8.0));
        let f = extract_motion_features(None, &a);
        assert_eq!(f.pupil_angle_delta, 0.0);
        assert!(f.pupil_valid);
        assert_eq!(f.opening_delta, 0.0);
    }

    #[test]
    fn missing_components_invalidate_features() {
        let a = state(Some((0.0, 0.0, 1.0)), Some(10.0));
        let b = state(None, None);
        let f = extract_motion_features(Some(&a), &b);
        assert!(!f.pupil_valid);
        assert!(!f.opening_valid);
    }

    fn classifier(median: f64) -> ThresholdClassifier {
        ThresholdClassifier::new(ThresholdConfig::default(), Some(median))
    }

    fn features(delta: f64, opening: f64, valid: bool) -> MotionFeatures {
        MotionFeatures {
            pupil_angle_delta: delta,
            pupil_valid: valid,
            iris_angle_delta: delta,
            iris_valid: valid,
            opening_delta: 0.0,
            opening,
            opening_valid: true,
        }
    }

    #[test]
    fn error_rule_fires_for_open_eye_without_features() {
        let c = classifier(10.0);
        let f = features(0.0, 8.0, false);
        assert_eq!(c.classify(&f), MovementLabel::Error);
        assert!(c.error_rule(&f));
    }

    #[test]
    fn low_opening_is_a_blink() {
        let c = classifier(10.0);
        assert_eq!(c.classify(&features(0.0, 1.0, true)), MovementLabel::Blink);
        // Invalid vectors with a closed eye are a blink, not an error.
        assert_eq!(c.classify(&features(0.0, 1.0, false)), MovementLabel::Blink);
    }

    #[test]
    fn zero_delta_open_eye_is_fixation() {
        let c = classifier(10.0);
        assert_eq!(
            c.classify(&features(0.0, 9.0, true)),
            MovementLabel::Fixation
        );
    }

    #[test]
    fn velocity_bands_order_correctly() {
        let c = classifier(10.0);
        assert_eq!(
            c.classify(&features(0.01, 9.0, true)),
            MovementLabel::SmoothPursuit
        );
        assert_eq!(
            c.classify(&features(0.05, 9.0, true)),
            MovementLabel::Saccade
        );
        assert_eq!(
            c.classify(&features(0.003, 9.0, true)),
            MovementLabel::Fixation
        );
    }

    #[test]
    fn classification_is_invariant_to_opening_scale() {
        let mut rng = StdRng::seed_from_u64(10);
        for _ in 0..500 {
            let median = rng.gen_range(5.0..20.0);
            let f = MotionFeatures {
                pupil_angle_delta: rng.gen_range(0.0..0.06),
                pupil_valid: rng.gen_bool(0.9),
                iris_angle_delta: rng.gen_range(0.0..0.06),
                iris_valid: rng.gen_bool(0.9),
                opening_delta: rng.gen_range(-2.0..2.0),
                opening: rng.gen_range(0.0..25.0),
                opening_valid: rng.gen_bool(0.95),
            };
            let scale = rng.gen_range(0.1..50.0);
            let scaled = MotionFeatures {
                opening: f.opening * scale,
                opening_delta: f.opening_delta * scale,
                ..f
            };
            let a = classifier(median).classify(&f);
            let b = classifier(median * scale).classify(&scaled);
            assert_eq!(a, b, "scale {scale}");
        }
    }

    fn synthetic_rows(n_per_class: usize, seed: u64) -> Vec<LabeledMotion> {
        let mut rng = StdRng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut ts = 0i64;
        for _ in 0..n_per_class {
            let mut push = |label, p: f64, i: f64, o: f64| {
                rows.push(LabeledMotion {
                    timestamp_ns: ts,
                    pupil_delta: p,
                    iris_delta: i,
                    opening_delta: o,
                    label,
                });
                ts += 5_000_000;
            };
            let jitter = rng.gen_range(-0.0005..0.0005);
            push(MovementLabel::Fixation, 0.001 + jitter, 0.001 + jitter, 0.0);
            push(
                MovementLabel::SmoothPursuit,
                rng.gen_range(0.006..0.018),
                rng.gen_range(0.006..0.018),
                0.0,
            );
            push(
                MovementLabel::Saccade,
                rng.gen_range(0.03..0.08),
                rng.gen_range(0.03..0.08),
                0.0,
            );
            push(
                MovementLabel::Blink,
                0.001,
                0.001,
                if rng.gen_bool(0.5) { 1.3 } else { -1.3 },
            );
        }
        rows
    }

    fn light_settings(seed: u64) -> MlpTrainSettings {
        MlpTrainSettings {
            learning_rate: 0.01,
            epochs_per_stage: 300,
            restarts: 2,
            seed,
            ..MlpTrainSettings::default()
        }
    }

    #[test]
    fn mlp_reaches_per_class_accuracy_on_held_out_rows() {
        let train = synthetic_rows(120, 1);
        let test = synthetic_rows(40, 2);
        let mlp = train_movement_mlp(&train, &light_settings(7)).unwrap();
        let filter = classifier(10.0);
        let mut correct = std::collections::BTreeMap::new();
        let mut total = std::collections::BTreeMap::new();
        for row in &test {
            let f = MotionFeatures {
                pupil_angle_delta: row.pupil_delta,
                pupil_valid: true,
                iris_angle_delta: row.iris_delta,
                iris_valid: true,
                opening_delta: row.opening_delta,
                opening: 10.0,
                opening_valid: true,
            };
            let got = mlp.classify(&f, &filter);
            *total.entry(row.label).or_insert(0) += 1;
            if got == row.label {
                *correct.entry(row.label).or_insert(0) += 1;
            }
        }
        for class in MOTION_CLASSES {
            let acc = *correct.get(&class).unwrap_or(&0) as f64 / total[&class] as f64;
            assert!(acc >= 0.9, "{:?} accuracy {acc}", class);
        }
    }

    #[test]
    fn single_class_training_is_rejected() {
        let rows: Vec<LabeledMotion> = (0..10)
            .map(|i| LabeledMotion {
                timestamp_ns: i,
                pupil_delta: 0.0,
                iris_delta: 0.0,
                opening_delta: 0.0,
                label: MovementLabel::Fixation,
            })
            .collect();
        assert!(matches!(
            train_movement_mlp(&rows, &light_settings(1)),
            Err(MovementError::MissingClass(_))
        ));
    }

    #[test]
    fn training_is_deterministic_under_a_seed() {
        let rows = synthetic_rows(20, 3);
        let settings = MlpTrainSettings {
            epochs_per_stage: 40,
            ..light_settings(11)
        };
        let a = train_movement_mlp(&rows, &settings).unwrap();
        let b = train_movement_mlp(&rows, &settings).unwrap();
        for (wa, wb) in a.model.weights.iter().zip(&b.model.weights) {
            assert_eq!(wa.as_slice().unwrap(), wb.as_slice().unwrap());
        }
    }

    #[test]
    fn mlp_error_prefilter_overrides_the_network() {
        let rows = synthetic_rows(20, 4);
        let settings = MlpTrainSettings {
            epochs_per_stage: 40,
            ..light_settings(13)
        };
        let mlp = train_movement_mlp(&rows, &settings).unwrap();
        let f = MotionFeatures {
            pupil_angle_delta: 0.0,
            pupil_valid: false,
            iris_angle_delta: 0.0,
            iris_valid: false,
            opening_delta: 0.0,
            opening: 9.0,
            opening_valid: true,
        };
        assert_eq!(mlp.classify(&f, &classifier(10.0)), MovementLabel::Error);
    }

    #[test]
    fn label_csv_round_trip() {
        let rows = synthetic_rows(3, 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        write_label_csv(&path, &rows).unwrap();
        let back = read_label_csv(&path).unwrap();
        assert_eq!(rows.len(), back.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.timestamp_ns, b.timestamp_ns);
            assert_eq!(a.pupil_delta, b.pupil_delta);
            assert_eq!(a.label, b.label);
        }
    }
}

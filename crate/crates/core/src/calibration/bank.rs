//! The bank of 24 gaze estimators and its evaluation.

use std::collections::BTreeMap;
use std::path::Path;

use ndarray::Array2;

use crate::optim::{
    fit_polynomial_lm, load_model, mlp_train, save_model, LmSettings, MlpDataset, MlpTrainSettings,
    OutputActivation, SavedModel,
};

use super::select::CalibrationSelection;
use super::{CalibrationError, Combo, EstimatorKey, Feature, Method};

/// Derived per-frame gaze features of one eye.
#[derive(Debug, Clone, Copy, Default)]
pub struct EyeFrameFeatures {
    pub frame_id: u64,
    pub timestamp_ns: i64,
    pub pupil_center: Option<(f64, f64)>,
    pub iris_center: Option<(f64, f64)>,
    pub pupil_vector: Option<(f64, f64, f64)>,
    pub iris_vector: Option<(f64, f64, f64)>,
}

/// Frame-indexed features of both eyes plus the normalization context.
///
/// Feature vectors follow the shared recipe: centers divided by the eye
/// resolution; vectors kept unit with the normalized eyeball center
/// prepended; binocular variants concatenate left then right.
#[derive(Debug, Clone)]
pub struct FeatureTable {
    pub eye_resolution: (f64, f64),
    pub scene_resolution: (f64, f64),
    pub left: BTreeMap<u64, EyeFrameFeatures>,
    pub right: BTreeMap<u64, EyeFrameFeatures>,
    /// Eyeball centers divided by the eye resolution.
    pub left_eyeball_norm: (f64, f64),
    pub right_eyeball_norm: (f64, f64),
}

impl FeatureTable {
    fn eye_vector(&self, feature: Feature, combo_left: bool, frame: u64) -> Option<Vec<f64>> {
        let (frames, eyeball) = if combo_left {
            (&self.left, self.left_eyeball_norm)
        } else {
            (&self.right, self.right_eyeball_norm)
        };
        let f = frames.get(&frame)?;
        let (w, h) = self.eye_resolution;
        match feature {
            Feature::PupilCenter => f.pupil_center.map(|(x, y)| vec![x / w, y / h]),
            Feature::IrisCenter => f.iris_center.map(|(x, y)| vec![x / w, y / h]),
            Feature::PupilVector => f
                .pupil_vector
                .map(|(x, y, z)| vec![eyeball.0, eyeball.1, x, y, z]),
            Feature::IrisVector => f
                .iris_vector
                .map(|(x, y, z)| vec![eyeball.0, eyeball.1, x, y, z]),
        }
    }

    /// Assemble the normalized feature vector for an estimator input type.
    /// `None` when any required component is invalid.
    pub fn feature_vector(
        &self,
        feature: Feature,
        combo: Combo,
        left_frame: u64,
        right_frame: u64,
    ) -> Option<Vec<f64>> {
        match combo {
            Combo::Left => self.eye_vector(feature, true, left_frame),
            Combo::Right => self.eye_vector(feature, false, right_frame),
            Combo::Binocular => {
                let mut v = self.eye_vector(feature, true, left_frame)?;
                v.extend(self.eye_vector(feature, false, right_frame)?);
                Some(v)
            }
        }
    }
}

/// One fitted estimator.
#[derive(Debug)]
pub struct FittedEstimator {
    pub key: EstimatorKey,
    pub model: SavedModel,
    pub n_train: usize,
}

impl FittedEstimator {
    fn predict_norm(&self, features: &[f64]) -> Option<(f64, f64)> {
        let out = match &self.model {
            SavedModel::Poly(p) => p.eval(features).ok()?,
            SavedModel::Mlp(m) => m.eval(features).ok()?,
        };
        Some((out[0], out[1]))
    }
}

/// All fitted estimators; keys without enough valid calibration data are
/// absent.
#[derive(Debug)]
pub struct GazeEstimatorBank {
    pub estimators: BTreeMap<EstimatorKey, FittedEstimator>,
    pub scene_resolution: (f64, f64),
    /// Keys that could not be fitted, with the reason.
    pub skipped: Vec<(EstimatorKey, String)>,
}

impl GazeEstimatorBank {
    pub fn get(&self, key: &EstimatorKey) -> Option<&FittedEstimator> {
        self.estimators.get(key)
    }

    /// Persist every estimator as `<key>.model` inside `dir`.
    pub fn save_dir(&self, dir: &Path) -> std::io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (key, est) in &self.estimators {
            save_model(&dir.join(format!("{key}.model")), &est.model)
                .map_err(|e| std::io::Error::other(e.to_string()))?;
        }
        Ok(())
    }

    /// Load whatever `<key>.model` files exist in `dir`.
    pub fn load_dir(dir: &Path, scene_resolution: (f64, f64)) -> std::io::Result<Self> {
        let mut estimators = BTreeMap::new();
        for key in EstimatorKey::all() {
            let path = dir.join(format!("{key}.model"));
            if path.is_file() {
                let model = load_model(&path).map_err(|e| std::io::Error::other(e.to_string()))?;
                estimators.insert(
                    key,
                    FittedEstimator {
                        key,
                        model,
                        n_train: 0,
                    },
                );
            }
        }
        Ok(Self {
            estimators,
            scene_resolution,
            skipped: Vec::new(),
        })
    }
}

/// Settings for fitting the estimator bank.
#[derive(Debug, Clone)]
pub struct BankSettings {
    pub poly_degree: u32,
    pub lm: LmSettings,
    pub nn: MlpTrainSettings,
    /// Hidden layers of the gaze networks.
    pub nn_hidden: Vec<usize>,
}

impl Default for BankSettings {
    fn default() -> Self {
        Self {
            poly_degree: 2,
            lm: LmSettings::default(),
            nn: MlpTrainSettings::default(),
            nn_hidden: vec![50, 20],
        }
    }
}

/// Fit all 24 estimators from the selected calibration pairs.
///
/// Per-eye estimators only see frames where their eye is valid, binocular
/// ones where both are (that filtering already happened during selection).
/// An estimator whose data or fit is unusable is skipped, not fatal. Each
/// estimator trains under its own seed derived from the canonical index.
pub fn fit_gaze_bank(
    selection: &CalibrationSelection,
    scene_resolution: (f64, f64),
    settings: &BankSettings,
) -> GazeEstimatorBank {
    let mut estimators = BTreeMap::new();
    let mut skipped = Vec::new();
    for key in EstimatorKey::all() {
        let Some(combo_sel) = selection.combos.get(&key.combo) else {
            skipped.push((key, "combination has too little valid data".to_string()));
            continue;
        };
        let pairs = &combo_sel.pairs[&key.feature];
        if pairs.is_empty() {
            skipped.push((key, "no valid pairs for this feature".to_string()));
            continue;
        }
        let xs: Vec<Vec<f64>> = pairs.iter().map(|p| p.feature_vector.clone()).collect();
        let ys: Vec<Vec<f64>> = pairs
            .iter()
            .map(|p| {
                vec![
                    p.target.0 / scene_resolution.0,
                    p.target.1 / scene_resolution.1,
                ]
            })
            .collect();

        let fitted = match key.method {
            Method::Lm => fit_polynomial_lm(&xs, &ys, settings.poly_degree, &settings.lm)
                .map(|(model, _)| SavedModel::Poly(model)),
            Method::Nn => {
                let n = xs.len();
                let dim = xs[0].len();
                let inputs = Array2::from_shape_fn((n, dim), |(i, j)| xs[i][j]);
                let targets = Array2::from_shape_fn((n, 2), |(i, j)| ys[i][j]);
                let mut layers = vec![dim];
                layers.extend_from_slice(&settings.nn_hidden);
                layers.push(2);
                let nn_settings = MlpTrainSettings {
                    seed: settings.nn.seed + key.index() as u64,
                    ..settings.nn.clone()
                };
                mlp_train(
                    &layers,
                    OutputActivation::Identity,
                    &MlpDataset { inputs, targets },
                    &nn_settings,
                )
                .map(|t| SavedModel::Mlp(t.model))
            }
        };
        match fitted {
            Ok(model) => {
                estimators.insert(
                    key,
                    FittedEstimator {
                        key,
                        model,
                        n_train: pairs.len(),
                    },
                );
            }
            Err(e) => skipped.push((key, e.to_string())),
        }
    }
    GazeEstimatorBank {
        estimators,
        scene_resolution,
        skipped,
    }
}

/// A single gaze estimate.
#[derive(Debug, Clone, Copy)]
pub struct GazeEstimate {
    pub key: EstimatorKey,
    pub point: (f64, f64),
}

/// One output gaze row: a synchronized eye-frame pair with all estimates in
/// canonical order.
#[derive(Debug, Clone)]
pub struct GazeRow {
    pub scene_frame_id: u64,
    pub left_frame_id: u64,
    pub right_frame_id: u64,
    pub left_timestamp_ns: i64,
    pub right_timestamp_ns: i64,
    /// This row's left frame is the scene frame's nearest eye frame.
    pub nearest: bool,
    pub estimates: Vec<Option<(f64, f64)>>,
}

/// Evaluate every fitted estimator whose inputs are valid on this frame
/// pair. Returns estimates in canonical key order, scene pixels.
pub fn estimate_gaze(
    bank: &GazeEstimatorBank,
    table: &FeatureTable,
    left_frame: u64,
    right_frame: u64,
) -> Vec<Option<(f64, f64)>> {
    EstimatorKey::all()
        .iter()
        .map(|key| {
            let est = bank.get(key)?;
            let features = table.feature_vector(key.feature, key.combo, left_frame, right_frame)?;
            let (x, y) = est.predict_norm(&features)?;
            Some((x * bank.scene_resolution.0, y * bank.scene_resolution.1))
        })
        .collect()
}

/// Accuracy of one estimator, split like the evaluation protocol: all
/// assigned gaze rows versus only the nearest row per scene frame.
#[derive(Debug, Clone, Copy, Default)]
pub struct EstimatorAccuracy {
    pub mean_px_all: Option<f64>,
    pub n_all: usize,
    pub mean_px_nearest: Option<f64>,
    pub n_nearest: usize,
}

#[derive(Debug, Clone, Default)]
pub struct AccuracyReport {
    pub per_estimator: BTreeMap<EstimatorKey, EstimatorAccuracy>,
}

/// Mean Euclidean pixel error per estimator against per-scene-frame marker
/// truth.
pub fn accuracy_report(
    rows: &[GazeRow],
    truth: &BTreeMap<u64, (f64, f64)>,
) -> Result<AccuracyReport, CalibrationError> {
    let mut any = false;
    let mut sums: BTreeMap<EstimatorKey, (f64, usize, f64, usize)> = BTreeMap::new();
    for row in rows {
        let Some(&(tx, ty)) = truth.get(&row.scene_frame_id) else {
            continue;
        };
        any = true;
        for (key, est) in EstimatorKey::all().iter().zip(&row.estimates) {
            let Some((x, y)) = est else { continue };
            let err = ((x - tx).powi(2) + (y - ty).powi(2)).sqrt();
            let entry = sums.entry(*key).or_insert((0.0, 0, 0.0, 0));
            entry.0 += err;
            entry.1 += 1;
            if row.nearest {
                entry.2 += err;
                entry.3 += 1;
            }
        }
    }
    if !any {
        return Err(CalibrationError::NoEvaluationFrames);
    }
    let per_estimator = sums
        .into_iter()
        .map(|(key, (sum_all, n_all, sum_near, n_near))| {
            (
                key,
                EstimatorAccuracy {
                    mean_px_all: (n_all > 0).then(|| sum_all / n_all as f64),
                    n_all,
                    mean_px_nearest: (n_near > 0).then(|| sum_near / n_near as f64),
                    n_nearest: n_near,
                },
            )
        })
        .collect();
    Ok(AccuracyReport { per_estimator })
}

/// Validity statistics of one estimator over the output rows.
#[derive(Debug, Clone, Copy, Default)]
pub struct EstimatorValidity {
    /// Fraction of gaze rows with a valid estimate.
    pub valid_fraction: f64,
    /// Fraction of scene frames with at least one valid estimate.
    pub scene_fraction: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ValidityReport {
    pub per_estimator: BTreeMap<EstimatorKey, EstimatorValidity>,
    pub rows: usize,
    pub scene_frames: usize,
}

/// Per-estimator validity over all output rows.
pub fn validity_stats(rows: &[GazeRow]) -> ValidityReport {
    let mut scene_ids: Vec<u64> = rows.iter().map(|r| r.scene_frame_id).collect();
    scene_ids.sort_unstable();
    scene_ids.dedup();
    let n_scene = scene_ids.len();

    let mut report = ValidityReport {
        rows: rows.len(),
        scene_frames: n_scene,
        ..ValidityReport::default()
    };
    for (i, key) in EstimatorKey::all().into_iter().enumerate() {
        let valid_rows = rows.iter().filter(|r| r.estimates[i].is_some()).count();
        let mut scenes_with: Vec<u64> = rows
            .iter()
            .filter(|r| r.estimates[i].is_some())
            .map(|r| r.scene_frame_id)
            .collect();
        scenes_with.sort_unstable();
        scenes_with.dedup();
        report.per_estimator.insert(
            key,
            EstimatorValidity {
                valid_fraction: if rows.is_empty() {
                    0.0
                } else {
                    valid_rows as f64 / rows.len() as f64
                },
                scene_fraction: if n_scene == 0 {
                    0.0
                } else {
                    scenes_with.len() as f64 / n_scene as f64
                },
            },
        );
    }
    report
}

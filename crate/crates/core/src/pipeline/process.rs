//! Stage orchestration for `process`, `synth`, and `eval`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;

use crate::calibration::{
    accuracy_report, estimate_gaze, fit_gaze_bank, select_calibration_pairs, synchronize,
    validity_stats, AccuracyReport, BankSettings, EyeFrameFeatures, FeatureTable, GazeRow,
    SelectionSettings, ValidityReport,
};
use crate::depth::{
    depth_knn, depth_powerlaw, fit_powerlaw, read_depth_samples, DepthSample, PowerLawDepth,
};
use crate::eyeball::{
    estimate_eyeball_or_fallback, optical_vector, select_diverse_ellipses, EyeballConfig,
    EyeballModel, VectorOrigin,
};
use crate::geometry::{
    compute_eye_opening, fit_ellipse, fit_eyelid_splines, marker_from_landmarks, Ellipse,
    EyeCorners, EyelidSpline, MarkerObservation,
};
use crate::movement::{
    extract_motion_features, median_opening, FrameMotionState, ThresholdClassifier,
};
use crate::recording::{
    group_frames, load_recording, write_depth_csv, write_features_csv, write_gaze_csv,
    write_movements_csv, DepthRecord, EyeFeaturesRecord, EyeFrameRows, GazeRecord, LoadReport,
    MovementRecord, RecordingManifest,
};
use crate::synth::{
    generate, read_ground_truth, score_pipeline, write_recording, PipelineOutputs, SceneScript,
    ScoreReport,
};

use super::config::{EyeballFeatureSource, PipelineConfig};

/// A stage failure, labeled with the stage that raised it.
#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct PipelineError {
    pub stage: &'static str,
    pub message: String,
}

fn stage_err<E: std::fmt::Display>(stage: &'static str) -> impl Fn(E) -> PipelineError {
    move |e| PipelineError {
        stage,
        message: e.to_string(),
    }
}

/// Wall time of one executed stage.
#[derive(Debug, Clone)]
pub struct StageTiming {
    pub name: &'static str,
    pub millis: f64,
}

/// Everything a `process` run reports besides its output files.
#[derive(Debug)]
pub struct ProcessSummary {
    pub out_dir: PathBuf,
    pub timings: Vec<StageTiming>,
    pub load_report: LoadReport,
    pub eye_frames: (usize, usize),
    pub scene_frames: usize,
    pub gaze_rows: usize,
    /// Kept/dropped counts per calibration combo.
    pub calibration_kept: BTreeMap<String, (usize, usize)>,
    pub skipped_estimators: Vec<String>,
    pub accuracy_calibration: Option<AccuracyReport>,
    pub accuracy_heldout: Option<AccuracyReport>,
    pub validity: ValidityReport,
    pub warnings: Vec<String>,
}

/// Per-frame geometry before eyeball-dependent values exist.
struct FrameGeometry {
    frame_id: u64,
    timestamp_ns: i64,
    pupil: Option<Ellipse>,
    iris: Option<Ellipse>,
    lids: Option<(EyelidSpline, EyelidSpline, EyeCorners)>,
    opening: Option<f64>,
}

fn frame_geometry(group: &EyeFrameRows<'_>) -> FrameGeometry {
    let fit_from = |row: Option<&crate::recording::FrameLandmarks>| {
        row.filter(|r| r.valid && r.points.len() >= 5)
            .and_then(|r| fit_ellipse(&r.points).ok())
    };
    let lids = match (group.eyelid_upper, group.eyelid_lower) {
        (Some(up), Some(lo)) if up.valid && lo.valid => {
            fit_eyelid_splines(&up.points, &lo.points).ok()
        }
        _ => None,
    };
    FrameGeometry {
        frame_id: group.frame_id,
        timestamp_ns: group.timestamp_ns,
        pupil: fit_from(group.pupil),
        iris: fit_from(group.iris),
        lids,
        opening: None,
    }
}

/// Run the full pipeline over a recording and write all outputs to
/// `out_dir`.
pub fn run_process(
    project: &Path,
    recording_id: &str,
    config: &PipelineConfig,
    out_dir: &Path,
) -> Result<ProcessSummary, PipelineError> {
    let mut timings = Vec::new();
    let mut warnings = Vec::new();
    let time_stage = |name: &'static str, timings: &mut Vec<StageTiming>, start: Instant| {
        timings.push(StageTiming {
            name,
            millis: start.elapsed().as_secs_f64() * 1e3,
        });
    };

    // Load.
    let start = Instant::now();
    let recording = load_recording(project, recording_id).map_err(stage_err("load"))?;
    let manifest = recording.manifest.clone();
    if recording.report.malformed_rows > 0 || recording.report.demoted_rows > 0 {
        warnings.push(format!(
            "load: {} malformed rows skipped or invalidated, {} rows demoted",
            recording.report.malformed_rows, recording.report.demoted_rows
        ));
    }
    time_stage("load", &mut timings, start);

    // Features: ellipse fits and eyelid splines per eye frame.
    let start = Instant::now();
    let left_groups = group_frames(&recording.left);
    let right_groups = group_frames(&recording.right);
    let geometry = |groups: &[EyeFrameRows<'_>]| -> Vec<FrameGeometry> {
        if config.jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.jobs)
                .build()
                .expect("worker pool");
            pool.install(|| groups.par_iter().map(frame_geometry).collect())
        } else {
            groups.iter().map(frame_geometry).collect()
        }
    };
    let mut left_geo = geometry(&left_groups);
    let mut right_geo = geometry(&right_groups);
    time_stage("features", &mut timings, start);

    // Eyeball and optical vectors.
    let start = Instant::now();
    let eyeball_config = EyeballConfig {
        diverse_k: config.eyeball_k,
        max_eccentric_deg: config.max_eccentric_deg,
        ..EyeballConfig::default()
    };
    let estimate_eye = |geo: &[FrameGeometry], name: &str, warnings: &mut Vec<String>| {
        let source: Vec<Ellipse> = geo
            .iter()
            .filter_map(|f| match config.eyeball_source {
                EyeballFeatureSource::Pupil => f.pupil,
                EyeballFeatureSource::Iris => f.iris,
            })
            .collect();
        let (model, fallback) = if source.is_empty() {
            estimate_eyeball_or_fallback(&[], manifest.eye_resolution, &eyeball_config)
        } else {
            let diverse =
                select_diverse_ellipses(&source, config.eyeball_k, manifest.eye_resolution);
            estimate_eyeball_or_fallback(&diverse, manifest.eye_resolution, &eyeball_config)
        };
        if fallback {
            warnings.push(format!(
                "eyeball_vectors: {name} eyeball fell back to the image center (low confidence)"
            ));
        }
        model
    };
    let left_eyeball = estimate_eye(&left_geo, "left", &mut warnings);
    let right_eyeball = estimate_eye(&right_geo, "right", &mut warnings);

    let vectors = |geo: &FrameGeometry, model: &EyeballModel| {
        let pupil = geo
            .pupil
            .map(|e| optical_vector(model, VectorOrigin::PupilCenter, e.center).v);
        let iris = geo
            .iris
            .map(|e| optical_vector(model, VectorOrigin::IrisCenter, e.center).v);
        (pupil, iris)
    };
    time_stage("eyeball_vectors", &mut timings, start);

    // Eye opening.
    let start = Instant::now();
    let fill_openings = |geo: &mut Vec<FrameGeometry>| {
        if config.jobs > 1 {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(config.jobs)
                .build()
                .expect("worker pool");
            pool.install(|| {
                geo.par_iter_mut().for_each(|f| {
                    f.opening = f
                        .lids
                        .as_ref()
                        .map(|(up, lo, corners)| compute_eye_opening(up, lo, corners));
                })
            });
        } else {
            for f in geo.iter_mut() {
                f.opening = f
                    .lids
                    .as_ref()
                    .map(|(up, lo, corners)| compute_eye_opening(up, lo, corners));
            }
        }
    };
    fill_openings(&mut left_geo);
    fill_openings(&mut right_geo);
    time_stage("opening", &mut timings, start);

    // Assemble per-frame feature records.
    let records = |geo: &[FrameGeometry], model: &EyeballModel| -> Vec<EyeFeaturesRecord> {
        geo.iter()
            .map(|f| {
                let (pupil_vector, iris_vector) = vectors(f, model);
                EyeFeaturesRecord {
                    frame_id: f.frame_id,
                    timestamp_ns: f.timestamp_ns,
                    pupil: f.pupil,
                    iris: f.iris,
                    opening_px: f.opening,
                    eyeball: Some((model.center.0, model.center.1, model.radius)),
                    pupil_vector,
                    iris_vector,
                }
            })
            .collect()
    };
    let left_records = records(&left_geo, &left_eyeball);
    let right_records = records(&right_geo, &right_eyeball);

    // Movements.
    let start = Instant::now();
    let classify_stream = |records: &[EyeFeaturesRecord]| -> Vec<MovementRecord> {
        let median = median_opening(records.iter().map(|r| r.opening_px));
        let classifier = ThresholdClassifier::new(config.threshold_config(), median);
        let mut previous: Option<FrameMotionState> = None;
        records
            .iter()
            .map(|r| {
                let state = FrameMotionState {
                    pupil_vector: r.pupil_vector,
                    iris_vector: r.iris_vector,
                    opening: r.opening_px,
                };
                let features = extract_motion_features(previous.as_ref(), &state);
                previous = Some(state);
                MovementRecord {
                    timestamp_ns: r.timestamp_ns,
                    label: classifier.classify(&features),
                }
            })
            .collect()
    };
    let movements_left = classify_stream(&left_records);
    let movements_right = classify_stream(&right_records);
    time_stage("movements", &mut timings, start);

    // Synchronization.
    let start = Instant::now();
    let ticks = |geo: &[FrameGeometry]| -> Vec<(u64, i64)> {
        geo.iter().map(|f| (f.frame_id, f.timestamp_ns)).collect()
    };
    let scene_groups = group_frames(&recording.scene);
    let scene_ticks: Vec<(u64, i64)> = scene_groups
        .iter()
        .map(|g| (g.frame_id, g.timestamp_ns))
        .collect();
    let sync = synchronize(&scene_ticks, &ticks(&left_geo), &ticks(&right_geo))
        .map_err(stage_err("sync"))?;
    time_stage("sync", &mut timings, start);

    // Calibration.
    let start = Instant::now();
    let markers: Vec<MarkerObservation> = scene_groups
        .iter()
        .map(|g| match g.marker {
            Some(row) if row.valid && row.points.len() >= 3 => {
                marker_from_landmarks(&row.points, g.timestamp_ns, g.frame_id)
                    .unwrap_or_else(|_| MarkerObservation::invalid(g.frame_id, g.timestamp_ns))
            }
            _ => MarkerObservation::invalid(g.frame_id, g.timestamp_ns),
        })
        .collect();

    let table = build_feature_table(
        &manifest,
        &left_records,
        &right_records,
        &left_eyeball,
        &right_eyeball,
    );
    let calib_range = config.calib_range.or(manifest.calibration_range);
    let selection_settings = SelectionSettings {
        window: config.window,
        best_fraction: config.best_fraction,
        poly_degree: config.poly_degree,
        lm: config.lm_settings(),
        ..SelectionSettings::default()
    };
    let selection = select_calibration_pairs(
        &markers,
        &sync.per_scene,
        &table,
        calib_range,
        &selection_settings,
    )
    .map_err(stage_err("calibration"))?;
    let mut calibration_kept = BTreeMap::new();
    for (combo, sel) in &selection.combos {
        calibration_kept.insert(
            format!("{combo:?}").to_lowercase(),
            (sel.kept.len(), sel.dropped.len()),
        );
        if sel.outlier_warning {
            warnings.push(format!(
                "calibration: {combo:?} dropped errors exceed 5x the kept median; \
                 the calibration range may include frames not fixating the marker"
            ));
        }
    }
    let bank_settings = BankSettings {
        poly_degree: config.poly_degree,
        lm: config.lm_settings(),
        nn: config.nn_settings(),
        ..BankSettings::default()
    };
    let scene_res = (
        manifest.scene_resolution.0 as f64,
        manifest.scene_resolution.1 as f64,
    );
    let bank = fit_gaze_bank(&selection, scene_res, &bank_settings);
    let skipped_estimators: Vec<String> = bank
        .skipped
        .iter()
        .map(|(key, why)| format!("{key}: {why}"))
        .collect();
    for skip in &skipped_estimators {
        warnings.push(format!("calibration: estimator skipped: {skip}"));
    }
    time_stage("calibration", &mut timings, start);

    // Gaze rows.
    let start = Instant::now();
    let nearest_left: BTreeMap<u64, u64> = sync
        .per_scene
        .iter()
        .map(|a| (a.scene_frame_id, a.left_eye_frame_id))
        .collect();
    let left_ts: BTreeMap<u64, i64> = left_geo
        .iter()
        .map(|f| (f.frame_id, f.timestamp_ns))
        .collect();
    let right_ts: BTreeMap<u64, i64> = right_geo
        .iter()
        .map(|f| (f.frame_id, f.timestamp_ns))
        .collect();
    let rows: Vec<GazeRow> = sync
        .gaze_rows
        .iter()
        .map(|a| GazeRow {
            scene_frame_id: a.scene_frame_id,
            left_frame_id: a.left_eye_frame_id,
            right_frame_id: a.right_eye_frame_id,
            left_timestamp_ns: left_ts[&a.left_eye_frame_id],
            right_timestamp_ns: right_ts[&a.right_eye_frame_id],
            nearest: nearest_left[&a.scene_frame_id] == a.left_eye_frame_id,
            estimates: estimate_gaze(&bank, &table, a.left_eye_frame_id, a.right_eye_frame_id),
        })
        .collect();

    let truth: BTreeMap<u64, (f64, f64)> = markers
        .iter()
        .filter(|m| m.valid)
        .map(|m| (m.scene_frame_id, m.center))
        .collect();
    let in_range = |id: u64| calib_range.is_none_or(|(a, b)| id >= a && id <= b);
    let calib_rows: Vec<GazeRow> = rows
        .iter()
        .filter(|r| in_range(r.scene_frame_id))
        .cloned()
        .collect();
    let heldout_rows: Vec<GazeRow> = rows
        .iter()
        .filter(|r| !in_range(r.scene_frame_id))
        .cloned()
        .collect();
    let accuracy_calibration = accuracy_report(&calib_rows, &truth).ok();
    let accuracy_heldout = accuracy_report(&heldout_rows, &truth).ok();
    let validity = validity_stats(&rows);
    time_stage("gaze", &mut timings, start);

    // Depth.
    let start = Instant::now();
    let samples: Vec<DepthSample> = match &config.depth_samples {
        Some(path) => read_depth_samples(path).map_err(stage_err("depth"))?,
        None => Vec::new(),
    };
    let mut law = PowerLawDepth {
        a: config.depth_a,
        b: config.depth_b,
        c: config.depth_c,
    };
    if samples.len() >= 4 {
        match fit_powerlaw(&samples) {
            Ok(fitted) => law = fitted,
            Err(e) => warnings.push(format!(
                "depth: refit failed ({e}); keeping the configured parameters"
            )),
        }
    }
    let depth_records: Vec<DepthRecord> = markers
        .iter()
        .map(|m| {
            let area = m.valid.then_some(m.area);
            DepthRecord {
                scene_frame_id: m.scene_frame_id,
                marker_area_px2: area,
                depth_cm_powerlaw: area.and_then(|a| depth_powerlaw(&law, a).ok()),
                depth_cm_knn: area.and_then(|a| {
                    (samples.len() >= 2)
                        .then(|| depth_knn(&samples, a).ok())
                        .flatten()
                }),
            }
        })
        .collect();
    time_stage("depth", &mut timings, start);

    // Outputs.
    let start = Instant::now();
    std::fs::create_dir_all(out_dir).map_err(stage_err("write"))?;
    write_features_csv(&out_dir.join("features_left.csv"), &left_records)
        .map_err(stage_err("write"))?;
    write_features_csv(&out_dir.join("features_right.csv"), &right_records)
        .map_err(stage_err("write"))?;
    write_movements_csv(&out_dir.join("movements_left.csv"), &movements_left)
        .map_err(stage_err("write"))?;
    write_movements_csv(&out_dir.join("movements_right.csv"), &movements_right)
        .map_err(stage_err("write"))?;
    let gaze_records: Vec<GazeRecord> = rows
        .iter()
        .map(|r| GazeRecord {
            scene_frame_id: r.scene_frame_id,
            left_timestamp_ns: r.left_timestamp_ns,
            right_timestamp_ns: r.right_timestamp_ns,
            estimates: r.estimates.clone(),
        })
        .collect();
    write_gaze_csv(&out_dir.join("gaze.csv"), &gaze_records).map_err(stage_err("write"))?;
    write_depth_csv(&out_dir.join("depth.csv"), &depth_records).map_err(stage_err("write"))?;
    bank.save_dir(&out_dir.join("models"))
        .map_err(stage_err("write"))?;
    std::fs::write(out_dir.join("config_resolved.txt"), config.to_string())
        .map_err(stage_err("write"))?;
    time_stage("write", &mut timings, start);

    Ok(ProcessSummary {
        out_dir: out_dir.to_path_buf(),
        timings,
        load_report: recording.report,
        eye_frames: (left_geo.len(), right_geo.len()),
        scene_frames: scene_groups.len(),
        gaze_rows: rows.len(),
        calibration_kept,
        skipped_estimators,
        accuracy_calibration,
        accuracy_heldout,
        validity,
        warnings,
    })
}

fn build_feature_table(
    manifest: &RecordingManifest,
    left: &[EyeFeaturesRecord],
    right: &[EyeFeaturesRecord],
    left_eyeball: &EyeballModel,
    right_eyeball: &EyeballModel,
) -> FeatureTable {
    let to_features = |records: &[EyeFeaturesRecord]| -> BTreeMap<u64, EyeFrameFeatures> {
        records
            .iter()
            .map(|r| {
                (
                    r.frame_id,
                    EyeFrameFeatures {
                        frame_id: r.frame_id,
                        timestamp_ns: r.timestamp_ns,
                        pupil_center: r.pupil.map(|e| e.center),
                        iris_center: r.iris.map(|e| e.center),
                        pupil_vector: r.pupil_vector,
                        iris_vector: r.iris_vector,
                    },
                )
            })
            .collect()
    };
    let (w, h) = (
        manifest.eye_resolution.0 as f64,
        manifest.eye_resolution.1 as f64,
    );
    FeatureTable {
        eye_resolution: (w, h),
        scene_resolution: (
            manifest.scene_resolution.0 as f64,
            manifest.scene_resolution.1 as f64,
        ),
        left: to_features(left),
        right: to_features(right),
        left_eyeball_norm: (left_eyeball.center.0 / w, left_eyeball.center.1 / h),
        right_eyeball_norm: (right_eyeball.center.0 / w, right_eyeball.center.1 / h),
    }
}

/// Generate a synthetic recording into `out_dir` (which becomes a loadable
/// recording directory with its ground truth under `truth/`).
pub fn run_synth(script: &SceneScript, out_dir: &Path) -> Result<PathBuf, PipelineError> {
    let recording = generate(script).map_err(stage_err("synth"))?;
    std::fs::create_dir_all(out_dir).map_err(stage_err("synth"))?;
    let parent = out_dir.parent().unwrap_or(Path::new(".")).to_path_buf();
    let id = out_dir
        .file_name()
        .ok_or_else(|| PipelineError {
            stage: "synth",
            message: "output directory needs a name".into(),
        })?
        .to_string_lossy()
        .to_string();
    let dir = write_recording(&parent, &id, &recording).map_err(stage_err("synth"))?;
    std::fs::write(dir.join("script.txt"), script.to_string()).map_err(stage_err("synth"))?;
    Ok(dir)
}

/// Score a `process` output directory against a recording's ground truth and
/// write `eval_report.txt` into the output directory.
pub fn run_eval(out_dir: &Path, truth_dir: &Path) -> Result<ScoreReport, PipelineError> {
    let outputs = PipelineOutputs::read_dir(out_dir).map_err(stage_err("eval"))?;
    let truth = read_ground_truth(truth_dir).map_err(stage_err("eval"))?;
    let report = score_pipeline(&outputs, &truth).map_err(stage_err("eval"))?;
    std::fs::write(out_dir.join("eval_report.txt"), report.to_string())
        .map_err(stage_err("eval"))?;
    Ok(report)
}

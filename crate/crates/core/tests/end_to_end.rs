//! Short end-to-end runs: synthetic recording → pipeline → scoring.

use gazekit_core::calibration::{EstimatorKey, Method};
use gazekit_core::pipeline::{run_eval, run_process, run_synth, PipelineConfig};
use gazekit_core::synth::{Regime, RegimeKind, SceneScript};

/// A 4-second script with a 3-second calibration phase; small but covers
/// every regime kind.
fn short_script() -> SceneScript {
    let mut script = SceneScript::default_script();
    use RegimeKind::*;
    let r = |start_s: f64, end_s: f64, kind, p1: f64, p2: f64| Regime {
        start_s,
        end_s,
        kind,
        p1,
        p2,
    };
    script.duration_s = 4.0;
    // Nine-point calibration grid; saccade frames stay within the best-90%
    // drop budget of the pair selection.
    let targets = [
        (-0.8, -0.6),
        (0.0, -0.6),
        (0.8, -0.6),
        (0.8, 0.0),
        (0.0, 0.0),
        (-0.8, 0.0),
        (-0.8, 0.6),
        (0.0, 0.6),
        (0.8, 0.6),
    ];
    let mut regimes = Vec::new();
    let mut t = 0.0;
    for (i, &(gx, gy)) in targets.iter().enumerate() {
        if i > 0 {
            regimes.push(r(t, t + 0.05, Saccade, gx, gy));
            t += 0.05;
        }
        regimes.push(r(t, t + 0.25, Fixation, gx, gy));
        t += 0.25;
    }
    assert!((t - 2.65).abs() < 1e-9);
    regimes.push(r(2.65, 2.70, Saccade, 0.5, 0.3));
    regimes.push(r(2.70, 3.20, Fixation, 0.5, 0.3));
    regimes.push(r(3.20, 3.40, Pursuit, -0.1, 0.0));
    regimes.push(r(3.40, 4.00, Fixation, -0.1, 0.0));
    script.regimes = regimes;
    script.calib_range = Some((0, 79));
    script
}

fn light_config() -> PipelineConfig {
    PipelineConfig {
        nn_epochs_per_stage: 400,
        nn_restarts: 2,
        ..PipelineConfig::default()
    }
}

#[test]
fn pipeline_recovers_a_noiseless_synthetic_recording() {
    let dir = tempfile::tempdir().unwrap();
    let rec_dir = dir.path().join("rec");
    run_synth(&short_script(), &rec_dir).unwrap();

    let out_dir = dir.path().join("out");
    let summary = run_process(dir.path(), "rec", &light_config(), &out_dir).unwrap();

    assert_eq!(summary.eye_frames, (800, 800));
    assert_eq!(summary.scene_frames, 120);
    assert_eq!(summary.gaze_rows, 800);
    let stage_names: Vec<&str> = summary.timings.iter().map(|t| t.name).collect();
    assert_eq!(
        stage_names,
        [
            "load",
            "features",
            "eyeball_vectors",
            "opening",
            "movements",
            "sync",
            "calibration",
            "gaze",
            "depth",
            "write"
        ]
    );

    for file in [
        "features_left.csv",
        "features_right.csv",
        "movements_left.csv",
        "movements_right.csv",
        "gaze.csv",
        "depth.csv",
        "config_resolved.txt",
    ] {
        assert!(out_dir.join(file).is_file(), "{file} missing");
    }

    let report = run_eval(&out_dir, &rec_dir).unwrap();
    assert!(out_dir.join("eval_report.txt").is_file());

    // Noiseless data with a realizable polynomial target: LM estimators sit
    // at numerical precision on held-out frames.
    for key in EstimatorKey::all() {
        let err = report.gaze_mean_error_heldout_px[&key];
        if key.method == Method::Lm {
            assert!(err < 0.5, "{key}: held-out error {err}");
        } else {
            // Smoke-level bound: this run trains the networks on a reduced
            // schedule; the acceptance suite owns the full-schedule bound.
            assert!(err < 15.0, "{key}: held-out error {err}");
        }
    }

    // Movement labels match the generating regimes almost everywhere.
    for confusion in [
        &report.movement_confusion_left,
        &report.movement_confusion_right,
    ] {
        for (label, acc) in confusion.per_class_accuracy() {
            if let Some(acc) = acc {
                assert!(acc >= 0.9, "{label:?} accuracy {acc}");
            }
        }
    }

    // Depth columns follow the generating law exactly (noiseless areas).
    assert!(report.depth_mean_abs_error_powerlaw_cm.unwrap() < 1e-6);

    // Eyeball centers recovered to sub-pixel accuracy.
    assert!(report.eyeball_center_error_left_px.unwrap() < 1.0);
    assert!(report.eyeball_center_error_right_px.unwrap() < 1.0);
}

#[test]
fn identical_seeded_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let rec_dir = dir.path().join("rec");
    run_synth(&short_script(), &rec_dir).unwrap();

    let config = PipelineConfig {
        nn_epochs_per_stage: 40,
        nn_restarts: 1,
        ..PipelineConfig::default()
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_process(dir.path(), "rec", &config, &out_a).unwrap();
    run_process(dir.path(), "rec", &config, &out_b).unwrap();

    for file in [
        "features_left.csv",
        "features_right.csv",
        "movements_left.csv",
        "movements_right.csv",
        "gaze.csv",
        "depth.csv",
        "config_resolved.txt",
    ] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs between identical runs");
    }
    let models: Vec<_> = std::fs::read_dir(out_a.join("models"))
        .unwrap()
        .map(|e| e.unwrap().file_name())
        .collect();
    assert_eq!(models.len(), 24);
    for name in models {
        let a = std::fs::read(out_a.join("models").join(&name)).unwrap();
        let b = std::fs::read(out_b.join("models").join(&name)).unwrap();
        assert_eq!(a, b, "{name:?} differs");
    }
}

#[test]
fn calibration_range_flag_restricts_the_pairs() {
    let dir = tempfile::tempdir().unwrap();
    let mut script = short_script();
    script.calib_range = None;
    run_synth(&script, &dir.path().join("rec")).unwrap();

    let config = PipelineConfig {
        calib_range: Some((30, 60)),
        nn_epochs_per_stage: 10,
        nn_restarts: 1,
        ..PipelineConfig::default()
    };
    let out_dir = dir.path().join("out");
    let summary = run_process(dir.path(), "rec", &config, &out_dir).unwrap();
    // 31 frames in range, all marker-valid and window-clean: keep ⌈0.9·31⌉.
    assert_eq!(summary.calibration_kept["left"], (28, 3));
}

#[test]
fn missing_manifest_fails_in_the_load_stage() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::create_dir_all(dir.path().join("rec")).unwrap();
    let err = run_process(
        dir.path(),
        "rec",
        &PipelineConfig::default(),
        &dir.path().join("out"),
    )
    .unwrap_err();
    assert_eq!(err.stage, "load");
    assert!(err.to_string().contains("load"));
}

#[test]
fn worker_pool_does_not_change_the_outputs() {
    let dir = tempfile::tempdir().unwrap();
    run_synth(&short_script(), &dir.path().join("rec")).unwrap();

    let base = PipelineConfig {
        nn_epochs_per_stage: 10,
        nn_restarts: 1,
        ..PipelineConfig::default()
    };
    let jobs2 = PipelineConfig {
        jobs: 2,
        ..base.clone()
    };
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    run_process(dir.path(), "rec", &base, &out_a).unwrap();
    run_process(dir.path(), "rec", &jobs2, &out_b).unwrap();
    for file in ["features_left.csv", "gaze.csv"] {
        let a = std::fs::read(out_a.join(file)).unwrap();
        let b = std::fs::read(out_b.join(file)).unwrap();
        assert_eq!(a, b, "{file} differs with --jobs 2");
    }
}

//! Landmark-stream generation from a scene script.

use std::fmt::Write as _;
use std::path::Path;

use rand::{rngs::StdRng, Rng, SeedableRng};

use crate::depth::PowerLawDepth;
use crate::geometry::Ellipse;
use crate::movement::MovementLabel;
use crate::recording::{
    landmark_file_name, manifest_to_string, write_landmark_file, FrameLandmarks, LandmarkKind,
    RecordingManifest, StreamSource, MANIFEST_FILE,
};

use super::script::{EyeTruth, RegimeKind, SceneScript};
use super::SynthError;

/// Ground truth of one eye frame.
#[derive(Debug, Clone, Copy)]
pub struct EyeFrameTruth {
    pub frame_id: u64,
    pub timestamp_ns: i64,
    pub regime: RegimeKind,
    /// Expected movement label under the blink-fraction convention.
    pub label: MovementLabel,
    /// True gaze target, scene px.
    pub gaze_scene: (f64, f64),
    /// True pupil center, eye px.
    pub pupil_center: (f64, f64),
    /// True eyelid separation, px.
    pub opening_px: f64,
}

/// Ground truth of one scene frame.
#[derive(Debug, Clone, Copy)]
pub struct SceneFrameTruth {
    pub frame_id: u64,
    pub timestamp_ns: i64,
    pub marker_center: (f64, f64),
    pub marker_area_px2: f64,
    pub depth_cm: f64,
}

/// Everything the generator knows that the pipeline must recover.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub left: Vec<EyeFrameTruth>,
    pub right: Vec<EyeFrameTruth>,
    pub scene: Vec<SceneFrameTruth>,
    /// (cx, cy, radius) per eye.
    pub left_eyeball: (f64, f64, f64),
    pub right_eyeball: (f64, f64, f64),
    pub calib_range: Option<(u64, u64)>,
}

/// A generated recording: loadable landmark streams plus the ground truth.
#[derive(Debug)]
pub struct GeneratedRecording {
    pub manifest: RecordingManifest,
    pub left: Vec<FrameLandmarks>,
    pub right: Vec<FrameLandmarks>,
    pub scene: Vec<FrameLandmarks>,
    pub truth: GroundTruth,
}

/// Orthographic projection of a pupil- or iris-sized disc riding on the
/// eyeball sphere: the projected ellipse sits at the sphere point, its minor
/// axis along the planar gaze direction, foreshortened by the view angle.
pub fn sphere_projected_ellipse(
    eye: &EyeTruth,
    planar_gaze: (f64, f64),
    disc_radius: f64,
) -> Ellipse {
    let (gx, gy) = planar_gaze;
    let planar = (gx * gx + gy * gy).sqrt().min(1.0);
    let vz = (1.0 - planar * planar).sqrt();
    let angle = if planar < 1e-12 {
        0.0
    } else {
        (gy.atan2(gx) + std::f64::consts::FRAC_PI_2).rem_euclid(std::f64::consts::PI)
    };
    Ellipse {
        center: (
            eye.center.0 + eye.radius * gx,
            eye.center.1 + eye.radius * gy,
        ),
        semi_major: disc_radius,
        semi_minor: (disc_radius * vz).max(disc_radius * 1e-6),
        angle,
    }
}

struct NoiseSource {
    rng: StdRng,
    sigma: f64,
    dropout: f64,
}

impl NoiseSource {
    fn normal(&mut self) -> f64 {
        // Box–Muller transform.
        let u1: f64 = self.rng.gen_range(f64::EPSILON..1.0);
        let u2: f64 = self.rng.gen_range(0.0..1.0);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    fn jitter(&mut self, points: &mut [[f64; 2]]) {
        if self.sigma > 0.0 {
            for p in points {
                p[0] += self.sigma * self.normal();
                p[1] += self.sigma * self.normal();
            }
        }
    }

    fn dropped(&mut self) -> bool {
        self.dropout > 0.0 && self.rng.gen_bool(self.dropout)
    }
}

/// Compress the temporal half (x beyond the eye center) of eye-image
/// points, as an off-axis camera would.
fn squash_points(points: &mut [[f64; 2]], center_x: f64, factor: f64) {
    if factor <= 0.0 {
        return;
    }
    for p in points.iter_mut() {
        if p[0] > center_x {
            p[0] = center_x + (p[0] - center_x) * (1.0 - factor);
        }
    }
}

fn clamp_points(points: &mut [[f64; 2]], resolution: (u32, u32)) {
    let (w, h) = (resolution.0 as f64, resolution.1 as f64);
    for p in points {
        p[0] = p[0].clamp(0.0, w);
        p[1] = p[1].clamp(0.0, h);
    }
}

/// Generate the landmark streams and ground truth for a script.
pub fn generate(script: &SceneScript) -> Result<GeneratedRecording, SynthError> {
    script.validate()?;
    let mut noise = NoiseSource {
        rng: StdRng::seed_from_u64(script.seed),
        sigma: script.noise_sigma_px,
        dropout: script.dropout_prob,
    };
    let depth_law = PowerLawDepth::default();

    let n_eye = (script.duration_s * script.eye_fps).round() as u64;
    let n_scene = (script.duration_s * script.scene_fps).round() as u64;

    let mut left_rows = Vec::new();
    let mut right_rows = Vec::new();
    let mut left_truth = Vec::new();
    let mut right_truth = Vec::new();

    // The expected movement label comes from the analytic signals under the
    // same decision scheme the threshold classifier uses: blink below the
    // opening fraction, otherwise the band the true angular velocity of the
    // gaze vector falls into.
    let true_vector = |t: f64| -> (f64, f64, f64) {
        let g = script.gaze_at(t);
        let (px, py) = (script.gaze_scale * g.0, script.gaze_scale * g.1);
        let vz = (1.0 - px * px - py * py).max(0.0).sqrt();
        (px, py, vz)
    };

    for k in 0..n_eye {
        let t = k as f64 / script.eye_fps;
        let ts = (k as f64 * 1e9 / script.eye_fps).round() as i64;
        let gaze = script.gaze_at(t);
        let openness = script.openness_at(t);
        let regime = script.regime_at(t).kind;
        let label = if openness < script.label_blink_fraction {
            MovementLabel::Blink
        } else if k == 0 {
            MovementLabel::Fixation
        } else {
            let v_prev = true_vector((k - 1) as f64 / script.eye_fps);
            let v_cur = true_vector(t);
            let dot =
                (v_prev.0 * v_cur.0 + v_prev.1 * v_cur.1 + v_prev.2 * v_cur.2).clamp(-1.0, 1.0);
            let delta = dot.acos();
            if delta > script.label_saccade_threshold {
                MovementLabel::Saccade
            } else if delta > script.label_pursuit_low {
                MovementLabel::SmoothPursuit
            } else {
                MovementLabel::Fixation
            }
        };

        // The marker target is shared; it is defined by the left eye.
        let planar = (script.gaze_scale * gaze.0, script.gaze_scale * gaze.1);
        let left_pupil = sphere_projected_ellipse(&script.left, planar, script.left.pupil_radius);
        let gaze_scene = script.map.eval(
            (
                left_pupil.center.0 / script.eye_resolution.0 as f64,
                left_pupil.center.1 / script.eye_resolution.1 as f64,
            ),
            script.hard_mode,
        );

        for (eye, rows, truth) in [
            (&script.left, &mut left_rows, &mut left_truth),
            (&script.right, &mut right_rows, &mut right_truth),
        ] {
            let source = if std::ptr::eq(eye, &script.left) {
                StreamSource::LeftEye
            } else {
                StreamSource::RightEye
            };
            let pupil = sphere_projected_ellipse(eye, planar, eye.pupil_radius);
            let iris = sphere_projected_ellipse(eye, planar, eye.iris_radius);
            let mut push =
                |kind: LandmarkKind, mut points: Vec<[f64; 2]>, noise: &mut NoiseSource| {
                    squash_points(&mut points, eye.center.0, script.perspective_squash);
                    noise.jitter(&mut points);
                    clamp_points(&mut points, script.eye_resolution);
                    let valid = !noise.dropped();
                    rows.push(FrameLandmarks {
                        frame_id: k,
                        timestamp_ns: ts,
                        source,
                        kind,
                        points,
                        confidence: if valid { 1.0 } else { 0.0 },
                        valid,
                    });
                };

            push(
                LandmarkKind::Pupil,
                pupil.sample_points(script.pupil_points),
                &mut noise,
            );
            push(
                LandmarkKind::Iris,
                iris.sample_points(script.iris_points),
                &mut noise,
            );

            let lid = |amplitude: f64, n: usize, sign: f64| -> Vec<[f64; 2]> {
                (0..n)
                    .map(|i| {
                        let frac = i as f64 / (n - 1) as f64;
                        let x_hat = 2.0 * frac - 1.0;
                        let x = eye.center.0 + eye.lid_half_width * x_hat;
                        let y = eye.center.1 + sign * amplitude * openness * (1.0 - x_hat * x_hat);
                        [x, y]
                    })
                    .collect()
            };
            push(
                LandmarkKind::EyelidUpper,
                lid(eye.lid_amplitude_upper, script.eyelid_upper_points, -1.0),
                &mut noise,
            );
            push(
                LandmarkKind::EyelidLower,
                lid(eye.lid_amplitude_lower, script.eyelid_lower_points, 1.0),
                &mut noise,
            );

            truth.push(EyeFrameTruth {
                frame_id: k,
                timestamp_ns: ts,
                regime,
                label,
                gaze_scene,
                pupil_center: pupil.center,
                opening_px: eye.nominal_opening() * openness,
            });
        }
    }

    let mut scene_rows = Vec::new();
    let mut scene_truth = Vec::new();
    for j in 0..n_scene {
        let t = j as f64 / script.scene_fps;
        let ts = (j as f64 * 1e9 / script.scene_fps).round() as i64;
        let gaze = script.gaze_at(t);
        let planar = (script.gaze_scale * gaze.0, script.gaze_scale * gaze.1);
        let pupil = sphere_projected_ellipse(&script.left, planar, script.left.pupil_radius);
        let center = script.map.eval(
            (
                pupil.center.0 / script.eye_resolution.0 as f64,
                pupil.center.1 / script.eye_resolution.1 as f64,
            ),
            script.hard_mode,
        );
        let depth = script.depth_start_cm
            + (script.depth_end_cm - script.depth_start_cm) * t / script.duration_s;
        // Invert the depth law to find the marker area encoding this depth.
        let area = ((depth - depth_law.c) / depth_law.a).powf(1.0 / depth_law.b);
        let half = area.sqrt() / 2.0;

        let per_side = script.marker_points / 4;
        let corners = [
            (center.0 - half, center.1 - half),
            (center.0 + half, center.1 - half),
            (center.0 + half, center.1 + half),
            (center.0 - half, center.1 + half),
        ];
        let mut points = Vec::with_capacity(script.marker_points);
        for s in 0..4 {
            let from = corners[s];
            let to = corners[(s + 1) % 4];
            for i in 0..per_side {
                let f = i as f64 / per_side as f64;
                points.push([from.0 + (to.0 - from.0) * f, from.1 + (to.1 - from.1) * f]);
            }
        }
        noise.jitter(&mut points);
        clamp_points(&mut points, script.scene_resolution);
        let valid = !noise.dropped();
        scene_rows.push(FrameLandmarks {
            frame_id: j,
            timestamp_ns: ts,
            source: StreamSource::Scene,
            kind: LandmarkKind::Marker,
            points,
            confidence: if valid { 1.0 } else { 0.0 },
            valid,
        });
        scene_truth.push(SceneFrameTruth {
            frame_id: j,
            timestamp_ns: ts,
            marker_center: center,
            marker_area_px2: area,
            depth_cm: depth,
        });
    }

    let manifest = RecordingManifest {
        eye_resolution: script.eye_resolution,
        scene_resolution: script.scene_resolution,
        eye_fps: script.eye_fps,
        scene_fps: script.scene_fps,
        calibration_range: script.calib_range,
    };
    Ok(GeneratedRecording {
        manifest,
        left: left_rows,
        right: right_rows,
        scene: scene_rows,
        truth: GroundTruth {
            left: left_truth,
            right: right_truth,
            scene: scene_truth,
            left_eyeball: (
                script.left.center.0,
                script.left.center.1,
                script.left.radius,
            ),
            right_eyeball: (
                script.right.center.0,
                script.right.center.1,
                script.right.radius,
            ),
            calib_range: script.calib_range,
        },
    })
}

const TRUTH_DIR: &str = "truth";
const TRUTH_EYE_HEADER: &str =
    "frame_id,timestamp_ns,regime,label,gaze_x,gaze_y,pupil_x,pupil_y,opening_px";
const TRUTH_SCENE_HEADER: &str = "frame_id,timestamp_ns,marker_x,marker_y,area_px2,depth_cm";

/// Write a generated recording as a loadable recording directory
/// (`<dir>/<id>/`), including its ground truth under `truth/`.
pub fn write_recording(
    dir: &Path,
    recording_id: &str,
    rec: &GeneratedRecording,
) -> Result<std::path::PathBuf, SynthError> {
    let root = dir.join(recording_id);
    std::fs::create_dir_all(&root)?;
    std::fs::write(root.join(MANIFEST_FILE), manifest_to_string(&rec.manifest))?;
    std::fs::write(
        root.join(landmark_file_name(StreamSource::LeftEye)),
        write_landmark_file(&rec.left),
    )?;
    std::fs::write(
        root.join(landmark_file_name(StreamSource::RightEye)),
        write_landmark_file(&rec.right),
    )?;
    std::fs::write(
        root.join(landmark_file_name(StreamSource::Scene)),
        write_landmark_file(&rec.scene),
    )?;

    let truth_dir = root.join(TRUTH_DIR);
    std::fs::create_dir_all(&truth_dir)?;
    for (name, frames) in [
        ("truth_eye_left.csv", &rec.truth.left),
        ("truth_eye_right.csv", &rec.truth.right),
    ] {
        let mut out = String::from(TRUTH_EYE_HEADER);
        out.push('\n');
        for f in frames {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                f.frame_id,
                f.timestamp_ns,
                f.regime.as_str(),
                f.label.as_str(),
                f.gaze_scene.0,
                f.gaze_scene.1,
                f.pupil_center.0,
                f.pupil_center.1,
                f.opening_px
            );
        }
        std::fs::write(truth_dir.join(name), out)?;
    }
    let mut out = String::from(TRUTH_SCENE_HEADER);
    out.push('\n');
    for f in &rec.truth.scene {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            f.frame_id,
            f.timestamp_ns,
            f.marker_center.0,
            f.marker_center.1,
            f.marker_area_px2,
            f.depth_cm
        );
    }
    std::fs::write(truth_dir.join("truth_scene.csv"), out)?;

    let mut meta = String::new();
    let _ = writeln!(
        meta,
        "left_eyeball={},{},{}",
        rec.truth.left_eyeball.0, rec.truth.left_eyeball.1, rec.truth.left_eyeball.2
    );
    let _ = writeln!(
        meta,
        "right_eyeball={},{},{}",
        rec.truth.right_eyeball.0, rec.truth.right_eyeball.1, rec.truth.right_eyeball.2
    );
    if let Some((a, b)) = rec.truth.calib_range {
        let _ = writeln!(meta, "calib_start={a}");
        let _ = writeln!(meta, "calib_end={b}");
    }
    std::fs::write(truth_dir.join("truth_meta.txt"), meta)?;
    Ok(root)
}

/// Read the ground truth back from a recording directory.
pub fn read_ground_truth(recording_dir: &Path) -> Result<GroundTruth, SynthError> {
    let truth_dir = recording_dir.join(TRUTH_DIR);
    let read_eye = |name: &str| -> Result<Vec<EyeFrameTruth>, SynthError> {
        let text = std::fs::read_to_string(truth_dir.join(name))?;
        let mut lines = text.lines();
        if lines.next() != Some(TRUTH_EYE_HEADER) {
            return Err(SynthError::Format(format!("{name}: bad header")));
        }
        let mut frames = Vec::new();
        for (i, line) in lines.enumerate() {
            let c: Vec<&str> = line.split(',').collect();
            if c.len() != 9 {
                return Err(SynthError::Format(format!("{name} row {}: bad row", i + 2)));
            }
            let num = |s: &str| -> Result<f64, SynthError> {
                s.parse()
                    .map_err(|_| SynthError::Format(format!("{name} row {}: bad number", i + 2)))
            };
            frames.push(EyeFrameTruth {
                frame_id: c[0]
                    .parse()
                    .map_err(|_| SynthError::Format(format!("{name}: bad frame id")))?,
                timestamp_ns: c[1]
                    .parse()
                    .map_err(|_| SynthError::Format(format!("{name}: bad timestamp")))?,
                regime: RegimeKind::parse(c[2])
                    .ok_or_else(|| SynthError::Format(format!("{name}: bad regime")))?,
                label: MovementLabel::parse(c[3])
                    .ok_or_else(|| SynthError::Format(format!("{name}: bad label")))?,
                gaze_scene: (num(c[4])?, num(c[5])?),
                pupil_center: (num(c[6])?, num(c[7])?),
                opening_px: num(c[8])?,
            });
        }
        Ok(frames)
    };
    let left = read_eye("truth_eye_left.csv")?;
    let right = read_eye("truth_eye_right.csv")?;

    let text = std::fs::read_to_string(truth_dir.join("truth_scene.csv"))?;
    let mut lines = text.lines();
    if lines.next() != Some(TRUTH_SCENE_HEADER) {
        return Err(SynthError::Format("truth_scene.csv: bad header".into()));
    }
    let mut scene = Vec::new();
    for (i, line) in lines.enumerate() {
        let c: Vec<&str> = line.split(',').collect();
        if c.len() != 6 {
            return Err(SynthError::Format(format!(
                "truth_scene row {}: bad row",
                i + 2
            )));
        }
        let num = |s: &str| -> Result<f64, SynthError> {
            s.parse()
                .map_err(|_| SynthError::Format(format!("truth_scene row {}: bad number", i + 2)))
        };
        scene.push(SceneFrameTruth {
            frame_id: c[0]
                .parse()
                .map_err(|_| SynthError::Format("truth_scene: bad frame id".into()))?,
            timestamp_ns: c[1]
                .parse()
                .map_err(|_| SynthError::Format("truth_scene: bad timestamp".into()))?,
            marker_center: (num(c[2])?, num(c[3])?),
            marker_area_px2: num(c[4])?,
            depth_cm: num(c[5])?,
        });
    }

    let meta = std::fs::read_to_string(truth_dir.join("truth_meta.txt"))?;
    let mut left_eyeball = (0.0, 0.0, 0.0);
    let mut right_eyeball = (0.0, 0.0, 0.0);
    let mut calib_start = None;
    let mut calib_end = None;
    for line in meta.lines() {
        if let Some((k, v)) = line.split_once('=') {
            match k {
                "left_eyeball" | "right_eyeball" => {
                    let parts: Vec<f64> = v
                        .split(',')
                        .map(|p| {
                            p.parse()
                                .map_err(|_| SynthError::Format("truth_meta: bad eyeball".into()))
                        })
                        .collect::<Result<_, _>>()?;
                    if parts.len() != 3 {
                        return Err(SynthError::Format("truth_meta: bad eyeball".into()));
                    }
                    let t = (parts[0], parts[1], parts[2]);
                    if k == "left_eyeball" {
                        left_eyeball = t;
                    } else {
                        right_eyeball = t;
                    }
                }
                "calib_start" => calib_start = v.parse().ok(),
                "calib_end" => calib_end = v.parse().ok(),
                _ => {}
            }
        }
    }
    Ok(GroundTruth {
        left,
        right,
        scene,
        left_eyeball,
        right_eyeball,
        calib_range: calib_start.zip(calib_end),
    })
}

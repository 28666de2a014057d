//! Recording ingestion and CSV outputs.
//!
//! A recording is a directory holding a `manifest.txt` (key=value lines) and
//! one landmark file per camera stream (`landmarks_left.csv`,
//! `landmarks_right.csv`, `landmarks_scene.csv`). Landmark rows carry the
//! detector outputs per frame and kind; malformed rows degrade to invalid
//! frames instead of aborting the load. All output CSV layouts of the
//! pipeline live in this module as well; they are specific to this tool.

mod landmarks;
mod outputs;

pub use landmarks::{parse_landmark_file, write_landmark_file};
pub use outputs::{
    read_depth_csv, read_features_csv, read_gaze_csv, read_movements_csv, write_depth_csv,
    write_features_csv, write_gaze_csv, write_movements_csv, DepthRecord, EyeFeaturesRecord,
    GazeRecord, MovementRecord,
};

use std::path::{Path, PathBuf};

/// Camera stream a landmark row belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamSource {
    LeftEye,
    RightEye,
    Scene,
}

impl StreamSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LeftEye => "left_eye",
            Self::RightEye => "right_eye",
            Self::Scene => "scene",
        }
    }
}

/// What a landmark set outlines.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LandmarkKind {
    Pupil,
    Iris,
    EyelidUpper,
    EyelidLower,
    Marker,
}

impl LandmarkKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Pupil => "pupil",
            Self::Iris => "iris",
            Self::EyelidUpper => "eyelid_upper",
            Self::EyelidLower => "eyelid_lower",
            Self::Marker => "marker",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "pupil" => Self::Pupil,
            "iris" => Self::Iris,
            "eyelid_upper" => Self::EyelidUpper,
            "eyelid_lower" => Self::EyelidLower,
            "marker" => Self::Marker,
            _ => return None,
        })
    }
}

/// One landmark detection row.
#[derive(Debug, Clone)]
pub struct FrameLandmarks {
    pub frame_id: u64,
    pub timestamp_ns: i64,
    pub source: StreamSource,
    pub kind: LandmarkKind,
    pub points: Vec<[f64; 2]>,
    pub confidence: f64,
    pub valid: bool,
}

/// Camera geometry and rates of a recording.
#[derive(Debug, Clone)]
pub struct RecordingManifest {
    pub eye_resolution: (u32, u32),
    pub scene_resolution: (u32, u32),
    pub eye_fps: f64,
    pub scene_fps: f64,
    /// Scene-frame range (inclusive) to calibrate on; all marker frames
    /// otherwise.
    pub calibration_range: Option<(u64, u64)>,
}

/// Default eye-camera resolution when the manifest omits it.
pub const DEFAULT_EYE_RESOLUTION: (u32, u32) = (192, 192);

/// Counters for rows that could not be used as-is.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    /// Rows that failed to parse (skipped or kept invalid).
    pub malformed_rows: usize,
    /// Rows flagged valid whose content violated an invariant and were
    /// demoted to invalid.
    pub demoted_rows: usize,
}

/// A fully loaded recording.
#[derive(Debug)]
pub struct LoadedRecording {
    pub manifest: RecordingManifest,
    pub left: Vec<FrameLandmarks>,
    pub right: Vec<FrameLandmarks>,
    pub scene: Vec<FrameLandmarks>,
    pub report: LoadReport,
}

#[derive(Debug, thiserror::Error)]
pub enum RecordingError {
    #[error("missing manifest: {0}")]
    MissingManifest(PathBuf),
    #[error("manifest: {0}")]
    Manifest(String),
    #[error("missing landmark file: {0}")]
    MissingLandmarks(PathBuf),
    #[error("{source_name} stream: timestamps not strictly increasing at row {row}")]
    NonMonotoneTimestamp {
        source_name: &'static str,
        row: usize,
    },
    #[error("{0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// File names inside a recording directory.
pub const MANIFEST_FILE: &str = "manifest.txt";
pub fn landmark_file_name(source: StreamSource) -> &'static str {
    match source {
        StreamSource::LeftEye => "landmarks_left.csv",
        StreamSource::RightEye => "landmarks_right.csv",
        StreamSource::Scene => "landmarks_scene.csv",
    }
}

/// Parse a manifest from `key=value` lines.
pub fn parse_manifest(text: &str) -> Result<RecordingManifest, RecordingError> {
    let mut map = std::collections::BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            RecordingError::Manifest(format!("line {}: expected key=value", i + 1))
        })?;
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    let get_u32 = |key: &str| -> Result<Option<u32>, RecordingError> {
        map.get(key)
            .map(|v| {
                v.parse::<u32>()
                    .map_err(|_| RecordingError::Manifest(format!("bad {key}: {v}")))
            })
            .transpose()
    };
    let get_f64 = |key: &str| -> Result<Option<f64>, RecordingError> {
        map.get(key)
            .map(|v| {
                v.parse::<f64>()
                    .map_err(|_| RecordingError::Manifest(format!("bad {key}: {v}")))
            })
            .transpose()
    };
    let require = |name: &str, v: Option<u32>| {
        v.ok_or_else(|| RecordingError::Manifest(format!("missing required key {name}")))
    };

    let eye_w = get_u32("eye_width")?.unwrap_or(DEFAULT_EYE_RESOLUTION.0);
    let eye_h = get_u32("eye_height")?.unwrap_or(DEFAULT_EYE_RESOLUTION.1);
    let scene_w = require("scene_width", get_u32("scene_width")?)?;
    let scene_h = require("scene_height", get_u32("scene_height")?)?;
    let eye_fps = get_f64("eye_fps")?
        .ok_or_else(|| RecordingError::Manifest("missing required key eye_fps".into()))?;
    let scene_fps = get_f64("scene_fps")?
        .ok_or_else(|| RecordingError::Manifest("missing required key scene_fps".into()))?;
    if eye_w == 0 || eye_h == 0 || scene_w == 0 || scene_h == 0 {
        return Err(RecordingError::Manifest(
            "resolutions must be positive".into(),
        ));
    }
    if eye_fps <= 0.0 || scene_fps <= 0.0 {
        return Err(RecordingError::Manifest(
            "frame rates must be positive".into(),
        ));
    }
    let calibration_range = match (map.get("calib_start"), map.get("calib_end")) {
        (Some(a), Some(b)) => {
            let start = a
                .parse::<u64>()
                .map_err(|_| RecordingError::Manifest(format!("bad calib_start: {a}")))?;
            let end = b
                .parse::<u64>()
                .map_err(|_| RecordingError::Manifest(format!("bad calib_end: {b}")))?;
            if end < start {
                return Err(RecordingError::Manifest(
                    "calib_end before calib_start".into(),
                ));
            }
            Some((start, end))
        }
        (None, None) => None,
        _ => {
            return Err(RecordingError::Manifest(
                "calib_start and calib_end must both be present".into(),
            ))
        }
    };
    Ok(RecordingManifest {
        eye_resolution: (eye_w, eye_h),
        scene_resolution: (scene_w, scene_h),
        eye_fps,
        scene_fps,
        calibration_range,
    })
}

/// Serialize a manifest in the file format.
pub fn manifest_to_string(m: &RecordingManifest) -> String {
    let mut s = format!(
        "eye_width={}\neye_height={}\nscene_width={}\nscene_height={}\neye_fps={}\nscene_fps={}\n",
        m.eye_resolution.0,
        m.eye_resolution.1,
        m.scene_resolution.0,
        m.scene_resolution.1,
        m.eye_fps,
        m.scene_fps
    );
    if let Some((a, b)) = m.calibration_range {
        s.push_str(&format!("calib_start={a}\ncalib_end={b}\n"));
    }
    s
}

/// Load a recording directory: manifest plus the three landmark streams.
///
/// Malformed rows are demoted or skipped and counted in the report;
/// non-monotone timestamps abort the load.
pub fn load_recording(
    project_path: &Path,
    recording_id: &str,
) -> Result<LoadedRecording, RecordingError> {
    let dir = project_path.join(recording_id);
    let manifest_path = dir.join(MANIFEST_FILE);
    if !manifest_path.is_file() {
        return Err(RecordingError::MissingManifest(manifest_path));
    }
    let manifest = parse_manifest(&std::fs::read_to_string(&manifest_path)?)?;

    let mut report = LoadReport::default();
    let mut load_stream = |source: StreamSource| -> Result<Vec<FrameLandmarks>, RecordingError> {
        let path = dir.join(landmark_file_name(source));
        if !path.is_file() {
            return Err(RecordingError::MissingLandmarks(path));
        }
        let resolution = match source {
            StreamSource::Scene => manifest.scene_resolution,
            _ => manifest.eye_resolution,
        };
        let text = std::fs::read_to_string(&path)?;
        let (frames, stream_report) = parse_landmark_file(&text, source, resolution)?;
        report.malformed_rows += stream_report.malformed_rows;
        report.demoted_rows += stream_report.demoted_rows;
        Ok(frames)
    };

    Ok(LoadedRecording {
        left: load_stream(StreamSource::LeftEye)?,
        right: load_stream(StreamSource::RightEye)?,
        scene: load_stream(StreamSource::Scene)?,
        manifest,
        report,
    })
}

/// Landmark rows of one frame, grouped by kind.
#[derive(Debug, Clone, Copy, Default)]
pub struct EyeFrameRows<'a> {
    pub frame_id: u64,
    pub timestamp_ns: i64,
    pub pupil: Option<&'a FrameLandmarks>,
    pub iris: Option<&'a FrameLandmarks>,
    pub eyelid_upper: Option<&'a FrameLandmarks>,
    pub eyelid_lower: Option<&'a FrameLandmarks>,
    pub marker: Option<&'a FrameLandmarks>,
}

/// Group a stream's rows by frame id, preserving order.
pub fn group_frames(stream: &[FrameLandmarks]) -> Vec<EyeFrameRows<'_>> {
    let mut groups: Vec<EyeFrameRows> = Vec::new();
    for row in stream {
        let need_new = groups.last().is_none_or(|g| g.frame_id != row.frame_id);
        if need_new {
            groups.push(EyeFrameRows {
                frame_id: row.frame_id,
                timestamp_ns: row.timestamp_ns,
                ..EyeFrameRows::default()
            });
        }
        let group = groups.last_mut().unwrap();
        let slot = match row.kind {
            LandmarkKind::Pupil => &mut group.pupil,
            LandmarkKind::Iris => &mut group.iris,
            LandmarkKind::EyelidUpper => &mut group.eyelid_upper,
            LandmarkKind::EyelidLower => &mut group.eyelid_lower,
            LandmarkKind::Marker => &mut group.marker,
        };
        *slot = Some(row);
    }
    groups
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn manifest_round_trip_with_defaults() {
        let text = "scene_width=800\nscene_height=600\neye_fps=200\nscene_fps=30\n";
        let m = parse_manifest(text).unwrap();
        assert_eq!(m.eye_resolution, DEFAULT_EYE_RESOLUTION);
        assert_eq!(m.scene_resolution, (800, 600));
        assert_eq!(m.calibration_range, None);
        let back = parse_manifest(&manifest_to_string(&m)).unwrap();
        assert_eq!(back.scene_resolution, (800, 600));
        assert_eq!(back.eye_fps, 200.0);
    }

    #[test]
    fn scene_resolution_is_required() {
        let err = parse_manifest("eye_fps=200\nscene_fps=30\n").unwrap_err();
        assert!(matches!(err, RecordingError::Manifest(_)));
    }

    #[test]
    fn calibration_range_needs_both_ends() {
        let err = parse_manifest(
            "scene_width=800\nscene_height=600\neye_fps=200\nscene_fps=30\ncalib_start=10\n",
        )
        .unwrap_err();
        assert!(matches!(err, RecordingError::Manifest(_)));
    }

    #[test]
    fn missing_manifest_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        let err = load_recording(dir.path(), "rec").unwrap_err();
        assert!(matches!(err, RecordingError::MissingManifest(_)));
    }

    #[test]
    fn minimal_recording_with_one_frame_per_stream() {
        let dir = tempfile::tempdir().unwrap();
        let rec = dir.path().join("rec");
        std::fs::create_dir_all(&rec).unwrap();
        std::fs::write(
            rec.join(MANIFEST_FILE),
            "scene_width=800\nscene_height=600\neye_fps=200\nscene_fps=30\n",
        )
        .unwrap();
        let header = "frame_id,timestamp_ns,kind,confidence,valid,points";
        for (name, kind) in [
            (landmark_file_name(StreamSource::LeftEye), "pupil"),
            (landmark_file_name(StreamSource::RightEye), "pupil"),
            (landmark_file_name(StreamSource::Scene), "marker"),
        ] {
            std::fs::write(rec.join(name), format!("{header}\n0,0,{kind},1,1,5;5\n")).unwrap();
        }
        let loaded = load_recording(dir.path(), "rec").unwrap();
        assert_eq!(loaded.left.len(), 1);
        assert_eq!(loaded.right.len(), 1);
        assert_eq!(loaded.scene.len(), 1);
        assert_eq!(loaded.report, LoadReport::default());
    }

    #[test]
    fn grouping_collects_kinds_per_frame() {
        let mk = |frame_id, kind| FrameLandmarks {
            frame_id,
            timestamp_ns: frame_id as i64 * 1000,
            source: StreamSource::LeftEye,
            kind,
            points: vec![[1.0, 2.0]],
            confidence: 1.0,
            valid: true,
        };
        let stream = vec![
            mk(0, LandmarkKind::Pupil),
            mk(0, LandmarkKind::Iris),
            mk(1, LandmarkKind::Pupil),
        ];
        let groups = group_frames(&stream);
        assert_eq!(groups.len(), 2);
        assert!(groups[0].pupil.is_some());
        assert!(groups[0].iris.is_some());
        assert!(groups[1].iris.is_none());
    }
}

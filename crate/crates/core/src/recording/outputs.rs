//! Output CSV schemas.
//!
//! Invalid fields serialize as empty cells; floats use the shortest
//! round-trip form so write/read cycles are lossless. Writers return the
//! number of data rows written.

use std::fmt::Write as _;
use std::path::Path;

use crate::calibration::EstimatorKey;
use crate::geometry::Ellipse;
use crate::movement::MovementLabel;

use super::RecordingError;

/// One row of `features_<eye>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct EyeFeaturesRecord {
    pub frame_id: u64,
    pub timestamp_ns: i64,
    pub pupil: Option<Ellipse>,
    pub iris: Option<Ellipse>,
    pub opening_px: Option<f64>,
    /// Eyeball (cx, cy, r); constant over a recording but kept per row.
    pub eyeball: Option<(f64, f64, f64)>,
    pub pupil_vector: Option<(f64, f64, f64)>,
    pub iris_vector: Option<(f64, f64, f64)>,
}

impl EyeFeaturesRecord {
    /// Bitfield: 1 pupil, 2 iris, 4 opening, 8 pupil vector, 16 iris
    /// vector.
    pub fn validity_bits(&self) -> u8 {
        let mut bits = 0;
        if self.pupil.is_some() {
            bits |= 1;
        }
        if self.iris.is_some() {
            bits |= 2;
        }
        if self.opening_px.is_some() {
            bits |= 4;
        }
        if self.pupil_vector.is_some() {
            bits |= 8;
        }
        if self.iris_vector.is_some() {
            bits |= 16;
        }
        bits
    }
}

/// One row of `gaze.csv`: a synchronized eye-frame pair with all 24
/// estimates in canonical estimator order.
#[derive(Debug, Clone, PartialEq)]
pub struct GazeRecord {
    pub scene_frame_id: u64,
    pub left_timestamp_ns: i64,
    pub right_timestamp_ns: i64,
    pub estimates: Vec<Option<(f64, f64)>>,
}

/// One row of `movements_<eye>.csv`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MovementRecord {
    pub timestamp_ns: i64,
    pub label: MovementLabel,
}

/// One row of `depth.csv`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthRecord {
    pub scene_frame_id: u64,
    pub marker_area_px2: Option<f64>,
    pub depth_cm_powerlaw: Option<f64>,
    pub depth_cm_knn: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn parse_opt(s: &str, what: &str, row: usize) -> Result<Option<f64>, RecordingError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<f64>()
        .map(Some)
        .map_err(|_| RecordingError::Format(format!("row {row}: bad {what}: {s}")))
}

fn features_header() -> String {
    "frame_id,timestamp_ns,\
     pupil_cx,pupil_cy,pupil_a,pupil_b,pupil_angle,\
     iris_cx,iris_cy,iris_a,iris_b,iris_angle,\
     opening_px,eyeball_cx,eyeball_cy,eyeball_r,\
     pupil_vx,pupil_vy,pupil_vz,iris_vx,iris_vy,iris_vz,validity"
        .replace(' ', "")
}

/// Write `features_<eye>.csv`.
pub fn write_features_csv(
    path: &Path,
    records: &[EyeFeaturesRecord],
) -> Result<usize, RecordingError> {
    let mut out = features_header();
    out.push('\n');
    for r in records {
        let ellipse_cells = |e: &Option<Ellipse>| match e {
            Some(e) => format!(
                "{},{},{},{},{}",
                e.center.0, e.center.1, e.semi_major, e.semi_minor, e.angle
            ),
            None => ",,,,".to_string(),
        };
        let triple = |t: &Option<(f64, f64, f64)>| match t {
            Some((a, b, c)) => format!("{a},{b},{c}"),
            None => ",,".to_string(),
        };
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.frame_id,
            r.timestamp_ns,
            ellipse_cells(&r.pupil),
            ellipse_cells(&r.iris),
            opt(r.opening_px),
            triple(&r.eyeball),
            triple(&r.pupil_vector),
            triple(&r.iris_vector)
        );
        let pos = out.len() - 1;
        out.insert_str(pos, &format!(",{}", r.validity_bits()));
    }
    std::fs::write(path, out)?;
    Ok(records.len())
}

/// Read `features_<eye>.csv`.
pub fn read_features_csv(path: &Path) -> Result<Vec<EyeFeaturesRecord>, RecordingError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RecordingError::Format("features: empty file".into()))?;
    if header != features_header() {
        return Err(RecordingError::Format(format!(
            "features: bad header: {header}"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 23 {
            return Err(RecordingError::Format(format!(
                "features row {row}: expected 23 cells, got {}",
                cells.len()
            )));
        }
        let ellipse = |base: usize| -> Result<Option<Ellipse>, RecordingError> {
            let vals: Vec<Option<f64>> = (0..5)
                .map(|j| parse_opt(cells[base + j], "ellipse cell", row))
                .collect::<Result<_, _>>()?;
            if vals.iter().all(Option::is_some) {
                Ok(Some(Ellipse {
                    center: (vals[0].unwrap(), vals[1].unwrap()),
                    semi_major: vals[2].unwrap(),
                    semi_minor: vals[3].unwrap(),
                    angle: vals[4].unwrap(),
                }))
            } else {
                Ok(None)
            }
        };
        let triple = |base: usize| -> Result<Option<(f64, f64, f64)>, RecordingError> {
            let vals: Vec<Option<f64>> = (0..3)
                .map(|j| parse_opt(cells[base + j], "vector cell", row))
                .collect::<Result<_, _>>()?;
            if vals.iter().all(Option::is_some) {
                Ok(Some((vals[0].unwrap(), vals[1].unwrap(), vals[2].unwrap())))
            } else {
                Ok(None)
            }
        };
        records.push(EyeFeaturesRecord {
            frame_id: cells[0]
                .parse()
                .map_err(|_| RecordingError::Format(format!("row {row}: bad frame id")))?,
            timestamp_ns: cells[1]
                .parse()
                .map_err(|_| RecordingError::Format(format!("row {row}: bad timestamp")))?,
            pupil: ellipse(2)?,
            iris: ellipse(7)?,
            opening_px: parse_opt(cells[12], "opening", row)?,
            eyeball: triple(13)?,
            pupil_vector: triple(16)?,
            iris_vector: triple(19)?,
        });
    }
    Ok(records)
}

fn gaze_header() -> String {
    let mut h = String::from("scene_frame_id,left_timestamp_ns,right_timestamp_ns");
    for key in EstimatorKey::all() {
        let _ = write!(h, ",{key}_x,{key}_y");
    }
    h
}

/// Write `gaze.csv`.
pub fn write_gaze_csv(path: &Path, records: &[GazeRecord]) -> Result<usize, RecordingError> {
    let mut out = gaze_header();
    out.push('\n');
    for r in records {
        assert_eq!(r.estimates.len(), 24, "gaze record must carry 24 estimates");
        let _ = write!(
            out,
            "{},{},{}",
            r.scene_frame_id, r.left_timestamp_ns, r.right_timestamp_ns
        );
        for e in &r.estimates {
            match e {
                Some((x, y)) => {
                    let _ = write!(out, ",{x},{y}");
                }
                None => out.push_str(",,"),
            }
        }
        out.push('\n');
    }
    std::fs::write(path, out)?;
    Ok(records.len())
}

/// Read `gaze.csv`.
pub fn read_gaze_csv(path: &Path) -> Result<Vec<GazeRecord>, RecordingError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RecordingError::Format("gaze: empty file".into()))?;
    if header != gaze_header() {
        return Err(RecordingError::Format(format!(
            "gaze: bad header: {header}"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 3 + 48 {
            return Err(RecordingError::Format(format!(
                "gaze row {row}: expected 51 cells, got {}",
                cells.len()
            )));
        }
        let mut estimates = Vec::with_capacity(24);
        for k in 0..24 {
            let x = parse_opt(cells[3 + 2 * k], "estimate", row)?;
            let y = parse_opt(cells[4 + 2 * k], "estimate", row)?;
            estimates.push(match (x, y) {
                (Some(x), Some(y)) => Some((x, y)),
                _ => None,
            });
        }
        records.push(GazeRecord {
            scene_frame_id: cells[0]
                .parse()
                .map_err(|_| RecordingError::Format(format!("row {row}: bad frame id")))?,
            left_timestamp_ns: cells[1]
                .parse()
                .map_err(|_| RecordingError::Format(format!("row {row}: bad timestamp")))?,
            right_timestamp_ns: cells[2]
                .parse()
                .map_err(|_| RecordingError::Format(format!("row {row}: bad timestamp")))?,
            estimates,
        });
    }
    Ok(records)
}

const MOVEMENTS_HEADER: &str = "timestamp_ns,label";

/// Write `movements_<eye>.csv`.
pub fn write_movements_csv(
    path: &Path,
    records: &[MovementRecord],
) -> Result<usize, RecordingError> {
    let mut out = String::from(MOVEMENTS_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(out, "{},{}", r.timestamp_ns, r.label.as_str());
    }
    std::fs::write(path, out)?;
    Ok(records.len())
}

/// Read `movements_<eye>.csv`.
pub fn read_movements_csv(path: &Path) -> Result<Vec<MovementRecord>, RecordingError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RecordingError::Format("movements: empty file".into()))?;
    if header != MOVEMENTS_HEADER {
        return Err(RecordingError::Format(format!(
            "movements: bad header: {header}"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let (ts, label) = line
            .split_once(',')
            .ok_or_else(|| RecordingError::Format(format!("movements row {row}: bad row")))?;
        records.push(MovementRecord {
            timestamp_ns: ts
                .parse()
                .map_err(|_| RecordingError::Format(format!("row {row}: bad timestamp")))?,
            label: MovementLabel::parse(label)
                .ok_or_else(|| RecordingError::Format(format!("row {row}: bad label {label}")))?,
        });
    }
    Ok(records)
}

const DEPTH_HEADER: &str = "scene_frame_id,marker_area_px2,depth_cm_powerlaw,depth_cm_knn";

/// Write `depth.csv`.
pub fn write_depth_csv(path: &Path, records: &[DepthRecord]) -> Result<usize, RecordingError> {
    let mut out = String::from(DEPTH_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.scene_frame_id,
            opt(r.marker_area_px2),
            opt(r.depth_cm_powerlaw),
            opt(r.depth_cm_knn)
        );
    }
    std::fs::write(path, out)?;
    Ok(records.len())
}

/// Read `depth.csv`.
pub fn read_depth_csv(path: &Path) -> Result<Vec<DepthRecord>, RecordingError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RecordingError::Format("depth: empty file".into()))?;
    if header != DEPTH_HEADER {
        return Err(RecordingError::Format(format!(
            "depth: bad header: {header}"
        )));
    }
    let mut records = Vec::new();
    for (i, line) in lines.enumerate() {
        let row = i + 2;
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != 4 {
            return Err(RecordingError::Format(format!(
                "depth row {row}: bad cell count"
            )));
        }
        records.push(DepthRecord {
            scene_frame_id: cells[0]
                .parse()
                .map_err(|_| RecordingError::Format(format!("row {row}: bad frame id")))?,
            marker_area_px2: parse_opt(cells[1], "area", row)?,
            depth_cm_powerlaw: parse_opt(cells[2], "depth", row)?,
            depth_cm_knn: parse_opt(cells[3], "depth", row)?,
        });
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calibration::{Combo, EstimatorKey};

    fn sample_features_record(seed: f64) -> EyeFeaturesRecord {
        EyeFeaturesRecord {
            frame_id: seed as u64,
            timestamp_ns: (seed * 1e6) as i64,
            pupil: Some(Ellipse {
                center: (96.125 + seed, 90.0625),
                semi_major: 14.5,
                semi_minor: 11.25,
                angle: std::f64::consts::FRAC_PI_4,
            }),
            iris: None,
            opening_px: Some(17.333333333333332 + seed),
            eyeball: Some((96.0, 95.5, 58.75)),
            pupil_vector: Some((0.1, -0.2, 0.9746794344808963)),
            iris_vector: None,
        }
    }

    #[test]
    fn features_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features_left.csv");
        let records = vec![sample_features_record(0.0), sample_features_record(3.5)];
        let n = write_features_csv(&path, &records).unwrap();
        assert_eq!(n, 2);
        let back = read_features_csv(&path).unwrap();
        assert_eq!(records, back);
    }

    #[test]
    fn empty_record_list_writes_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gaze.csv");
        let n = write_gaze_csv(&path, &[]).unwrap();
        assert_eq!(n, 0);
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 1);
        assert!(read_gaze_csv(&path).unwrap().is_empty());
    }

    #[test]
    fn gaze_row_with_all_24_estimates() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gaze.csv");
        let record = GazeRecord {
            scene_frame_id: 7,
            left_timestamp_ns: 1000,
            right_timestamp_ns: 1005,
            estimates: (0..24).map(|i| Some((i as f64, i as f64 * 2.0))).collect(),
        };
        write_gaze_csv(&path, std::slice::from_ref(&record)).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let data_line = text.lines().nth(1).unwrap();
        assert_eq!(data_line.split(',').count(), 51);
        assert!(!data_line.contains(",,"));
        let back = read_gaze_csv(&path).unwrap();
        assert_eq!(back[0], record);
    }

    #[test]
    fn invalid_right_eye_estimates_round_trip_as_empty() {
        let keys = EstimatorKey::all();
        let estimates: Vec<Option<(f64, f64)>> = keys
            .iter()
            .map(|k| {
                if k.combo == Combo::Right || k.combo == Combo::Binocular {
                    None
                } else {
                    Some((400.25, 300.125))
                }
            })
            .collect();
        let record = GazeRecord {
            scene_frame_id: 0,
            left_timestamp_ns: 0,
            right_timestamp_ns: 0,
            estimates,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("gaze.csv");
        write_gaze_csv(&path, std::slice::from_ref(&record)).unwrap();
        let back = read_gaze_csv(&path).unwrap();
        assert_eq!(back[0], record);
        for (k, e) in keys.iter().zip(&back[0].estimates) {
            assert_eq!(e.is_none(), k.combo != Combo::Left, "{k}");
        }
    }

    #[test]
    fn movements_and_depth_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let movements = vec![
            MovementRecord {
                timestamp_ns: 0,
                label: MovementLabel::Fixation,
            },
            MovementRecord {
                timestamp_ns: 5_000_000,
                label: MovementLabel::Error,
            },
        ];
        let mpath = dir.path().join("movements_left.csv");
        assert_eq!(write_movements_csv(&mpath, &movements).unwrap(), 2);
        assert_eq!(read_movements_csv(&mpath).unwrap(), movements);

        let depth = vec![
            DepthRecord {
                scene_frame_id: 0,
                marker_area_px2: Some(10000.0),
                depth_cm_powerlaw: Some(168.02197802),
                depth_cm_knn: None,
            },
            DepthRecord {
                scene_frame_id: 1,
                marker_area_px2: None,
                depth_cm_powerlaw: None,
                depth_cm_knn: None,
            },
        ];
        let dpath = dir.path().join("depth.csv");
        assert_eq!(write_depth_csv(&dpath, &depth).unwrap(), 2);
        assert_eq!(read_depth_csv(&dpath).unwrap(), depth);
    }

    #[test]
    fn validity_bits_reflect_presence() {
        let mut r = sample_features_record(0.0);
        assert_eq!(r.validity_bits(), 1 | 4 | 8);
        r.iris = r.pupil;
        r.iris_vector = r.pupil_vector;
        assert_eq!(r.validity_bits(), 31);
    }
}

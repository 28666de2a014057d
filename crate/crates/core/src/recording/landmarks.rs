//! Landmark stream files.
//!
//! One UTF-8 file per camera stream with header
//! `frame_id,timestamp_ns,kind,confidence,valid,points`; `points` packs
//! coordinates as `x1;y1;x2;y2;...`.

use std::fmt::Write as _;

use super::{FrameLandmarks, LandmarkKind, LoadReport, RecordingError, StreamSource};

pub(super) const HEADER: &str = "frame_id,timestamp_ns,kind,confidence,valid,points";

/// Parse a landmark file.
///
/// Rows whose frame id or timestamp cannot be read are skipped and counted;
/// other defects demote the row to invalid. Rows claiming validity with
/// empty points or points outside `resolution` are demoted and counted.
/// Timestamps must never decrease, and must strictly increase across frame
/// ids.
pub fn parse_landmark_file(
    text: &str,
    source: StreamSource,
    resolution: (u32, u32),
) -> Result<(Vec<FrameLandmarks>, LoadReport), RecordingError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| RecordingError::Format(format!("{}: empty file", source.as_str())))?;
    if header != HEADER {
        return Err(RecordingError::Format(format!(
            "{}: bad header: {header}",
            source.as_str()
        )));
    }

    let mut frames = Vec::new();
    let mut report = LoadReport::default();
    let mut last: Option<(u64, i64)> = None;
    let (w, h) = (resolution.0 as f64, resolution.1 as f64);

    for (i, line) in lines.enumerate() {
        let row = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.splitn(6, ',').collect();
        if parts.len() != 6 {
            report.malformed_rows += 1;
            continue;
        }
        let (Ok(frame_id), Ok(timestamp_ns)) = (parts[0].parse::<u64>(), parts[1].parse::<i64>())
        else {
            report.malformed_rows += 1;
            continue;
        };

        if let Some((last_id, last_ts)) = last {
            let monotone = if frame_id == last_id {
                timestamp_ns == last_ts
            } else {
                timestamp_ns > last_ts
            };
            if !monotone {
                return Err(RecordingError::NonMonotoneTimestamp {
                    source_name: source.as_str(),
                    row,
                });
            }
        }
        last = Some((frame_id, timestamp_ns));

        let mut malformed = false;
        let kind = LandmarkKind::parse(parts[2]).unwrap_or_else(|| {
            malformed = true;
            LandmarkKind::Pupil
        });
        let confidence = parts[3].parse::<f64>().unwrap_or_else(|_| {
            malformed = true;
            0.0
        });
        let mut valid = match parts[4] {
            "1" | "true" => true,
            "0" | "false" => false,
            _ => {
                malformed = true;
                false
            }
        };
        let mut points = Vec::new();
        if !parts[5].is_empty() {
            let coords: Vec<&str> = parts[5].split(';').collect();
            if !coords.len().is_multiple_of(2) {
                malformed = true;
            } else {
                for pair in coords.chunks(2) {
                    match (pair[0].parse::<f64>(), pair[1].parse::<f64>()) {
                        (Ok(x), Ok(y)) => points.push([x, y]),
                        _ => {
                            malformed = true;
                            break;
                        }
                    }
                }
            }
        }
        if malformed {
            report.malformed_rows += 1;
            valid = false;
        } else if valid {
            let in_bounds = points
                .iter()
                .all(|p| p[0] >= 0.0 && p[0] <= w && p[1] >= 0.0 && p[1] <= h);
            if points.is_empty() || !in_bounds {
                valid = false;
                report.demoted_rows += 1;
            }
        }

        frames.push(FrameLandmarks {
            frame_id,
            timestamp_ns,
            source,
            kind,
            points,
            confidence,
            valid,
        });
    }
    Ok((frames, report))
}

/// Serialize landmark rows in file order.
pub fn write_landmark_file(rows: &[FrameLandmarks]) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},",
            r.frame_id,
            r.timestamp_ns,
            r.kind.as_str(),
            r.confidence,
            if r.valid { 1 } else { 0 }
        );
        for (i, p) in r.points.iter().enumerate() {
            if i > 0 {
                out.push(';');
            }
            let _ = write!(out, "{};{}", p[0], p[1]);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mk_row(frame_id: u64, ts: i64, kind: LandmarkKind, points: Vec<[f64; 2]>) -> FrameLandmarks {
        FrameLandmarks {
            frame_id,
            timestamp_ns: ts,
            source: StreamSource::LeftEye,
            kind,
            points,
            confidence: 0.875,
            valid: true,
        }
    }

    #[test]
    fn round_trip_preserves_rows() {
        let rows = vec![
            mk_row(0, 0, LandmarkKind::Pupil, vec![[1.25, 2.5], [3.0, 4.125]]),
            mk_row(0, 0, LandmarkKind::Iris, vec![[10.0, 20.0]]),
            mk_row(1, 5_000_000, LandmarkKind::Pupil, vec![[1.1, 2.2]]),
        ];
        let text = write_landmark_file(&rows);
        let (back, report) = parse_landmark_file(&text, StreamSource::LeftEye, (192, 192)).unwrap();
        assert_eq!(report, LoadReport::default());
        assert_eq!(back.len(), rows.len());
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.frame_id, b.frame_id);
            assert_eq!(a.timestamp_ns, b.timestamp_ns);
            assert_eq!(a.kind, b.kind);
            assert_eq!(a.points, b.points);
            assert_eq!(a.confidence, b.confidence);
            assert_eq!(a.valid, b.valid);
        }
    }

    #[test]
    fn valid_row_with_empty_points_is_demoted() {
        let text = format!("{HEADER}\n0,0,pupil,1,1,\n");
        let (frames, report) =
            parse_landmark_file(&text, StreamSource::LeftEye, (192, 192)).unwrap();
        assert_eq!(frames.len(), 1);
        assert!(!frames[0].valid);
        assert_eq!(report.demoted_rows, 1);
        assert_eq!(report.malformed_rows, 0);
    }

    #[test]
    fn out_of_bounds_points_are_demoted() {
        let text = format!("{HEADER}\n0,0,pupil,1,1,500;40\n");
        let (frames, report) =
            parse_landmark_file(&text, StreamSource::LeftEye, (192, 192)).unwrap();
        assert!(!frames[0].valid);
        assert_eq!(report.demoted_rows, 1);
    }

    #[test]
    fn unparseable_rows_are_counted() {
        let text = format!("{HEADER}\nnot,a,row\n0,0,pupil,1,1,5;5\n0,0,what,x,1,1;1\n");
        let (frames, report) =
            parse_landmark_file(&text, StreamSource::LeftEye, (192, 192)).unwrap();
        assert_eq!(frames.len(), 2);
        assert_eq!(report.malformed_rows, 2);
        assert!(frames[0].valid);
        assert!(!frames[1].valid);
    }

    #[test]
    fn non_monotone_timestamps_are_fatal() {
        let text = format!("{HEADER}\n0,100,pupil,1,1,5;5\n1,100,pupil,1,1,5;5\n");
        let err = parse_landmark_file(&text, StreamSource::LeftEye, (192, 192)).unwrap_err();
        assert!(matches!(
            err,
            RecordingError::NonMonotoneTimestamp { row: 3, .. }
        ));
    }

    #[test]
    fn same_frame_rows_share_their_timestamp() {
        let text = format!("{HEADER}\n0,100,pupil,1,1,5;5\n0,101,iris,1,1,5;5\n");
        assert!(parse_landmark_file(&text, StreamSource::LeftEye, (192, 192)).is_err());
    }
}

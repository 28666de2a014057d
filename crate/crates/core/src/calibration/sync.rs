//! Timestamp synchronization between the scene stream and the two eye
//! streams.

use super::CalibrationError;

/// Calibration-side assignment: the one nearest eye frame per eye for a
/// scene frame.
#[derive(Debug, Clone, Copy)]
pub struct SyncAssignment {
    pub scene_frame_id: u64,
    pub left_eye_frame_id: u64,
    pub right_eye_frame_id: u64,
    /// Eye timestamp minus scene timestamp.
    pub left_offset_ns: i64,
    pub right_offset_ns: i64,
}

/// Output-side assignment: one gaze row per left-eye frame, paired with the
/// nearest right-eye frame and assigned to the nearest scene frame.
#[derive(Debug, Clone, Copy)]
pub struct GazeRowAssignment {
    pub left_eye_frame_id: u64,
    pub right_eye_frame_id: u64,
    pub scene_frame_id: u64,
}

#[derive(Debug, Clone)]
pub struct SyncResult {
    pub per_scene: Vec<SyncAssignment>,
    pub gaze_rows: Vec<GazeRowAssignment>,
}

/// Index of the frame whose timestamp is nearest to `t`; equidistant
/// neighbors resolve to the earlier frame. `frames` must be sorted by
/// timestamp.
fn nearest(frames: &[(u64, i64)], t: i64) -> usize {
    let pos = frames.partition_point(|&(_, ts)| ts < t);
    if pos == 0 {
        return 0;
    }
    if pos == frames.len() {
        return frames.len() - 1;
    }
    let before = t - frames[pos - 1].1;
    let after = frames[pos].1 - t;
    if after < before {
        pos
    } else {
        pos - 1
    }
}

/// Match eye frames to scene frames by minimum timestamp distance.
///
/// Produces both directions: per scene frame the nearest eye frame of each
/// eye (for calibration), and per left-eye frame a gaze row with its nearest
/// right-eye partner and scene frame (for output, giving about
/// eye_fps/scene_fps rows per scene frame).
pub fn synchronize(
    scene: &[(u64, i64)],
    left: &[(u64, i64)],
    right: &[(u64, i64)],
) -> Result<SyncResult, CalibrationError> {
    if scene.is_empty() {
        return Err(CalibrationError::EmptyStream("scene"));
    }
    if left.is_empty() {
        return Err(CalibrationError::EmptyStream("left eye"));
    }
    if right.is_empty() {
        return Err(CalibrationError::EmptyStream("right eye"));
    }

    let per_scene = scene
        .iter()
        .map(|&(scene_id, ts)| {
            let l = nearest(left, ts);
            let r = nearest(right, ts);
            SyncAssignment {
                scene_frame_id: scene_id,
                left_eye_frame_id: left[l].0,
                right_eye_frame_id: right[r].0,
                left_offset_ns: left[l].1 - ts,
                right_offset_ns: right[r].1 - ts,
            }
        })
        .collect();

    let gaze_rows = left
        .iter()
        .map(|&(left_id, ts)| GazeRowAssignment {
            left_eye_frame_id: left_id,
            right_eye_frame_id: right[nearest(right, ts)].0,
            scene_frame_id: scene[nearest(scene, ts)].0,
        })
        .collect();

    Ok(SyncResult {
        per_scene,
        gaze_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ticks(fps: f64, duration_s: f64) -> Vec<(u64, i64)> {
        let n = (fps * duration_s).round() as u64;
        (0..n)
            .map(|k| (k, (k as f64 * 1e9 / fps).round() as i64))
            .collect()
    }

    #[test]
    fn picks_the_nearest_eye_frame() {
        let scene = [(0u64, 0i64)];
        let eye = [(0u64, -3_000_000i64), (1, 2_000_000), (2, 9_000_000)];
        let result = synchronize(&scene, &eye, &eye).unwrap();
        assert_eq!(result.per_scene[0].left_eye_frame_id, 1);
        assert_eq!(result.per_scene[0].left_offset_ns, 2_000_000);
    }

    #[test]
    fn equidistant_frames_resolve_to_the_earlier_one() {
        let scene = [(0u64, 100i64)];
        let eye = [(0u64, 90i64), (1, 110)];
        let result = synchronize(&scene, &eye, &eye).unwrap();
        assert_eq!(result.per_scene[0].left_eye_frame_id, 0);
    }

    #[test]
    fn empty_stream_is_an_error() {
        let eye = [(0u64, 0i64)];
        assert!(matches!(
            synchronize(&[], &eye, &eye),
            Err(CalibrationError::EmptyStream("scene"))
        ));
        assert!(synchronize(&eye, &[], &eye).is_err());
    }

    #[test]
    fn rate_ratio_sets_the_rows_per_scene_frame() {
        // 200 Hz eye, 30 Hz scene, 10 s: 2000 gaze rows over 300 scene
        // frames.
        let scene = ticks(30.0, 10.0);
        let eye = ticks(200.0, 10.0);
        let result = synchronize(&scene, &eye, &eye).unwrap();
        assert_eq!(result.gaze_rows.len(), 2000);
        assert_eq!(scene.len(), 300);
        let mean = result.gaze_rows.len() as f64 / scene.len() as f64;
        assert!((mean - 6.67).abs() <= 0.01, "mean {mean}");
    }

    #[test]
    fn no_unchosen_frame_is_strictly_nearer() {
        let scene = ticks(30.0, 2.0);
        let eye = ticks(200.0, 2.0);
        let result = synchronize(&scene, &eye, &eye).unwrap();
        for (assignment, &(_, scene_ts)) in result.per_scene.iter().zip(&scene) {
            let chosen = assignment.left_offset_ns.abs();
            for &(_, eye_ts) in &eye {
                assert!((eye_ts - scene_ts).abs() >= chosen);
            }
        }
    }
}

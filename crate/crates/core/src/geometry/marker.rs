//! Calibration-marker observations from scene landmarks.

use super::GeometryError;

/// A marker detection in one scene frame.
#[derive(Debug, Clone)]
pub struct MarkerObservation {
    pub scene_frame_id: u64,
    pub timestamp_ns: i64,
    /// Centroid of the landmark polygon, scene pixels.
    pub center: (f64, f64),
    /// Ordered landmark points.
    pub polygon: Vec<[f64; 2]>,
    /// Shoelace area of the polygon, px².
    pub area: f64,
    pub valid: bool,
}

impl MarkerObservation {
    /// An invalid placeholder for frames without a usable detection.
    pub fn invalid(scene_frame_id: u64, timestamp_ns: i64) -> Self {
        Self {
            scene_frame_id,
            timestamp_ns,
            center: (0.0, 0.0),
            polygon: Vec::new(),
            area: 0.0,
            valid: false,
        }
    }
}

/// Build a marker observation from ordered landmark points.
///
/// Center is the point centroid; area the absolute shoelace area of the
/// polygon. Fewer than three points yield an invalid observation.
pub fn marker_from_landmarks(
    points: &[[f64; 2]],
    timestamp_ns: i64,
    scene_frame_id: u64,
) -> Result<MarkerObservation, GeometryError> {
    if points.len() < 3 {
        return Err(GeometryError::DegenerateInput(format!(
            "marker polygon needs at least 3 points, got {}",
            points.len()
        )));
    }
    let n = points.len() as f64;
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / n;
    Ok(MarkerObservation {
        scene_frame_id,
        timestamp_ns,
        center: (cx, cy),
        polygon: points.to_vec(),
        area: shoelace_area(points),
        valid: true,
    })
}

/// Absolute shoelace area of an ordered polygon.
pub fn shoelace_area(points: &[[f64; 2]]) -> f64 {
    let mut twice_area = 0.0;
    for i in 0..points.len() {
        let p = points[i];
        let q = points[(i + 1) % points.len()];
        twice_area += p[0] * q[1] - q[0] * p[1];
    }
    twice_area.abs() / 2.0
}

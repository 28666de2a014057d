//! Landmark-set geometry: ellipses, eyelid splines, eye opening, and marker
//! polygons.

mod ellipse;
mod marker;
mod opening;
mod spline;

pub use ellipse::{fit_ellipse, Ellipse};
pub use marker::{marker_from_landmarks, MarkerObservation};
pub use opening::{compute_eye_opening, opening_segment, OpeningSegment};
pub use spline::{fit_eyelid_splines, CubicSpline, EyeCorners, EyelidSpline};

/// Geometry operations fail only on degenerate input; callers mark the
/// affected feature invalid and continue.
#[derive(Debug, thiserror::Error)]
pub enum GeometryError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
}

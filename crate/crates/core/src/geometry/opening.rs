//! Eye-opening measurement.
//!
//! The opening is the largest separation between the eyelid curves measured
//! perpendicular to the eye-corner vector: rays are cast from samples of the
//! upper spline along that perpendicular and intersected exactly with the
//! lower spline's polyline. Casting enforces the orthogonality side condition
//! by construction instead of by tolerance.

use super::spline::{EyeCorners, EyelidSpline};

/// Upper-spline sample count for the opening search.
pub const UPPER_SAMPLES: usize = 100;
/// Lower-spline polyline resolution.
pub const LOWER_SAMPLES: usize = 200;

/// The measured opening and the achieving pair of curve points.
#[derive(Debug, Clone, Copy)]
pub struct OpeningSegment {
    pub upper: [f64; 2],
    pub lower: [f64; 2],
    pub distance: f64,
}

/// Eye opening in pixels; 0 for closed or degenerate configurations.
pub fn compute_eye_opening(
    upper: &EyelidSpline,
    lower: &EyelidSpline,
    corners: &EyeCorners,
) -> f64 {
    opening_segment(upper, lower, corners).map_or(0.0, |s| s.distance)
}

/// Like [`compute_eye_opening`], also reporting which points realize the
/// opening. `None` when no perpendicular ray meets the lower lid.
pub fn opening_segment(
    upper: &EyelidSpline,
    lower: &EyelidSpline,
    corners: &EyeCorners,
) -> Option<OpeningSegment> {
    let perp = (-corners.corner_vector.1, corners.corner_vector.0);
    let upper_samples = upper.sample_uniform(UPPER_SAMPLES);
    let lower_poly = lower.sample_uniform(LOWER_SAMPLES);

    let mut best: Option<OpeningSegment> = None;
    for u in &upper_samples {
        // Nearest intersection of the perpendicular line through u with the
        // lower polyline, searched in both directions.
        let mut nearest: Option<f64> = None;
        for seg in lower_poly.windows(2) {
            let (p, q) = (seg[0], seg[1]);
            let dx = q[0] - p[0];
            let dy = q[1] - p[1];
            let det = dx * perp.1 - dy * perp.0;
            if det.abs() < 1e-15 {
                continue;
            }
            let ex = p[0] - u[0];
            let ey = p[1] - u[1];
            // u + s·perp = p + τ·(q − p)
            let s = (dx * ey - dy * ex) / det;
            let tau = (perp.0 * ey - perp.1 * ex) / det;
            if !(-1e-12..=1.0 + 1e-12).contains(&tau) {
                continue;
            }
            let dist = s.abs();
            if nearest.is_none_or(|n| dist < n) {
                nearest = Some(s);
            }
        }
        if let Some(s) = nearest {
            let dist = s.abs();
            if best.as_ref().is_none_or(|b| dist > b.distance) {
                best = Some(OpeningSegment {
                    upper: *u,
                    lower: [u[0] + s * perp.0, u[1] + s * perp.1],
                    distance: dist,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fit_eyelid_splines;
    use approx::assert_relative_eq;

    /// Independent oracle: enumerate sampled point pairs, keep those whose
    /// connecting vector is within `angle_tol` radians of perpendicular to
    /// the corner vector, and take the max over upper points of the min
    /// admissible distance.
    fn brute_force_opening(
        upper: &EyelidSpline,
        lower: &EyelidSpline,
        corners: &EyeCorners,
        n_upper: usize,
        n_lower: usize,
        angle_tol: f64,
    ) -> f64 {
        let ups = upper.sample_uniform(n_upper);
        let downs = lower.sample_uniform(n_lower);
        let c = corners.corner_vector;
        let mut best = 0.0f64;
        for u in &ups {
            let mut min_dist: Option<f64> = None;
            for d in &downs {
                let vx = d[0] - u[0];
                let vy = d[1] - u[1];
                let norm = (vx * vx + vy * vy).sqrt();
                if norm < 1e-12 {
                    min_dist = Some(0.0);
                    continue;
                }
                // Deviation from perpendicular is asin(|cos(ud, c)|) ≈ the
                // cosine itself at these tolerances.
                if ((vx * c.0 + vy * c.1) / norm).abs() <= angle_tol {
                    min_dist = Some(min_dist.map_or(norm, |m| m.min(norm)));
                }
            }
            if let Some(m) = min_dist {
                best = best.max(m);
            }
        }
        best
    }

    fn straight_lids(offset: f64) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
        let upper: Vec<[f64; 2]> = (0..6).map(|i| [i as f64 * 20.0, 0.0]).collect();
        let lower: Vec<[f64; 2]> = (0..6).map(|i| [i as f64 * 20.0, offset]).collect();
        (upper, lower)
    }

    #[test]
    fn parallel_lids_measure_their_distance() {
        let (u, l) = straight_lids(10.0);
        let (upper, lower, corners) = fit_eyelid_splines(&u, &l).unwrap();
        assert_relative_eq!(
            compute_eye_opening(&upper, &lower, &corners),
            10.0,
            epsilon = 1e-9
        );
    }

    #[test]
    fn rigid_rotation_preserves_the_opening() {
        let (u, l) = straight_lids(10.0);
        let rot = |p: &[f64; 2]| {
            let (s, c) = 0.7f64.sin_cos();
            [c * p[0] - s * p[1], s * p[0] + c * p[1]]
        };
        let u_rot: Vec<[f64; 2]> = u.iter().map(rot).collect();
        let l_rot: Vec<[f64; 2]> = l.iter().map(rot).collect();
        let (upper, lower, corners) = fit_eyelid_splines(&u_rot, &l_rot).unwrap();
        assert_relative_eq!(
            compute_eye_opening(&upper, &lower, &corners),
            10.0,
            epsilon = 1e-6
        );
    }

    #[test]
    fn identical_lids_have_zero_opening() {
        let (u, _) = straight_lids(10.0);
        let (upper, lower, corners) = fit_eyelid_splines(&u, &u).unwrap();
        assert_eq!(compute_eye_opening(&upper, &lower, &corners), 0.0);
    }

    #[test]
    fn disjoint_lids_have_zero_opening() {
        // Lower lid shifted far along the corner axis: no perpendicular ray
        // from the upper lid can reach it.
        let upper: Vec<[f64; 2]> = (0..5).map(|i| [i as f64, 0.0]).collect();
        let lower: Vec<[f64; 2]> = (0..5).map(|i| [100.0 + i as f64, 5.0]).collect();
        let (up, lo, corners) = fit_eyelid_splines(&upper, &lower).unwrap();
        assert_eq!(compute_eye_opening(&up, &lo, &corners), 0.0);
    }

    fn parabolic_lids() -> (EyelidSpline, EyelidSpline, EyeCorners) {
        // y = ±8·(1 − (x/50)²) over x ∈ [−50, 50]
        let lid = |x: f64, sign: f64| sign * 8.0 * (1.0 - (x / 50.0) * (x / 50.0));
        let upper: Vec<[f64; 2]> = (0..50)
            .map(|i| {
                let x = -50.0 + 100.0 * i as f64 / 49.0;
                [x, lid(x, 1.0)]
            })
            .collect();
        let lower: Vec<[f64; 2]> = (0..49)
            .map(|i| {
                let x = -50.0 + 100.0 * i as f64 / 48.0;
                [x, lid(x, -1.0)]
            })
            .collect();
        fit_eyelid_splines(&upper, &lower).unwrap()
    }

    #[test]
    fn parabolic_lids_match_brute_force_oracle() {
        let (upper, lower, corners) = parabolic_lids();
        let got = compute_eye_opening(&upper, &lower, &corners);
        let oracle = brute_force_opening(&upper, &lower, &corners, 100, 100, 1e-3);
        assert!(
            (got - oracle).abs() < 0.1,
            "opening {got} vs oracle {oracle}"
        );
        // The analytic maximum separation is 16 at the apex.
        assert!((got - 16.0).abs() < 0.05, "opening {got}");
    }

    #[test]
    fn dense_oracle_agrees_too() {
        let (upper, lower, corners) = parabolic_lids();
        let got = compute_eye_opening(&upper, &lower, &corners);
        let oracle = brute_force_opening(&upper, &lower, &corners, 200, 200, 1e-3);
        assert!(
            (got - oracle).abs() < 0.1,
            "opening {got} vs dense oracle {oracle}"
        );
    }

    #[test]
    fn opening_segment_is_perpendicular_to_the_corner_vector() {
        let (upper, lower, corners) = parabolic_lids();
        let seg = opening_segment(&upper, &lower, &corners).unwrap();
        let vx = seg.lower[0] - seg.upper[0];
        let vy = seg.lower[1] - seg.upper[1];
        let norm = (vx * vx + vy * vy).sqrt();
        let inner = (vx * corners.corner_vector.0 + vy * corners.corner_vector.1).abs() / norm;
        assert!(inner < 1e-9, "inner product {inner}");
    }
}

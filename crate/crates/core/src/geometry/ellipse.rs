//! Direct least-squares ellipse fitting.
//!
//! Fits a general conic `Ax² + Bxy + Cy² + Dx + Ey + F = 0` to landmark
//! points with the ellipse constraint `4AC − B² > 0` enforced through the
//! constrained eigenproblem of the scatter matrix, then converts to
//! geometric parameters. Input points are shifted to their centroid and
//! rescaled before fitting, which also makes the fit exactly
//! translation-equivariant.

use nalgebra::{DMatrix, Matrix3, Vector3};

use super::GeometryError;

/// Geometric ellipse parameters in image pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_major: f64,
    pub semi_minor: f64,
    /// Major-axis direction from +x, in [0, π).
    pub angle: f64,
}

impl Ellipse {
    /// Point on the boundary at parameter `t` (radians).
    pub fn point_at(&self, t: f64) -> [f64; 2] {
        let (sin_a, cos_a) = self.angle.sin_cos();
        let px = self.semi_major * t.cos();
        let py = self.semi_minor * t.sin();
        [
            self.center.0 + cos_a * px - sin_a * py,
            self.center.1 + sin_a * px + cos_a * py,
        ]
    }

    /// `n` boundary points at uniform parameter spacing.
    pub fn sample_points(&self, n: usize) -> Vec<[f64; 2]> {
        (0..n)
            .map(|i| self.point_at(2.0 * std::f64::consts::PI * i as f64 / n as f64))
            .collect()
    }

    /// Unit direction of the minor axis.
    pub fn minor_axis_direction(&self) -> (f64, f64) {
        let (sin_a, cos_a) = self.angle.sin_cos();
        (-sin_a, cos_a)
    }

    /// Ratio semi_minor / semi_major, in (0, 1].
    pub fn axis_ratio(&self) -> f64 {
        self.semi_minor / self.semi_major
    }
}

/// Fit an ellipse to at least five non-collinear points.
pub fn fit_ellipse(points: &[[f64; 2]]) -> Result<Ellipse, GeometryError> {
    if points.len() < 5 {
        return Err(GeometryError::DegenerateInput(format!(
            "ellipse fit needs at least 5 points, got {}",
            points.len()
        )));
    }

    // Centroid shift and isotropic scale for conditioning.
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p[0]).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p[1]).sum::<f64>() / n;
    let mean_dist = points
        .iter()
        .map(|p| ((p[0] - mean_x).powi(2) + (p[1] - mean_y).powi(2)).sqrt())
        .sum::<f64>()
        / n;
    if mean_dist < 1e-12 {
        return Err(GeometryError::DegenerateInput("all points coincide".into()));
    }
    let scale = std::f64::consts::SQRT_2 / mean_dist;

    // Design matrix D = [x², xy, y², x, y, 1] in normalized coordinates.
    let mut design = DMatrix::<f64>::zeros(points.len(), 6);
    for (i, p) in points.iter().enumerate() {
        let x = (p[0] - mean_x) * scale;
        let y = (p[1] - mean_y) * scale;
        design[(i, 0)] = x * x;
        design[(i, 1)] = x * y;
        design[(i, 2)] = y * y;
        design[(i, 3)] = x;
        design[(i, 4)] = y;
        design[(i, 5)] = 1.0;
    }
    let scatter = design.transpose() * &design;
    let s11 = scatter.fixed_view::<3, 3>(0, 0).into_owned();
    let s12 = scatter.fixed_view::<3, 3>(0, 3).into_owned();
    let s22 = scatter.fixed_view::<3, 3>(3, 3).into_owned();

    let s22_inv = s22.try_inverse().ok_or_else(|| {
        GeometryError::DegenerateInput("singular scatter block (collinear points?)".into())
    })?;
    let reduced = s11 - s12 * s22_inv * s12.transpose();

    // Constraint matrix for 4AC − B² > 0.
    let constraint = Matrix3::new(0.0, 0.0, 2.0, 0.0, -1.0, 0.0, 2.0, 0.0, 0.0);
    let constraint_inv = constraint.try_inverse().unwrap();
    let system = constraint_inv * reduced;

    let quad = solve_constrained_eigenvector(&system).ok_or_else(|| {
        GeometryError::DegenerateInput("no ellipse satisfies the constraint".into())
    })?;
    let linear = -s22_inv * s12.transpose() * quad;

    // Denormalize the conic back to image coordinates.
    let (a_, b_, c_) = (quad[0], quad[1], quad[2]);
    let (d_, e_, f_) = (linear[0], linear[1], linear[2]);
    let s2 = scale * scale;
    let coeffs = [
        a_ * s2,
        b_ * s2,
        c_ * s2,
        -2.0 * a_ * s2 * mean_x - b_ * s2 * mean_y + d_ * scale,
        -b_ * s2 * mean_x - 2.0 * c_ * s2 * mean_y + e_ * scale,
        a_ * s2 * mean_x * mean_x + b_ * s2 * mean_x * mean_y + c_ * s2 * mean_y * mean_y
            - d_ * scale * mean_x
            - e_ * scale * mean_y
            + f_,
    ];

    conic_to_ellipse(&coeffs)
        .ok_or_else(|| GeometryError::DegenerateInput("fitted conic is not an ellipse".into()))
}

/// Eigenvector of `system` whose conic part satisfies the ellipse constraint.
///
/// Eigenvalues come from the characteristic cubic; eigenvectors from the
/// adjugate of the shifted matrix. Among constraint-positive candidates the
/// one with the smallest |λ| (the least-squares solution) wins.
fn solve_constrained_eigenvector(system: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let tr = system[(0, 0)] + system[(1, 1)] + system[(2, 2)];
    let minor_sum = system[(0, 0)] * system[(1, 1)] - system[(0, 1)] * system[(1, 0)]
        + system[(0, 0)] * system[(2, 2)]
        - system[(0, 2)] * system[(2, 0)]
        + system[(1, 1)] * system[(2, 2)]
        - system[(1, 2)] * system[(2, 1)];
    let det = system.determinant();

    let mut best: Option<(f64, Vector3<f64>)> = None;
    for lambda in real_cubic_roots(1.0, -tr, minor_sum, -det) {
        let shifted = system - Matrix3::identity() * lambda;
        let Some(v) = adjugate_null_vector(&shifted) else {
            continue;
        };
        let ellipse_like = 4.0 * v[0] * v[2] - v[1] * v[1] > 0.0;
        if ellipse_like && best.is_none_or(|(l, _)| lambda.abs() < l) {
            best = Some((lambda.abs(), v));
        }
    }
    best.map(|(_, v)| v)
}

/// Null vector of a near-singular 3×3 matrix: the largest column of its
/// adjugate.
fn adjugate_null_vector(m: &Matrix3<f64>) -> Option<Vector3<f64>> {
    let cof = |r0: usize, r1: usize, c0: usize, c1: usize| {
        m[(r0, c0)] * m[(r1, c1)] - m[(r0, c1)] * m[(r1, c0)]
    };
    let columns = [
        Vector3::new(cof(1, 2, 1, 2), -cof(1, 2, 0, 2), cof(1, 2, 0, 1)),
        Vector3::new(-cof(0, 2, 1, 2), cof(0, 2, 0, 2), -cof(0, 2, 0, 1)),
        Vector3::new(cof(0, 1, 1, 2), -cof(0, 1, 0, 2), cof(0, 1, 0, 1)),
    ];
    let best = columns
        .iter()
        .max_by(|a, b| a.norm_squared().total_cmp(&b.norm_squared()))
        .unwrap();
    if best.norm_squared() < 1e-30 {
        return None;
    }
    Some(best / best.norm())
}

/// Real roots of a x³ + b x² + c x + d = 0.
fn real_cubic_roots(a: f64, b: f64, c: f64, d: f64) -> Vec<f64> {
    let b = b / a;
    let c = c / a;
    let d = d / a;
    let p = c - b * b / 3.0;
    let q = 2.0 * b * b * b / 27.0 - b * c / 3.0 + d;
    let shift = -b / 3.0;
    let disc = -4.0 * p * p * p - 27.0 * q * q;
    if disc >= 0.0 {
        // Three real roots via the trigonometric form.
        let r = (-p / 3.0).max(0.0).sqrt();
        if r < 1e-300 {
            return vec![shift];
        }
        let cos_arg = (-q / (2.0 * r * r * r)).clamp(-1.0, 1.0);
        let theta = cos_arg.acos();
        (0..3)
            .map(|k| {
                2.0 * r * ((theta + 2.0 * std::f64::consts::PI * k as f64) / 3.0).cos() + shift
            })
            .collect()
    } else {
        let sqrt_disc = (q * q / 4.0 + p * p * p / 27.0).sqrt();
        let u = (-q / 2.0 + sqrt_disc).cbrt();
        let v = (-q / 2.0 - sqrt_disc).cbrt();
        vec![u + v + shift]
    }
}

/// Convert conic coefficients `[A, B, C, D, E, F]` to geometric parameters.
fn conic_to_ellipse(c: &[f64; 6]) -> Option<Ellipse> {
    // Orient the conic so the quadratic part is positive definite; the
    // eigenvector scale leaves the overall sign free.
    let flip = if c[0] + c[2] < 0.0 { -1.0 } else { 1.0 };
    let [a, b, cc, d, e, f] = [
        flip * c[0],
        flip * c[1],
        flip * c[2],
        flip * c[3],
        flip * c[4],
        flip * c[5],
    ];
    let denom = 4.0 * a * cc - b * b;
    if denom <= 0.0 {
        return None;
    }
    let cx = (b * e - 2.0 * cc * d) / denom;
    let cy = (b * d - 2.0 * a * e) / denom;

    // Conic value at the center.
    let f0 = f + (d * cx + e * cy) / 2.0;
    if f0.abs() < 1e-300 {
        return None;
    }

    // Eigen decomposition of the quadratic part [[A, B/2], [B/2, C]].
    let half_b = b / 2.0;
    let mean = (a + cc) / 2.0;
    let diff = (a - cc) / 2.0;
    let radius = (diff * diff + half_b * half_b).sqrt();
    let lambda_small = mean - radius;
    let lambda_large = mean + radius;

    let major_sq = -f0 / lambda_small;
    let minor_sq = -f0 / lambda_large;
    if major_sq <= 0.0 || minor_sq <= 0.0 {
        return None;
    }

    // Eigenvector of the smaller eigenvalue gives the major-axis direction.
    let (vx, vy) = if half_b.abs() > 1e-300 {
        (half_b, lambda_small - a)
    } else if a <= cc {
        (1.0, 0.0)
    } else {
        (0.0, 1.0)
    };
    let mut angle = vy.atan2(vx).rem_euclid(std::f64::consts::PI);
    if angle >= std::f64::consts::PI {
        angle = 0.0;
    }

    Some(Ellipse {
        center: (cx, cy),
        semi_major: major_sq.sqrt(),
        semi_minor: minor_sq.sqrt(),
        angle,
    })
}

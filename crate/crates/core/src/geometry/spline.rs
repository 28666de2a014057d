//! Interpolating cubic splines for eyelid curves.

use super::GeometryError;

/// Natural interpolating cubic spline over uniformly spaced knots 0..n−1.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    values: Vec<f64>,
    /// Second derivatives at the knots.
    second: Vec<f64>,
}

impl CubicSpline {
    /// Interpolate `values` at knots 0, 1, …, n−1 with natural end
    /// conditions. Needs at least two values.
    pub fn natural(values: &[f64]) -> Self {
        let n = values.len();
        assert!(n >= 2, "spline needs at least two knots");
        let mut second = vec![0.0; n];
        if n > 2 {
            // Tridiagonal system for interior second derivatives: the matrix
            // has 4 on the diagonal and 1 off-diagonal (unit spacing).
            let m = n - 2;
            let mut diag = vec![4.0; m];
            let mut rhs: Vec<f64> = (0..m)
                .map(|i| 6.0 * (values[i] - 2.0 * values[i + 1] + values[i + 2]))
                .collect();
            for i in 1..m {
                let w = 1.0 / diag[i - 1];
                diag[i] -= w;
                rhs[i] -= w * rhs[i - 1];
            }
            let mut sol = vec![0.0; m];
            sol[m - 1] = rhs[m - 1] / diag[m - 1];
            for i in (0..m - 1).rev() {
                sol[i] = (rhs[i] - sol[i + 1]) / diag[i];
            }
            second[1..=m].copy_from_slice(&sol);
        }
        Self {
            values: values.to_vec(),
            second,
        }
    }

    /// Number of knots.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Evaluate at parameter `t` in [0, n−1] (clamped outside).
    pub fn eval(&self, t: f64) -> f64 {
        let n = self.values.len();
        let t = t.clamp(0.0, (n - 1) as f64);
        let i = (t.floor() as usize).min(n - 2);
        let u = t - i as f64;
        let (y0, y1) = (self.values[i], self.values[i + 1]);
        let (m0, m1) = (self.second[i], self.second[i + 1]);
        let a = 1.0 - u;
        a * y0 + u * y1 + (a * a * a - a) * m0 / 6.0 + (u * u * u - u) * m1 / 6.0
    }
}

/// A 2D eyelid curve: coordinate splines over the landmark index.
#[derive(Debug, Clone)]
pub struct EyelidSpline {
    pub control_points: Vec<[f64; 2]>,
    x: CubicSpline,
    y: CubicSpline,
}

impl EyelidSpline {
    /// Interpolating spline through at least four ordered landmark points.
    pub fn fit(points: &[[f64; 2]]) -> Result<Self, GeometryError> {
        if points.len() < 4 {
            return Err(GeometryError::DegenerateInput(format!(
                "eyelid spline needs at least 4 points, got {}",
                points.len()
            )));
        }
        let xs: Vec<f64> = points.iter().map(|p| p[0]).collect();
        let ys: Vec<f64> = points.iter().map(|p| p[1]).collect();
        Ok(Self {
            control_points: points.to_vec(),
            x: CubicSpline::natural(&xs),
            y: CubicSpline::natural(&ys),
        })
    }

    /// Evaluate at parameter `t` in [0, n−1].
    pub fn eval(&self, t: f64) -> [f64; 2] {
        [self.x.eval(t), self.y.eval(t)]
    }

    /// `n` curve points at uniform parameter spacing from the first to the
    /// last control point.
    pub fn sample_uniform(&self, n: usize) -> Vec<[f64; 2]> {
        assert!(n >= 2);
        let t_max = (self.control_points.len() - 1) as f64;
        (0..n)
            .map(|i| self.eval(t_max * i as f64 / (n - 1) as f64))
            .collect()
    }
}

/// Eye corners derived from the paired eyelid curves.
#[derive(Debug, Clone, Copy)]
pub struct EyeCorners {
    pub nasal: (f64, f64),
    pub temporal: (f64, f64),
    /// Unit vector from the nasal to the temporal corner.
    pub corner_vector: (f64, f64),
}

/// Fit both eyelid splines and derive the corners.
///
/// Each corner is the midpoint of the two curves' respective endpoints; the
/// landmark lists must run in the same direction (nasal to temporal).
pub fn fit_eyelid_splines(
    upper_points: &[[f64; 2]],
    lower_points: &[[f64; 2]],
) -> Result<(EyelidSpline, EyelidSpline, EyeCorners), GeometryError> {
    let upper = EyelidSpline::fit(upper_points)?;
    let lower = EyelidSpline::fit(lower_points)?;
    let first_u = upper_points[0];
    let first_l = lower_points[0];
    let last_u = *upper_points.last().unwrap();
    let last_l = *lower_points.last().unwrap();
    let nasal = (
        (first_u[0] + first_l[0]) / 2.0,
        (first_u[1] + first_l[1]) / 2.0,
    );
    let temporal = ((last_u[0] + last_l[0]) / 2.0, (last_u[1] + last_l[1]) / 2.0);
    let dx = temporal.0 - nasal.0;
    let dy = temporal.1 - nasal.1;
    let norm = (dx * dx + dy * dy).sqrt();
    if norm < 1e-9 {
        return Err(GeometryError::DegenerateInput(
            "eye corners coincide".into(),
        ));
    }
    Ok((
        upper,
        lower,
        EyeCorners {
            nasal,
            temporal,
            corner_vector: (dx / norm, dy / norm),
        },
    ))
}

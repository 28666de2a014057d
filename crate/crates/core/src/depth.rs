//! Marker-area-to-distance models.
//!
//! The viewer's distance to the calibration marker follows a power law in
//! the marker's pixel area, `d(A) = a·A^b + c` (centimeters). Shipped
//! defaults come from the marker's factory calibration; per-user samples can
//! refit the law or drive the KNN regressor, which is the preferred
//! estimator when samples exist.

use crate::optim::{knn_regress, lm_fit, LmSettings, OptimError};

#[derive(Debug, thiserror::Error)]
pub enum DepthError {
    #[error("marker area must be positive, got {0}")]
    NonPositiveArea(f64),
    #[error("power-law fit diverged: {0}")]
    FitDiverged(String),
    #[error("sample file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// `d(A) = a·A^b + c`, area in px², depth in cm. Valid models are strictly
/// decreasing in area (`a > 0`, `b < 0`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawDepth {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Default for PowerLawDepth {
    /// Factory calibration of the shipped marker.
    fn default() -> Self {
        Self {
            a: 13550.0,
            b: -0.4656,
            c: -18.02,
        }
    }
}

/// One distance calibration measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthSample {
    pub area_px2: f64,
    pub depth_cm: f64,
}

/// Evaluate the power law at `area`.
pub fn depth_powerlaw(model: &PowerLawDepth, area: f64) -> Result<f64, DepthError> {
    if area <= 0.0 {
        return Err(DepthError::NonPositiveArea(area));
    }
    Ok(model.a * area.powf(model.b) + model.c)
}

/// Depth-fit step control: the shared defaults assume normalized gaze
/// features of unit scale, while these parameters live on a 1e4 scale.
fn depth_lm_settings() -> LmSettings {
    LmSettings {
        search_radius: 1e6,
        ..LmSettings::default()
    }
}

/// Fit `(a, b, c)` to measured samples by damped least squares.
///
/// Needs at least four samples spanning a 2× area range. The fit starts at
/// `a = d·√A` of the deepest sample, `b = −0.5`, `c = 0`.
pub fn fit_powerlaw(samples: &[DepthSample]) -> Result<PowerLawDepth, DepthError> {
    if samples.len() < 4 {
        return Err(DepthError::FitDiverged(format!(
            "need at least 4 samples, got {}",
            samples.len()
        )));
    }
    if samples
        .iter()
        .any(|s| s.area_px2 <= 0.0 || s.depth_cm <= 0.0)
    {
        return Err(DepthError::FitDiverged(
            "samples must have positive area and depth".into(),
        ));
    }
    let area_min = samples
        .iter()
        .map(|s| s.area_px2)
        .fold(f64::INFINITY, f64::min);
    let area_max = samples.iter().map(|s| s.area_px2).fold(0.0, f64::max);
    if area_max < 2.0 * area_min {
        return Err(DepthError::FitDiverged(format!(
            "areas span only {:.2}x, need 2x (rank deficient)",
            area_max / area_min
        )));
    }

    let deepest = samples
        .iter()
        .max_by(|a, b| a.depth_cm.total_cmp(&b.depth_cm))
        .unwrap();
    let init = [deepest.depth_cm * deepest.area_px2.sqrt(), -0.5, 0.0];

    let residual = |p: &[f64]| -> Vec<f64> {
        samples
            .iter()
            .map(|s| s.depth_cm - (p[0] * s.area_px2.powf(p[1]) + p[2]))
            .collect()
    };
    let fit = lm_fit(residual, &init, &depth_lm_settings())?;
    let model = PowerLawDepth {
        a: fit.params[0],
        b: fit.params[1],
        c: fit.params[2],
    };
    if !fit.cost.is_finite() || model.a <= 0.0 || model.b >= 0.0 {
        return Err(DepthError::FitDiverged(format!(
            "fit ended at a={}, b={}, cost={}",
            model.a, model.b, fit.cost
        )));
    }
    Ok(model)
}

/// KNN depth over measured samples (k = 2, inverse-distance weighting on
/// the marker area).
pub fn depth_knn(samples: &[DepthSample], query_area: f64) -> Result<f64, DepthError> {
    let pairs: Vec<(f64, f64)> = samples.iter().map(|s| (s.area_px2, s.depth_cm)).collect();
    Ok(knn_regress(&pairs, query_area, 2)?)
}

/// Depth estimation policy: KNN over user samples when available, the power
/// law otherwise.
#[derive(Debug, Clone)]
pub struct DepthEstimator {
    pub samples: Vec<DepthSample>,
    pub power_law: PowerLawDepth,
}

impl DepthEstimator {
    pub fn new(samples: Vec<DepthSample>, power_law: PowerLawDepth) -> Self {
        Self { samples, power_law }
    }

    /// Depth in cm for a marker area.
    pub fn estimate(&self, area: f64) -> Result<f64, DepthError> {
        if self.samples.len() >= 2 {
            depth_knn(&self.samples, area)
        } else {
            depth_powerlaw(&self.power_law, area)
        }
    }
}

const SAMPLES_HEADER: &str = "area_px2,depth_cm";

/// Read a depth-sample file: `area_px2,depth_cm`.
pub fn read_depth_samples(path: &std::path::Path) -> Result<Vec<DepthSample>, DepthError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| DepthError::Format("empty sample file".into()))?;
    if header != SAMPLES_HEADER {
        return Err(DepthError::Format(format!("bad header: {header}")));
    }
    let mut samples = Vec::new();
    for (i, line) in lines.enumerate() {
        let (a, d) = line
            .split_once(',')
            .ok_or_else(|| DepthError::Format(format!("row {}: bad row", i + 2)))?;
        samples.push(DepthSample {
            area_px2: a
                .parse()
                .map_err(|_| DepthError::Format(format!("row {}: bad area", i + 2)))?,
            depth_cm: d
                .parse()
                .map_err(|_| DepthError::Format(format!("row {}: bad depth", i + 2)))?,
        });
    }
    Ok(samples)
}

/// Write a depth-sample file.
pub fn write_depth_samples(
    path: &std::path::Path,
    samples: &[DepthSample],
) -> Result<(), DepthError> {
    use std::fmt::Write as _;
    let mut out = String::from(SAMPLES_HEADER);
    out.push('\n');
    for s in samples {
        let _ = writeln!(out, "{},{}", s.area_px2, s.depth_cm);
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{rngs::StdRng, Rng, SeedableRng};

    #[test]
    fn default_model_at_ten_thousand_square_pixels() {
        let model = PowerLawDepth::default();
        let d = depth_powerlaw(&model, 10_000.0).unwrap();
        let direct = 13550.0 * 10_000.0f64.powf(-0.4656) - 18.02;
        assert_relative_eq!(d, direct);
        assert!((d - 168.0).abs() < 0.1, "depth {d}");
    }

    #[test]
    fn simple_reciprocal_case() {
        let model = PowerLawDepth {
            a: 1.0,
            b: -1.0,
            c: 0.0,
        };
        assert_relative_eq!(depth_powerlaw(&model, 4.0).unwrap(), 0.25);
    }

    #[test]
    fn non_positive_area_is_rejected() {
        let model = PowerLawDepth::default();
        assert!(matches!(
            depth_powerlaw(&model, 0.0),
            Err(DepthError::NonPositiveArea(_))
        ));
        assert!(depth_powerlaw(&model, -5.0).is_err());
    }

    #[test]
    fn strictly_decreasing_over_the_working_range() {
        let model = PowerLawDepth::default();
        let mut last = f64::INFINITY;
        for i in 0..2000 {
            let area = 100.0 * (1e6f64 / 100.0).powf(i as f64 / 1999.0);
            let d = depth_powerlaw(&model, area).unwrap();
            assert!(d < last, "not decreasing at area {area}");
            last = d;
        }
    }

    fn noiseless_samples(n: usize) -> Vec<DepthSample> {
        let model = PowerLawDepth::default();
        (0..n)
            .map(|i| {
                let area = 500.0 * (50_000.0f64 / 500.0).powf(i as f64 / (n - 1) as f64);
                DepthSample {
                    area_px2: area,
                    depth_cm: depth_powerlaw(&model, area).unwrap(),
                }
            })
            .collect()
    }

    #[test]
    fn fit_recovers_the_generating_parameters() {
        let start = std::time::Instant::now();
        let fitted = fit_powerlaw(&noiseless_samples(20)).unwrap();
        assert!(start.elapsed().as_secs_f64() < 1.0, "fit too slow");
        let truth = PowerLawDepth::default();
        assert!(
            (fitted.a - truth.a).abs() / truth.a.abs() < 0.01,
            "a {}",
            fitted.a
        );
        assert!(
            (fitted.b - truth.b).abs() / truth.b.abs() < 0.01,
            "b {}",
            fitted.b
        );
        assert!(
            (fitted.c - truth.c).abs() / truth.c.abs() < 0.01,
            "c {}",
            fitted.c
        );
    }

    #[test]
    fn single_area_cluster_is_rank_deficient() {
        let samples: Vec<DepthSample> = (0..6)
            .map(|i| DepthSample {
                area_px2: 2000.0,
                depth_cm: 300.0 + i as f64,
            })
            .collect();
        assert!(matches!(
            fit_powerlaw(&samples),
            Err(DepthError::FitDiverged(_))
        ));
    }

    #[test]
    fn exponent_survives_gaussian_noise() {
        // σ = 2 cm depth noise, 100 seeds: the 95th-percentile relative
        // error of b stays below 5%.
        let clean = noiseless_samples(30);
        let mut errors = Vec::new();
        for seed in 0..100u64 {
            let mut rng = StdRng::seed_from_u64(seed);
            let mut normal = || {
                let u1: f64 = rng.gen_range(f64::EPSILON..1.0);
                let u2: f64 = rng.gen_range(0.0..1.0);
                (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
            };
            let noisy: Vec<DepthSample> = clean
                .iter()
                .map(|s| DepthSample {
                    area_px2: s.area_px2,
                    depth_cm: s.depth_cm + 2.0 * normal(),
                })
                .collect();
            let fitted = fit_powerlaw(&noisy).unwrap();
            errors.push((fitted.b + 0.4656).abs() / 0.4656);
        }
        errors.sort_by(f64::total_cmp);
        let p95 = errors[(0.95 * errors.len() as f64).ceil() as usize - 1];
        assert!(p95 < 0.05, "95th percentile b error {p95}");
    }

    #[test]
    fn knn_basics() {
        let samples = [
            DepthSample {
                area_px2: 1000.0,
                depth_cm: 300.0,
            },
            DepthSample {
                area_px2: 3000.0,
                depth_cm: 100.0,
            },
        ];
        assert_relative_eq!(depth_knn(&samples, 2000.0).unwrap(), 200.0);
        assert_relative_eq!(depth_knn(&samples, 1000.0).unwrap(), 300.0);
        assert!(depth_knn(&samples[..1], 500.0).is_err());
    }

    #[test]
    fn knn_tracks_the_power_law_on_dense_samples() {
        let samples = noiseless_samples(2000);
        let model = PowerLawDepth::default();
        let mut rng = StdRng::seed_from_u64(3);
        let mut max_diff = 0.0f64;
        for _ in 0..100 {
            let area = rng.gen_range(500.0..50_000.0);
            let knn = depth_knn(&samples, area).unwrap();
            let law = depth_powerlaw(&model, area).unwrap();
            max_diff = max_diff.max((knn - law).abs());
        }
        assert!(max_diff < 2.0, "max divergence {max_diff} cm");
    }

    #[test]
    fn knn_output_is_bounded_by_its_two_neighbors() {
        let samples = noiseless_samples(50);
        let mut rng = StdRng::seed_from_u64(9);
        for _ in 0..200 {
            let area = rng.gen_range(400.0..60_000.0);
            let knn = depth_knn(&samples, area).unwrap();
            let mut by_distance: Vec<(f64, f64)> = samples
                .iter()
                .map(|s| ((s.area_px2 - area).abs(), s.depth_cm))
                .collect();
            by_distance.sort_by(|a, b| a.0.total_cmp(&b.0));
            let lo = by_distance[0].1.min(by_distance[1].1);
            let hi = by_distance[0].1.max(by_distance[1].1);
            assert!(
                knn >= lo - 1e-12 && knn <= hi + 1e-12,
                "{knn} not in [{lo}, {hi}]"
            );
        }
    }

    #[test]
    fn estimator_prefers_knn_and_falls_back_to_the_law() {
        let with_samples = DepthEstimator::new(noiseless_samples(10), PowerLawDepth::default());
        let knn = depth_knn(&with_samples.samples, 2500.0).unwrap();
        assert_eq!(with_samples.estimate(2500.0).unwrap(), knn);

        let without = DepthEstimator::new(Vec::new(), PowerLawDepth::default());
        let law = depth_powerlaw(&PowerLawDepth::default(), 2500.0).unwrap();
        assert_eq!(without.estimate(2500.0).unwrap(), law);
    }

    #[test]
    fn sample_file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("samples.csv");
        let samples = noiseless_samples(5);
        write_depth_samples(&path, &samples).unwrap();
        assert_eq!(read_depth_samples(&path).unwrap(), samples);
    }
}

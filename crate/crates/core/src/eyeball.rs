//! Eyeball estimation and optical vectors.
//!
//! The eyeball is modeled as a sphere in eye-image coordinates whose center
//! all pupil minor axes (approximately) point at. The default estimator
//! intersects those minor-axis lines in least squares; an optional learned
//! estimator maps a diverse ellipse subset through a single-hidden-layer
//! network. Optical vectors lift 2D feature centers onto the estimated
//! sphere.

use ndarray::Array2;

use crate::geometry::Ellipse;
use crate::optim::{
    mlp_train, MlpDataset, MlpModel, MlpTrainSettings, OptimError, OutputActivation,
};

#[derive(Debug, thiserror::Error)]
pub enum EyeballError {
    /// The minor-axis line system does not pin down a center.
    #[error("ill-conditioned eyeball estimation: {0}")]
    IllConditioned(String),
    /// The learned estimator has not been trained yet.
    #[error("learned eyeball estimator is not trained")]
    NotTrained,
    #[error(transparent)]
    Optim(#[from] OptimError),
}

/// How an [`EyeballModel`] was produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EyeballSource {
    Geometric,
    Learned,
}

/// Eyeball sphere in eye-image pixels.
#[derive(Debug, Clone, Copy)]
pub struct EyeballModel {
    pub center: (f64, f64),
    pub radius: f64,
    pub source: EyeballSource,
}

/// Which feature center a vector originates from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VectorOrigin {
    PupilCenter,
    IrisCenter,
}

/// Unit gaze vector through a feature center, lifted onto the eyeball
/// sphere.
#[derive(Debug, Clone, Copy)]
pub struct OpticalVector {
    pub origin: VectorOrigin,
    pub v: (f64, f64, f64),
    /// The feature center lay outside the sphere; the vector was clamped to
    /// the equator (z = 0).
    pub clamped: bool,
}

/// Tuning for the geometric estimator.
#[derive(Debug, Clone)]
pub struct EyeballConfig {
    /// Diverse-subset size fed into estimation.
    pub diverse_k: usize,
    /// Assumed maximum eccentric gaze angle; the 95th-percentile
    /// center-to-pupil distance is divided by its sine to form the radius.
    pub max_eccentric_deg: f64,
    /// Minor/major ratio above which an ellipse counts as circular and
    /// contributes no axis direction.
    pub circular_ratio_cutoff: f64,
}

impl Default for EyeballConfig {
    fn default() -> Self {
        Self {
            diverse_k: 100,
            max_eccentric_deg: 50.0,
            circular_ratio_cutoff: 0.995,
        }
    }
}

fn normalized_params(e: &Ellipse, resolution: (u32, u32)) -> [f64; 5] {
    let (w, h) = (resolution.0 as f64, resolution.1 as f64);
    [
        e.center.0 / w,
        e.center.1 / h,
        e.semi_major / w,
        e.semi_minor / h,
        e.angle / std::f64::consts::PI,
    ]
}

fn param_distance(a: &[f64; 5], b: &[f64; 5]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Greedy farthest-point selection of up to `k` ellipses in normalized
/// parameter space, seeded at the ellipse nearest the parameter-space
/// centroid. Deterministic; ties break toward the lower index.
pub fn select_diverse_ellipses(
    ellipses: &[Ellipse],
    k: usize,
    resolution: (u32, u32),
) -> Vec<Ellipse> {
    assert!(!ellipses.is_empty(), "no ellipses to select from");
    if ellipses.len() <= k {
        return ellipses.to_vec();
    }
    let params: Vec<[f64; 5]> = ellipses
        .iter()
        .map(|e| normalized_params(e, resolution))
        .collect();
    let mut centroid = [0.0; 5];
    for p in &params {
        for (c, v) in centroid.iter_mut().zip(p) {
            *c += v / params.len() as f64;
        }
    }
    let seed = (0..params.len())
        .min_by(|&a, &b| {
            param_distance(&params[a], &centroid).total_cmp(&param_distance(&params[b], &centroid))
        })
        .unwrap();

    let mut selected = vec![seed];
    // Distance of every candidate to the selected set.
    let mut min_dist: Vec<f64> = params
        .iter()
        .map(|p| param_distance(p, &params[seed]))
        .collect();
    while selected.len() < k {
        let next = (0..params.len())
            .max_by(|&a, &b| min_dist[a].total_cmp(&min_dist[b]))
            .unwrap();
        selected.push(next);
        for (d, p) in min_dist.iter_mut().zip(&params) {
            *d = d.min(param_distance(p, &params[next]));
        }
    }
    selected.into_iter().map(|i| ellipses[i]).collect()
}

/// Least-squares eyeball from a set of pupil ellipses.
///
/// The center minimizes the summed squared distance to each ellipse's
/// minor-axis line; near-circular ellipses carry no usable axis and are
/// skipped. The radius is the 95th-percentile center-to-pupil-center
/// distance divided by sin of the assumed maximum eccentric angle.
pub fn estimate_eyeball_geometric(
    ellipses: &[Ellipse],
    config: &EyeballConfig,
) -> Result<EyeballModel, EyeballError> {
    let usable: Vec<&Ellipse> = ellipses
        .iter()
        .filter(|e| e.axis_ratio() <= config.circular_ratio_cutoff)
        .collect();
    if usable.len() < 5 {
        return Err(EyeballError::IllConditioned(format!(
            "only {} non-circular ellipses",
            usable.len()
        )));
    }
    {
        let mut distinct = 0;
        let first = usable[0].center;
        for e in &usable {
            if (e.center.0 - first.0).abs() > 1e-9 || (e.center.1 - first.1).abs() > 1e-9 {
                distinct += 1;
            }
        }
        if distinct == 0 {
            return Err(EyeballError::IllConditioned(
                "all ellipse centers coincide".into(),
            ));
        }
    }

    // Normal equations for the point closest to all minor-axis lines:
    // sum_i (I − d_i d_iᵀ) p = sum_i (I − d_i d_iᵀ) c_i
    let (mut m00, mut m01, mut m11) = (0.0, 0.0, 0.0);
    let (mut r0, mut r1) = (0.0, 0.0);
    for e in &usable {
        let (dx, dy) = e.minor_axis_direction();
        let (a00, a01, a11) = (1.0 - dx * dx, -dx * dy, 1.0 - dy * dy);
        m00 += a00;
        m01 += a01;
        m11 += a11;
        r0 += a00 * e.center.0 + a01 * e.center.1;
        r1 += a01 * e.center.0 + a11 * e.center.1;
    }
    // Conditioning of the 2×2 system via its eigenvalue ratio.
    let mean = (m00 + m11) / 2.0;
    let diff = (m00 - m11) / 2.0;
    let radius_ev = (diff * diff + m01 * m01).sqrt();
    let (ev_min, ev_max) = (mean - radius_ev, mean + radius_ev);
    if ev_max <= 0.0 || ev_min / ev_max < 1e-6 {
        return Err(EyeballError::IllConditioned(
            "minor-axis lines are near-parallel".into(),
        ));
    }
    let det = m00 * m11 - m01 * m01;
    let cx = (m11 * r0 - m01 * r1) / det;
    let cy = (m00 * r1 - m01 * r0) / det;

    let mut dists: Vec<f64> = ellipses
        .iter()
        .map(|e| ((e.center.0 - cx).powi(2) + (e.center.1 - cy).powi(2)).sqrt())
        .collect();
    dists.sort_by(f64::total_cmp);
    let rank = ((0.95 * dists.len() as f64).ceil() as usize).clamp(1, dists.len());
    let p95 = dists[rank - 1];
    let radius = p95 / config.max_eccentric_deg.to_radians().sin();

    Ok(EyeballModel {
        center: (cx, cy),
        radius,
        source: EyeballSource::Geometric,
    })
}

/// Geometric estimate with the documented fallback: on ill-conditioned
/// input, or an estimate that lands outside the image bounds extended by
/// one radius, the image center with radius = width/4 is returned and
/// flagged.
pub fn estimate_eyeball_or_fallback(
    ellipses: &[Ellipse],
    resolution: (u32, u32),
    config: &EyeballConfig,
) -> (EyeballModel, bool) {
    if !ellipses.is_empty() {
        if let Ok(model) = estimate_eyeball_geometric(ellipses, config) {
            let (w, h) = (resolution.0 as f64, resolution.1 as f64);
            let in_bounds = model.center.0 >= -model.radius
                && model.center.0 <= w + model.radius
                && model.center.1 >= -model.radius
                && model.center.1 <= h + model.radius;
            if in_bounds {
                return (model, false);
            }
        }
    }
    (
        EyeballModel {
            center: (resolution.0 as f64 / 2.0, resolution.1 as f64 / 2.0),
            radius: resolution.0 as f64 / 4.0,
            source: EyeballSource::Geometric,
        },
        true,
    )
}

/// Unit vector from the eyeball center through `feature_center`, lifted to
/// the sphere. Centers outside the sphere clamp to the equator and set the
/// flag.
pub fn optical_vector(
    model: &EyeballModel,
    origin: VectorOrigin,
    feature_center: (f64, f64),
) -> OpticalVector {
    let dx = feature_center.0 - model.center.0;
    let dy = feature_center.1 - model.center.1;
    let planar_sq = dx * dx + dy * dy;
    let r_sq = model.radius * model.radius;
    if planar_sq > r_sq {
        let norm = planar_sq.sqrt();
        return OpticalVector {
            origin,
            v: (dx / norm, dy / norm, 0.0),
            clamped: true,
        };
    }
    if planar_sq == 0.0 {
        return OpticalVector {
            origin,
            v: (0.0, 0.0, 1.0),
            clamped: false,
        };
    }
    let dz = (r_sq - planar_sq).sqrt();
    OpticalVector {
        origin,
        v: (dx / model.radius, dy / model.radius, dz / model.radius),
        clamped: false,
    }
}

/// Number of ellipses the learned estimator consumes per scene.
pub const LEARNED_INPUT_ELLIPSES: usize = 100;

/// One training scene for the learned estimator: a set of observed ellipses
/// with the true (cx, cy, radius).
pub type EyeballScene = (Vec<Ellipse>, (f64, f64, f64));

/// Learned eyeball estimator: one hidden layer of 100 neurons mapping a
/// flattened 100-ellipse parameter vector to (center, radius).
///
/// The network is trained on residuals against a closed-form baseline (mean
/// slot center, percentile-based radius) with standardized inputs; both the
/// baseline and the feature statistics are part of the trained state. The
/// wide, strongly offset raw feature vector is otherwise untrainable at the
/// shared learning-rate defaults.
#[derive(Debug, Default)]
pub struct LearnedEyeball {
    trained: Option<TrainedEyeballNet>,
}

#[derive(Debug)]
struct TrainedEyeballNet {
    model: MlpModel,
    resolution: (u32, u32),
    feature_mean: Vec<f64>,
    feature_std: Vec<f64>,
}

/// Residual targets are scaled up so they sit well above the weight-decay
/// floor during training.
const RESIDUAL_SCALE: f64 = 10.0;

impl LearnedEyeball {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn is_trained(&self) -> bool {
        self.trained.is_some()
    }

    /// Flatten a diverse subset to the fixed-width network input, padding by
    /// repetition or truncating to [`LEARNED_INPUT_ELLIPSES`].
    fn input_vector(ellipses: &[Ellipse], resolution: (u32, u32)) -> Vec<f64> {
        assert!(!ellipses.is_empty());
        let mut out = Vec::with_capacity(LEARNED_INPUT_ELLIPSES * 5);
        for i in 0..LEARNED_INPUT_ELLIPSES {
            let e = &ellipses[i % ellipses.len()];
            out.extend_from_slice(&normalized_params(e, resolution));
        }
        out
    }

    /// Closed-form baseline from the padded slots: mean slot center and the
    /// 95th-percentile center distance lifted by the standard eccentricity
    /// assumption.
    fn baseline(ellipses: &[Ellipse]) -> (f64, f64, f64) {
        let n = LEARNED_INPUT_ELLIPSES;
        let slots: Vec<&Ellipse> = (0..n).map(|i| &ellipses[i % ellipses.len()]).collect();
        let bx = slots.iter().map(|e| e.center.0).sum::<f64>() / n as f64;
        let by = slots.iter().map(|e| e.center.1).sum::<f64>() / n as f64;
        let mut dists: Vec<f64> = slots
            .iter()
            .map(|e| ((e.center.0 - bx).powi(2) + (e.center.1 - by).powi(2)).sqrt())
            .collect();
        dists.sort_by(f64::total_cmp);
        let rank = ((0.95 * n as f64).ceil() as usize).clamp(1, n);
        let br = dists[rank - 1] / 50.0f64.to_radians().sin();
        (bx, by, br)
    }

    /// Train on (ellipse set, true center/radius) pairs.
    pub fn train(
        &mut self,
        scenes: &[EyeballScene],
        resolution: (u32, u32),
        settings: &MlpTrainSettings,
    ) -> Result<(), EyeballError> {
        if scenes.is_empty() {
            return Err(EyeballError::Optim(OptimError::EmptyDataset));
        }
        let (w, h) = (resolution.0 as f64, resolution.1 as f64);
        let n = scenes.len();
        let dim = LEARNED_INPUT_ELLIPSES * 5;
        let mut inputs = Array2::zeros((n, dim));
        let mut targets = Array2::zeros((n, 3));
        for (i, (ellipses, truth)) in scenes.iter().enumerate() {
            let x = Self::input_vector(ellipses, resolution);
            for (j, v) in x.into_iter().enumerate() {
                inputs[(i, j)] = v;
            }
            let (bx, by, br) = Self::baseline(ellipses);
            targets[(i, 0)] = (truth.0 - bx) / w * RESIDUAL_SCALE;
            targets[(i, 1)] = (truth.1 - by) / h * RESIDUAL_SCALE;
            targets[(i, 2)] = (truth.2 - br) / w * RESIDUAL_SCALE;
        }
        let mut feature_mean = vec![0.0; dim];
        let mut feature_std = vec![0.0; dim];
        for j in 0..dim {
            let col = inputs.column(j);
            let mean = col.sum() / n as f64;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
            feature_mean[j] = mean;
            feature_std[j] = var.sqrt().max(1e-9);
        }
        for i in 0..n {
            for j in 0..dim {
                inputs[(i, j)] = (inputs[(i, j)] - feature_mean[j]) / feature_std[j];
            }
        }
        let data = MlpDataset { inputs, targets };
        let trained = mlp_train(&[dim, 100, 3], OutputActivation::Identity, &data, settings)?;
        self.trained = Some(TrainedEyeballNet {
            model: trained.model,
            resolution,
            feature_mean,
            feature_std,
        });
        Ok(())
    }

    /// Estimate from a diverse ellipse subset.
    pub fn estimate(&self, ellipses: &[Ellipse]) -> Result<EyeballModel, EyeballError> {
        let Some(net) = &self.trained else {
            return Err(EyeballError::NotTrained);
        };
        let (w, h) = (net.resolution.0 as f64, net.resolution.1 as f64);
        let mut x = Self::input_vector(ellipses, net.resolution);
        for (v, (m, s)) in x
            .iter_mut()
            .zip(net.feature_mean.iter().zip(&net.feature_std))
        {
            *v = (*v - m) / s;
        }
        let y = net.model.eval(&x).map_err(EyeballError::Optim)?;
        let (bx, by, br) = Self::baseline(ellipses);
        Ok(EyeballModel {
            center: (
                bx + y[0] / RESIDUAL_SCALE * w,
                by + y[1] / RESIDUAL_SCALE * h,
            ),
            radius: br + y[2] / RESIDUAL_SCALE * w,
            source: EyeballSource::Learned,
        })
    }
}

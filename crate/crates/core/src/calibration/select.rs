//! Three-step calibration-pair selection.
//!
//! Step 1 pairs every marker-bearing scene frame with its nearest eye
//! frames. Step 2 keeps a scene frame only when the five preceding and five
//! following scene images all carry valid marker detections. Step 3 fits a
//! provisional polynomial per eye combination, ranks the pairs by their
//! pixel error against the marker, and keeps the best 90%.

use std::collections::BTreeMap;

use crate::geometry::MarkerObservation;
use crate::optim::{fit_polynomial_lm, LmSettings};

use super::bank::FeatureTable;
use super::{CalibrationError, Combo, Feature, SyncAssignment};

/// One normalized feature vector with its marker target.
#[derive(Debug, Clone)]
pub struct CalibrationPair {
    pub scene_frame_id: u64,
    pub feature_vector: Vec<f64>,
    /// Marker center, scene pixels.
    pub target: (f64, f64),
}

/// A frame that entered step 3, with its provisional-fit error.
#[derive(Debug, Clone, Copy)]
pub struct SelectedFrame {
    pub scene_frame_id: u64,
    pub provisional_error_px: f64,
}

/// Step-3 outcome for one eye combination plus the per-feature pair lists.
#[derive(Debug, Clone)]
pub struct ComboSelection {
    pub kept: Vec<SelectedFrame>,
    pub dropped: Vec<SelectedFrame>,
    /// Dropped errors exceeded five times the kept median; the calibration
    /// phase likely contains frames where the marker was visible but not
    /// fixated.
    pub outlier_warning: bool,
    pub pairs: BTreeMap<Feature, Vec<CalibrationPair>>,
}

/// Full selection result keyed by combination; combinations without enough
/// valid data are absent.
#[derive(Debug, Clone)]
pub struct CalibrationSelection {
    pub combos: BTreeMap<Combo, ComboSelection>,
    /// Scene frames surviving steps 1–2 inside the calibration range.
    pub candidate_frames: Vec<u64>,
}

#[derive(Debug, Clone)]
pub struct SelectionSettings {
    /// Required valid neighbors on each side (step 2).
    pub window: usize,
    /// Fraction of pairs kept by step 3.
    pub best_fraction: f64,
    /// Degree of the provisional and final polynomial estimators.
    pub poly_degree: u32,
    /// Minimum candidate count after filtering.
    pub min_candidates: usize,
    /// Dropped-to-kept error ratio that raises the outlier warning.
    pub outlier_warning_factor: f64,
    pub lm: LmSettings,
}

impl Default for SelectionSettings {
    fn default() -> Self {
        Self {
            window: 5,
            best_fraction: 0.9,
            poly_degree: 2,
            min_candidates: 20,
            outlier_warning_factor: 5.0,
            lm: LmSettings::default(),
        }
    }
}

/// Step-2 window filter: index `i` survives iff it is valid and the
/// `window` entries on both sides are all valid.
pub fn window_filter(valid: &[bool], window: usize) -> Vec<bool> {
    let n = valid.len();
    (0..n)
        .map(|i| {
            if !valid[i] || i < window || i + window >= n {
                return false;
            }
            (i - window..=i + window).all(|j| valid[j])
        })
        .collect()
}

/// Run the three selection steps.
///
/// `markers` must hold one observation per scene frame in frame order;
/// `sync` the per-scene nearest-eye assignments. `range` restricts the
/// candidate scene frames (inclusive).
pub fn select_calibration_pairs(
    markers: &[MarkerObservation],
    sync: &[SyncAssignment],
    table: &FeatureTable,
    range: Option<(u64, u64)>,
    settings: &SelectionSettings,
) -> Result<CalibrationSelection, CalibrationError> {
    assert_eq!(
        markers.len(),
        sync.len(),
        "one sync assignment per scene frame"
    );

    // Steps 1–2: marker validity over the full scene sequence, then the
    // neighborhood filter, then the range restriction.
    let validity: Vec<bool> = markers.iter().map(|m| m.valid).collect();
    let surviving = window_filter(&validity, settings.window);
    let in_range = |id: u64| range.is_none_or(|(a, b)| id >= a && id <= b);
    let candidate_frames: Vec<u64> = markers
        .iter()
        .zip(&surviving)
        .filter(|(m, &s)| s && in_range(m.scene_frame_id))
        .map(|(m, _)| m.scene_frame_id)
        .collect();
    if candidate_frames.len() < settings.min_candidates {
        return Err(CalibrationError::CalibrationTooSmall {
            needed: settings.min_candidates,
            got: candidate_frames.len(),
        });
    }

    let marker_by_id: BTreeMap<u64, &MarkerObservation> =
        markers.iter().map(|m| (m.scene_frame_id, m)).collect();
    let sync_by_id: BTreeMap<u64, &SyncAssignment> =
        sync.iter().map(|s| (s.scene_frame_id, s)).collect();

    let mut combos = BTreeMap::new();
    for combo in [Combo::Left, Combo::Right, Combo::Binocular] {
        // Candidates where the ranking feature (pupil center) is available.
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        let mut frames = Vec::new();
        for &id in &candidate_frames {
            let s = sync_by_id[&id];
            let Some(fv) = table.feature_vector(
                Feature::PupilCenter,
                combo,
                s.left_eye_frame_id,
                s.right_eye_frame_id,
            ) else {
                continue;
            };
            let m = marker_by_id[&id];
            xs.push(fv);
            ys.push(vec![
                m.center.0 / table.scene_resolution.0,
                m.center.1 / table.scene_resolution.1,
            ]);
            frames.push(id);
        }
        if frames.len() < settings.min_candidates {
            continue;
        }

        // Step 3: provisional fit and best-90% ranking.
        let (provisional, _) = fit_polynomial_lm(&xs, &ys, settings.poly_degree, &settings.lm)?;
        let mut ranked: Vec<SelectedFrame> = frames
            .iter()
            .zip(&xs)
            .zip(&ys)
            .map(|((&id, x), y)| {
                let pred = provisional.eval(x).expect("dims fixed");
                let dx = (pred[0] - y[0]) * table.scene_resolution.0;
                let dy = (pred[1] - y[1]) * table.scene_resolution.1;
                SelectedFrame {
                    scene_frame_id: id,
                    provisional_error_px: (dx * dx + dy * dy).sqrt(),
                }
            })
            .collect();
        ranked.sort_by(|a, b| {
            a.provisional_error_px
                .total_cmp(&b.provisional_error_px)
                .then(a.scene_frame_id.cmp(&b.scene_frame_id))
        });
        let keep =
            ((settings.best_fraction * ranked.len() as f64).ceil() as usize).clamp(1, ranked.len());
        let kept = ranked[..keep].to_vec();
        let dropped = ranked[keep..].to_vec();

        let outlier_warning = if dropped.is_empty() {
            false
        } else {
            let median_kept = kept[kept.len() / 2].provisional_error_px.max(1e-12);
            dropped
                .iter()
                .any(|d| d.provisional_error_px > settings.outlier_warning_factor * median_kept)
        };

        // Per-feature pair lists over the kept frames.
        let mut pairs: BTreeMap<Feature, Vec<CalibrationPair>> = BTreeMap::new();
        for feature in [
            Feature::PupilCenter,
            Feature::IrisCenter,
            Feature::PupilVector,
            Feature::IrisVector,
        ] {
            let list: Vec<CalibrationPair> = kept
                .iter()
                .filter_map(|f| {
                    let s = sync_by_id[&f.scene_frame_id];
                    let fv = table.feature_vector(
                        feature,
                        combo,
                        s.left_eye_frame_id,
                        s.right_eye_frame_id,
                    )?;
                    Some(CalibrationPair {
                        scene_frame_id: f.scene_frame_id,
                        feature_vector: fv,
                        target: marker_by_id[&f.scene_frame_id].center,
                    })
                })
                .collect();
            pairs.insert(feature, list);
        }

        combos.insert(
            combo,
            ComboSelection {
                kept,
                dropped,
                outlier_warning,
                pairs,
            },
        );
    }

    Ok(CalibrationSelection {
        combos,
        candidate_frames,
    })
}

//! Gaze calibration: stream synchronization, calibration-pair selection, and
//! the bank of 24 gaze estimators (2 methods × 4 features × 3 eye
//! combinations).

mod bank;
mod select;
mod sync;

pub use bank::{
    accuracy_report, estimate_gaze, fit_gaze_bank, validity_stats, AccuracyReport, BankSettings,
    EstimatorAccuracy, EstimatorValidity, EyeFrameFeatures, FeatureTable, FittedEstimator,
    GazeEstimate, GazeEstimatorBank, GazeRow, ValidityReport,
};
pub use select::{
    select_calibration_pairs, window_filter, CalibrationPair, CalibrationSelection, ComboSelection,
    SelectedFrame, SelectionSettings,
};
pub use sync::{synchronize, GazeRowAssignment, SyncAssignment, SyncResult};

use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum CalibrationError {
    #[error("empty {0} stream")]
    EmptyStream(&'static str),
    #[error("too few calibration candidates: {got} (need at least {needed})")]
    CalibrationTooSmall { needed: usize, got: usize },
    #[error("no evaluation frames with marker truth")]
    NoEvaluationFrames,
    #[error(transparent)]
    Optim(#[from] crate::optim::OptimError),
}

/// Fitting method of a gaze estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Method {
    /// Polynomial fitted by damped least squares.
    Lm,
    /// Neural network.
    Nn,
}

/// Eye feature consumed by a gaze estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Feature {
    PupilCenter,
    IrisCenter,
    PupilVector,
    IrisVector,
}

/// Which eye(s) feed an estimator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Combo {
    Left,
    Right,
    Binocular,
}

/// Identity of one of the 24 gaze estimators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct EstimatorKey {
    pub method: Method,
    pub feature: Feature,
    pub combo: Combo,
}

impl EstimatorKey {
    /// All 24 keys in canonical order: method-major, then feature, then
    /// combo. This order fixes column layout and estimator seeds.
    pub fn all() -> Vec<EstimatorKey> {
        let mut keys = Vec::with_capacity(24);
        for method in [Method::Lm, Method::Nn] {
            for feature in [
                Feature::PupilCenter,
                Feature::IrisCenter,
                Feature::PupilVector,
                Feature::IrisVector,
            ] {
                for combo in [Combo::Left, Combo::Right, Combo::Binocular] {
                    keys.push(EstimatorKey {
                        method,
                        feature,
                        combo,
                    });
                }
            }
        }
        keys
    }

    /// Position in the canonical order.
    pub fn index(&self) -> usize {
        EstimatorKey::all().iter().position(|k| k == self).unwrap()
    }

    /// Feature-vector width for this estimator's input type.
    pub fn input_dim(&self) -> usize {
        let per_eye = match self.feature {
            Feature::PupilCenter | Feature::IrisCenter => 2,
            Feature::PupilVector | Feature::IrisVector => 5,
        };
        match self.combo {
            Combo::Binocular => per_eye * 2,
            _ => per_eye,
        }
    }
}

impl fmt::Display for EstimatorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let method = match self.method {
            Method::Lm => "lm",
            Method::Nn => "nn",
        };
        let feature = match self.feature {
            Feature::PupilCenter => "pc",
            Feature::IrisCenter => "ic",
            Feature::PupilVector => "pv",
            Feature::IrisVector => "iv",
        };
        let combo = match self.combo {
            Combo::Left => "left",
            Combo::Right => "right",
            Combo::Binocular => "bino",
        };
        write!(f, "{method}_{feature}_{combo}")
    }
}

impl EstimatorKey {
    /// Parse the `Display` form, e.g. `lm_pc_left`.
    pub fn parse(s: &str) -> Option<Self> {
        let mut it = s.split('_');
        let method = match it.next()? {
            "lm" => Method::Lm,
            "nn" => Method::Nn,
            _ => return None,
        };
        let feature = match it.next()? {
            "pc" => Feature::PupilCenter,
            "ic" => Feature::IrisCenter,
            "pv" => Feature::PupilVector,
            "iv" => Feature::IrisVector,
            _ => return None,
        };
        let combo = match it.next()? {
            "left" => Combo::Left,
            "right" => Combo::Right,
            "bino" => Combo::Binocular,
            _ => return None,
        };
        if it.next().is_some() {
            return None;
        }
        Some(EstimatorKey {
            method,
            feature,
            combo,
        })
    }
}

//! Resolved pipeline configuration.
//!
//! Resolution order is defaults, then a `key=value` config file, then
//! command-line flags. The fully resolved configuration is serialized next
//! to the outputs so a run can be reproduced exactly.

use std::path::{Path, PathBuf};

use crate::movement::ThresholdConfig;
use crate::optim::{LmSettings, MlpTrainSettings};

/// Which ellipses feed the eyeball estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EyeballFeatureSource {
    Pupil,
    Iris,
}

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Worker threads for the per-frame feature stages; 1 keeps everything
    /// on one core.
    pub jobs: usize,
    pub poly_degree: u32,
    pub best_fraction: f64,
    pub window: usize,
    /// Overrides the manifest's calibration range when set.
    pub calib_range: Option<(u64, u64)>,
    pub blink_fraction: f64,
    pub saccade_threshold: f64,
    pub pursuit_low: f64,
    pub eyeball_source: EyeballFeatureSource,
    pub eyeball_k: usize,
    pub max_eccentric_deg: f64,
    pub depth_a: f64,
    pub depth_b: f64,
    pub depth_c: f64,
    /// Optional per-user depth samples (`area_px2,depth_cm`).
    pub depth_samples: Option<PathBuf>,
    pub lm_delta_stop: f64,
    pub lm_search_radius: f64,
    pub lm_max_iters: usize,
    pub lm_initial_damping: f64,
    pub nn_learning_rate: f64,
    pub nn_momentum: f64,
    pub nn_weight_decay: f64,
    pub nn_epochs_per_stage: usize,
    pub nn_restarts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let lm = LmSettings::default();
        let nn = MlpTrainSettings::default();
        let thresholds = ThresholdConfig::default();
        Self {
            seed: 42,
            jobs: 1,
            poly_degree: 2,
            best_fraction: 0.9,
            window: 5,
            calib_range: None,
            blink_fraction: thresholds.blink_fraction,
            saccade_threshold: thresholds.saccade_threshold,
            pursuit_low: thresholds.pursuit_low,
            eyeball_source: EyeballFeatureSource::Pupil,
            eyeball_k: 100,
            max_eccentric_deg: 50.0,
            depth_a: 13550.0,
            depth_b: -0.4656,
            depth_c: -18.02,
            depth_samples: None,
            lm_delta_stop: lm.delta_stop,
            lm_search_radius: lm.search_radius,
            lm_max_iters: lm.max_iters,
            lm_initial_damping: lm.initial_damping,
            nn_learning_rate: nn.learning_rate,
            nn_momentum: nn.momentum,
            nn_weight_decay: nn.weight_decay,
            nn_epochs_per_stage: nn.epochs_per_stage,
            nn_restarts: nn.restarts,
        }
    }
}

impl PipelineConfig {
    pub fn lm_settings(&self) -> LmSettings {
        LmSettings {
            delta_stop: self.lm_delta_stop,
            search_radius: self.lm_search_radius,
            max_iters: self.lm_max_iters,
            initial_damping: self.lm_initial_damping,
        }
    }

    pub fn nn_settings(&self) -> MlpTrainSettings {
        MlpTrainSettings {
            learning_rate: self.nn_learning_rate,
            momentum: self.nn_momentum,
            weight_decay: self.nn_weight_decay,
            epochs_per_stage: self.nn_epochs_per_stage,
            lr_decay: 0.1,
            restarts: self.nn_restarts,
            seed: self.seed,
        }
    }

    pub fn threshold_config(&self) -> ThresholdConfig {
        ThresholdConfig {
            blink_fraction: self.blink_fraction,
            saccade_threshold: self.saccade_threshold,
            pursuit_low: self.pursuit_low,
        }
    }

    /// Apply one configuration key.
    pub fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        let bad = |k: &str, v: &str| format!("config: bad value for {k}: {v}");
        macro_rules! parse {
            ($field:expr, $key:expr, $value:expr) => {
                $field = $value.parse().map_err(|_| bad($key, $value))?
            };
        }
        match key {
            "seed" => parse!(self.seed, key, value),
            "jobs" => parse!(self.jobs, key, value),
            "poly_degree" => parse!(self.poly_degree, key, value),
            "best_fraction" => parse!(self.best_fraction, key, value),
            "window" => parse!(self.window, key, value),
            "calib_range" => {
                self.calib_range = Some(parse_range(value).ok_or_else(|| bad(key, value))?)
            }
            "blink_fraction" => parse!(self.blink_fraction, key, value),
            "saccade_threshold" => parse!(self.saccade_threshold, key, value),
            "pursuit_low" => parse!(self.pursuit_low, key, value),
            "eyeball_source" => {
                self.eyeball_source = match value {
                    "pupil" => EyeballFeatureSource::Pupil,
                    "iris" => EyeballFeatureSource::Iris,
                    _ => return Err(bad(key, value)),
                }
            }
            "eyeball_k" => parse!(self.eyeball_k, key, value),
            "max_eccentric_deg" => parse!(self.max_eccentric_deg, key, value),
            "depth_a" => parse!(self.depth_a, key, value),
            "depth_b" => parse!(self.depth_b, key, value),
            "depth_c" => parse!(self.depth_c, key, value),
            "depth_samples" => self.depth_samples = Some(PathBuf::from(value)),
            "lm_delta_stop" => parse!(self.lm_delta_stop, key, value),
            "lm_search_radius" => parse!(self.lm_search_radius, key, value),
            "lm_max_iters" => parse!(self.lm_max_iters, key, value),
            "lm_initial_damping" => parse!(self.lm_initial_damping, key, value),
            "nn_learning_rate" => parse!(self.nn_learning_rate, key, value),
            "nn_momentum" => parse!(self.nn_momentum, key, value),
            "nn_weight_decay" => parse!(self.nn_weight_decay, key, value),
            "nn_epochs_per_stage" => parse!(self.nn_epochs_per_stage, key, value),
            "nn_restarts" => parse!(self.nn_restarts, key, value),
            other => return Err(format!("config: unknown key {other}")),
        }
        Ok(())
    }

    /// Load overrides from a `key=value` file on top of `self`.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("config {path:?}: {e}"))?;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key=value", i + 1))?;
            self.apply(k.trim(), v.trim())?;
        }
        Ok(())
    }
}

impl std::fmt::Display for PipelineConfig {
    /// Every resolved key in a fixed order, `key=value` per line.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "jobs={}", self.jobs);
        let _ = writeln!(s, "poly_degree={}", self.poly_degree);
        let _ = writeln!(s, "best_fraction={}", self.best_fraction);
        let _ = writeln!(s, "window={}", self.window);
        if let Some((a, b)) = self.calib_range {
            let _ = writeln!(s, "calib_range={a}:{b}");
        }
        let _ = writeln!(s, "blink_fraction={}", self.blink_fraction);
        let _ = writeln!(s, "saccade_threshold={}", self.saccade_threshold);
        let _ = writeln!(s, "pursuit_low={}", self.pursuit_low);
        let _ = writeln!(
            s,
            "eyeball_source={}",
            match self.eyeball_source {
                EyeballFeatureSource::Pupil => "pupil",
                EyeballFeatureSource::Iris => "iris",
            }
        );
        let _ = writeln!(s, "eyeball_k={}", self.eyeball_k);
        let _ = writeln!(s, "max_eccentric_deg={}", self.max_eccentric_deg);
        let _ = writeln!(s, "depth_a={}", self.depth_a);
        let _ = writeln!(s, "depth_b={}", self.depth_b);
        let _ = writeln!(s, "depth_c={}", self.depth_c);
        if let Some(p) = &self.depth_samples {
            let _ = writeln!(s, "depth_samples={}", p.display());
        }
        let _ = writeln!(s, "lm_delta_stop={}", self.lm_delta_stop);
        let _ = writeln!(s, "lm_search_radius={}", self.lm_search_radius);
        let _ = writeln!(s, "lm_max_iters={}", self.lm_max_iters);
        let _ = writeln!(s, "lm_initial_damping={}", self.lm_initial_damping);
        let _ = writeln!(s, "nn_learning_rate={}", self.nn_learning_rate);
        let _ = writeln!(s, "nn_momentum={}", self.nn_momentum);
        let _ = writeln!(s, "nn_weight_decay={}", self.nn_weight_decay);
        let _ = writeln!(s, "nn_epochs_per_stage={}", self.nn_epochs_per_stage);
        let _ = writeln!(s, "nn_restarts={}", self.nn_restarts);
        f.write_str(&s)
    }
}

/// Parse `A:B` (inclusive scene-frame range).
pub(crate) fn parse_range(s: &str) -> Option<(u64, u64)> {
    let (a, b) = s.split_once(':')?;
    let a = a.trim().parse().ok()?;
    let b = b.trim().parse().ok()?;
    (a <= b).then_some((a, b))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_the_file_format() {
        let config = PipelineConfig::default();
        let text = config.to_string();
        let mut back = PipelineConfig {
            seed: 1,
            depth_a: 0.0,
            ..PipelineConfig::default()
        };
        for line in text.lines() {
            let (k, v) = line.split_once('=').unwrap();
            back.apply(k, v).unwrap();
        }
        assert_eq!(back.seed, 42);
        assert_eq!(back.depth_a, 13550.0);
        assert_eq!(back.nn_epochs_per_stage, 2000);
    }

    #[test]
    fn range_parsing() {
        assert_eq!(parse_range("100:400"), Some((100, 400)));
        assert_eq!(parse_range("5:4"), None);
        assert_eq!(parse_range("x:4"), None);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let mut config = PipelineConfig::default();
        assert!(config.apply("not_a_key", "1").is_err());
        assert!(config.apply("seed", "not a number").is_err());
    }
}

//! Scene scripts: the declarative description of a synthetic recording.

use super::SynthError;

/// Motion regime kinds. Fixations hold the target gaze, saccades and
/// pursuits move linearly toward it (fast and slow respectively), blinks
/// hold gaze and close the lids.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RegimeKind {
    Fixation,
    Saccade,
    Pursuit,
    Blink,
}

impl RegimeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Fixation => "fixation",
            Self::Saccade => "saccade",
            Self::Pursuit => "pursuit",
            Self::Blink => "blink",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "fixation" => Self::Fixation,
            "saccade" => Self::Saccade,
            "pursuit" => Self::Pursuit,
            "blink" => Self::Blink,
            _ => return None,
        })
    }
}

/// One row of the regime table. For motion regimes `(p1, p2)` is the target
/// gaze in [−1, 1]²; for blinks `p1` is the closure depth in (0, 1].
#[derive(Debug, Clone, Copy)]
pub struct Regime {
    pub start_s: f64,
    pub end_s: f64,
    pub kind: RegimeKind,
    pub p1: f64,
    pub p2: f64,
}

/// Ground-truth geometry of one synthetic eye.
#[derive(Debug, Clone, Copy)]
pub struct EyeTruth {
    /// Eyeball center, eye px.
    pub center: (f64, f64),
    /// Eyeball radius, px.
    pub radius: f64,
    pub pupil_radius: f64,
    pub iris_radius: f64,
    /// Half width of the eyelid curves.
    pub lid_half_width: f64,
    pub lid_amplitude_upper: f64,
    pub lid_amplitude_lower: f64,
}

impl EyeTruth {
    /// Fully open eyelid separation.
    pub fn nominal_opening(&self) -> f64 {
        self.lid_amplitude_upper + self.lid_amplitude_lower
    }
}

/// The generating gaze map: normalized left pupil center to scene pixels.
///
/// With `cubic == 0` the map is exactly a degree-2 polynomial, so the
/// polynomial estimators have a realizable target; the cubic term is the
/// hard-mode model-bias probe.
#[derive(Debug, Clone, Copy)]
pub struct TrueGazeMap {
    pub input_offset: (f64, f64),
    pub output_center: (f64, f64),
    /// Row-major [output][input].
    pub linear: [[f64; 2]; 2],
    pub quad_xx: (f64, f64),
    pub quad_xy: (f64, f64),
    pub quad_yy: (f64, f64),
    /// Coefficient on dx³ per output, applied only in hard mode.
    pub cubic: (f64, f64),
}

impl TrueGazeMap {
    /// Scene point for a normalized pupil center.
    pub fn eval(&self, u: (f64, f64), hard_mode: bool) -> (f64, f64) {
        let dx = u.0 - self.input_offset.0;
        let dy = u.1 - self.input_offset.1;
        let mut x = self.output_center.0
            + self.linear[0][0] * dx
            + self.linear[0][1] * dy
            + self.quad_xx.0 * dx * dx
            + self.quad_xy.0 * dx * dy
            + self.quad_yy.0 * dy * dy;
        let mut y = self.output_center.1
            + self.linear[1][0] * dx
            + self.linear[1][1] * dy
            + self.quad_xx.1 * dx * dx
            + self.quad_xy.1 * dx * dy
            + self.quad_yy.1 * dy * dy;
        if hard_mode {
            x += self.cubic.0 * dx * dx * dx;
            y += self.cubic.1 * dx * dx * dx;
        }
        (x, y)
    }
}

/// Complete description of a synthetic recording.
#[derive(Debug, Clone)]
pub struct SceneScript {
    pub duration_s: f64,
    pub eye_fps: f64,
    pub scene_fps: f64,
    pub seed: u64,
    /// Gaussian landmark noise, px.
    pub noise_sigma_px: f64,
    /// Probability that a detection row is marked invalid.
    pub dropout_prob: f64,
    pub eye_resolution: (u32, u32),
    pub scene_resolution: (u32, u32),
    pub left: EyeTruth,
    pub right: EyeTruth,
    /// Planar sphere direction per unit of gaze state.
    pub gaze_scale: f64,
    pub map: TrueGazeMap,
    pub hard_mode: bool,
    /// Affine squash factor applied to the temporal half of each eye image
    /// (0 disables), imitating the asymmetry of an off-axis eye camera.
    pub perspective_squash: f64,
    pub depth_start_cm: f64,
    pub depth_end_cm: f64,
    pub calib_range: Option<(u64, u64)>,
    /// Opening fraction below which a frame's truth label is Blink.
    pub label_blink_fraction: f64,
    /// True angular velocity above which a frame's truth label is Saccade,
    /// rad/frame.
    pub label_saccade_threshold: f64,
    /// Lower edge of the truth smooth-pursuit band, rad/frame.
    pub label_pursuit_low: f64,
    pub pupil_points: usize,
    pub iris_points: usize,
    pub eyelid_upper_points: usize,
    pub eyelid_lower_points: usize,
    pub marker_points: usize,
    pub regimes: Vec<Regime>,
}

impl SceneScript {
    /// The default 10 s script: a calibration phase over the first six
    /// seconds (fixations on the gaze-range corners joined by saccades and
    /// pursuits, one blink), then an evaluation phase inside the calibrated
    /// region.
    pub fn default_script() -> Self {
        let left = EyeTruth {
            center: (94.0, 97.0),
            radius: 58.0,
            pupil_radius: 13.0,
            iris_radius: 26.0,
            lid_half_width: 80.0,
            lid_amplitude_upper: 20.0,
            lid_amplitude_lower: 12.0,
        };
        let right = EyeTruth {
            center: (98.0, 95.0),
            radius: 62.0,
            pupil_radius: 14.0,
            iris_radius: 27.0,
            lid_half_width: 78.0,
            lid_amplitude_upper: 18.0,
            lid_amplitude_lower: 11.0,
        };
        let eye_resolution = (192u32, 192u32);
        let map = TrueGazeMap {
            input_offset: (
                left.center.0 / eye_resolution.0 as f64,
                left.center.1 / eye_resolution.1 as f64,
            ),
            output_center: (400.0, 300.0),
            linear: [[1830.0, -140.0], [120.0, 1300.0]],
            quad_xx: (240.0, 50.0),
            quad_xy: (-200.0, 140.0),
            quad_yy: (80.0, 200.0),
            cubic: (4000.0, 3000.0),
        };
        use RegimeKind::*;
        // The calibration phase (first 7 s) walks a 4×4 fixation grid plus
        // the center. Two properties matter: enough distinct gaze points to
        // pin down a quadratic map in every feature space, and few
        // moving-gaze frames: eye and scene cameras sample at different
        // instants, so pairs formed while the gaze moves are inconsistent
        // and must fit inside the best-90% drop budget of the selection
        // step. Saccades are kept to 50 ms for that reason.
        let mut regimes = Vec::new();
        let mut t = 0.0;
        let push = |regimes: &mut Vec<Regime>, t: &mut f64, dur: f64, kind, p1: f64, p2: f64| {
            regimes.push(Regime {
                start_s: *t,
                end_s: *t + dur,
                kind,
                p1,
                p2,
            });
            *t += dur;
        };
        let grid_x = [-0.8, -0.27, 0.27, 0.8];
        let grid_y = [-0.6, -0.2, 0.2, 0.6];
        let mut targets = Vec::new();
        for (row, gy) in grid_y.iter().enumerate() {
            let mut xs = grid_x.to_vec();
            if row % 2 == 1 {
                xs.reverse();
            }
            targets.extend(xs.into_iter().map(|gx| (gx, *gy)));
        }
        targets.push((0.0, 0.0));
        for (i, &(gx, gy)) in targets.iter().enumerate() {
            if i > 0 {
                push(&mut regimes, &mut t, 0.05, Saccade, gx, gy);
            }
            push(&mut regimes, &mut t, 0.35, Fixation, gx, gy);
            if i == 8 {
                push(&mut regimes, &mut t, 0.25, Blink, 1.0, 0.0);
            }
        }
        debug_assert!((t - 7.0).abs() < 1e-9);
        // Evaluation phase: targets inside the calibrated hull, pursuit
        // segments in the smooth-pursuit velocity band, one more blink.
        push(&mut regimes, &mut t, 0.05, Saccade, 0.5, 0.3);
        push(&mut regimes, &mut t, 0.65, Fixation, 0.5, 0.3);
        push(&mut regimes, &mut t, 0.20, Pursuit, -0.1, 0.05);
        push(&mut regimes, &mut t, 0.50, Fixation, -0.1, 0.05);
        push(&mut regimes, &mut t, 0.25, Blink, 1.0, 0.0);
        push(&mut regimes, &mut t, 0.50, Fixation, -0.1, 0.05);
        push(&mut regimes, &mut t, 0.05, Saccade, 0.2, -0.5);
        push(&mut regimes, &mut t, 0.40, Fixation, 0.2, -0.5);
        push(&mut regimes, &mut t, 0.25, Pursuit, -0.4, -0.25);
        push(&mut regimes, &mut t, 0.15, Fixation, -0.4, -0.25);
        debug_assert!((t - 10.0).abs() < 1e-9);
        Self {
            duration_s: 10.0,
            eye_fps: 200.0,
            scene_fps: 30.0,
            seed: 7,
            noise_sigma_px: 0.0,
            dropout_prob: 0.0,
            eye_resolution,
            scene_resolution: (800, 600),
            left,
            right,
            gaze_scale: 0.55,
            map,
            hard_mode: false,
            perspective_squash: 0.0,
            depth_start_cm: 90.0,
            depth_end_cm: 260.0,
            calib_range: Some((0, 209)),
            label_blink_fraction: 0.3,
            label_saccade_threshold: 0.02,
            label_pursuit_low: 0.004,
            pupil_points: 24,
            iris_points: 48,
            eyelid_upper_points: 50,
            eyelid_lower_points: 49,
            marker_points: 24,
            regimes,
        }
    }

    /// Check the structural invariants: regimes tile the duration without
    /// gaps or overlap, parameters stay in range, counts are usable.
    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::InvalidScript(msg));
        if self.duration_s <= 0.0 || self.eye_fps <= 0.0 || self.scene_fps <= 0.0 {
            return fail("duration and frame rates must be positive".into());
        }
        if self.regimes.is_empty() {
            return fail("no regimes".into());
        }
        let mut t = 0.0;
        for (i, reg) in self.regimes.iter().enumerate() {
            if (reg.start_s - t).abs() > 1e-9 {
                return fail(format!(
                    "regime {i} starts at {} but the previous one ends at {t}",
                    reg.start_s
                ));
            }
            if reg.end_s <= reg.start_s {
                return fail(format!("regime {i} has non-positive duration"));
            }
            match reg.kind {
                RegimeKind::Blink => {
                    if !(0.0 < reg.p1 && reg.p1 <= 1.0) {
                        return fail(format!("regime {i}: blink closure must be in (0, 1]"));
                    }
                }
                _ => {
                    if reg.p1.abs() > 1.0 || reg.p2.abs() > 1.0 {
                        return fail(format!("regime {i}: gaze target outside [-1, 1]"));
                    }
                }
            }
            t = reg.end_s;
        }
        if (t - self.duration_s).abs() > 1e-9 {
            return fail(format!(
                "regimes end at {t} but the script lasts {}",
                self.duration_s
            ));
        }
        if !(0.0 < self.gaze_scale && self.gaze_scale < 1.0) {
            return fail("gaze_scale must be in (0, 1)".into());
        }
        if self.pupil_points < 5 || self.iris_points < 5 {
            return fail("pupil and iris need at least 5 landmark points".into());
        }
        if self.eyelid_upper_points < 4 || self.eyelid_lower_points < 4 {
            return fail("eyelids need at least 4 landmark points".into());
        }
        if self.marker_points < 3 || !self.marker_points.is_multiple_of(4) {
            return fail("marker points must be a positive multiple of 4".into());
        }
        if self.depth_start_cm <= 0.0 || self.depth_end_cm <= 0.0 {
            return fail("depths must be positive".into());
        }
        if !(0.0..1.0).contains(&self.perspective_squash) {
            return fail("perspective_squash must be in [0, 1)".into());
        }
        Ok(())
    }

    /// Gaze state at time `t` (piecewise linear between regime targets).
    pub fn gaze_at(&self, t: f64) -> (f64, f64) {
        let mut current = initial_gaze(&self.regimes);
        for reg in &self.regimes {
            if t <= reg.start_s {
                break;
            }
            let target = match reg.kind {
                RegimeKind::Blink => current,
                RegimeKind::Fixation => (reg.p1, reg.p2),
                _ => (reg.p1, reg.p2),
            };
            if t >= reg.end_s {
                current = target;
                continue;
            }
            let phase = (t - reg.start_s) / (reg.end_s - reg.start_s);
            return match reg.kind {
                RegimeKind::Fixation => target,
                RegimeKind::Blink => current,
                _ => (
                    current.0 + (target.0 - current.0) * phase,
                    current.1 + (target.1 - current.1) * phase,
                ),
            };
        }
        current
    }

    /// Eyelid openness factor at time `t` (1 fully open, 0 closed).
    pub fn openness_at(&self, t: f64) -> f64 {
        for reg in &self.regimes {
            if reg.kind == RegimeKind::Blink && t > reg.start_s && t <= reg.end_s {
                let phase = (t - reg.start_s) / (reg.end_s - reg.start_s);
                let tri = 1.0 - (2.0 * phase - 1.0).abs();
                return 1.0 - reg.p1 * tri;
            }
        }
        1.0
    }

    /// Regime owning the motion that ends at time `t`, i.e. the regime whose
    /// half-open interval (start, end] contains it.
    pub fn regime_at(&self, t: f64) -> &Regime {
        for reg in &self.regimes {
            if t <= reg.end_s {
                return reg;
            }
        }
        self.regimes.last().unwrap()
    }
}

fn initial_gaze(regimes: &[Regime]) -> (f64, f64) {
    match regimes.first() {
        Some(reg) if reg.kind == RegimeKind::Fixation => (reg.p1, reg.p2),
        _ => (0.0, 0.0),
    }
}

fn parse_pair(v: &str, key: &str) -> Result<(f64, f64), SynthError> {
    let parts: Vec<&str> = v.split(',').collect();
    if parts.len() != 2 {
        return Err(SynthError::Format(format!("{key}: expected two values")));
    }
    Ok((parse_num(parts[0], key)?, parse_num(parts[1], key)?))
}

fn parse_num(v: &str, key: &str) -> Result<f64, SynthError> {
    v.trim()
        .parse::<f64>()
        .map_err(|_| SynthError::Format(format!("{key}: bad number {v}")))
}

impl std::str::FromStr for SceneScript {
    type Err = SynthError;

    /// Parse the script file format: `key=value` lines plus bare regime rows
    /// `start_s,end_s,type,param1,param2`.
    fn from_str(text: &str) -> Result<Self, SynthError> {
        let mut script = Self::default_script();
        script.regimes = Vec::new();
        let mut saw_regime = false;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some((key, value)) = line.split_once('=') {
                let (key, v) = (key.trim(), value.trim());
                match key {
                    "duration_s" => script.duration_s = parse_num(v, key)?,
                    "eye_fps" => script.eye_fps = parse_num(v, key)?,
                    "scene_fps" => script.scene_fps = parse_num(v, key)?,
                    "seed" => {
                        script.seed = v
                            .parse()
                            .map_err(|_| SynthError::Format(format!("seed: bad integer {v}")))?
                    }
                    "noise_sigma_px" => script.noise_sigma_px = parse_num(v, key)?,
                    "dropout_prob" => script.dropout_prob = parse_num(v, key)?,
                    "eye_width" => script.eye_resolution.0 = parse_num(v, key)? as u32,
                    "eye_height" => script.eye_resolution.1 = parse_num(v, key)? as u32,
                    "scene_width" => script.scene_resolution.0 = parse_num(v, key)? as u32,
                    "scene_height" => script.scene_resolution.1 = parse_num(v, key)? as u32,
                    "gaze_scale" => script.gaze_scale = parse_num(v, key)?,
                    "left_eye" => script.left = parse_eye(v, key)?,
                    "right_eye" => script.right = parse_eye(v, key)?,
                    "map_input_offset" => script.map.input_offset = parse_pair(v, key)?,
                    "map_output_center" => script.map.output_center = parse_pair(v, key)?,
                    "map_linear" => {
                        let parts: Vec<f64> = v
                            .split(',')
                            .map(|p| parse_num(p, key))
                            .collect::<Result<_, _>>()?;
                        if parts.len() != 4 {
                            return Err(SynthError::Format("map_linear: expected 4 values".into()));
                        }
                        script.map.linear = [[parts[0], parts[1]], [parts[2], parts[3]]];
                    }
                    "map_quad_xx" => script.map.quad_xx = parse_pair(v, key)?,
                    "map_quad_xy" => script.map.quad_xy = parse_pair(v, key)?,
                    "map_quad_yy" => script.map.quad_yy = parse_pair(v, key)?,
                    "map_cubic" => script.map.cubic = parse_pair(v, key)?,
                    "hard_mode" => script.hard_mode = v == "1" || v == "true",
                    "perspective_squash" => script.perspective_squash = parse_num(v, key)?,
                    "depth_start_cm" => script.depth_start_cm = parse_num(v, key)?,
                    "depth_end_cm" => script.depth_end_cm = parse_num(v, key)?,
                    "calib_start" => {
                        let start = parse_num(v, key)? as u64;
                        script.calib_range = Some(match script.calib_range {
                            Some((_, end)) => (start, end),
                            None => (start, u64::MAX),
                        });
                    }
                    "calib_end" => {
                        let end = parse_num(v, key)? as u64;
                        script.calib_range = Some(match script.calib_range {
                            Some((start, _)) => (start, end),
                            None => (0, end),
                        });
                    }
                    "label_blink_fraction" => script.label_blink_fraction = parse_num(v, key)?,
                    "label_saccade_threshold" => {
                        script.label_saccade_threshold = parse_num(v, key)?
                    }
                    "label_pursuit_low" => script.label_pursuit_low = parse_num(v, key)?,
                    "pupil_points" => script.pupil_points = parse_num(v, key)? as usize,
                    "iris_points" => script.iris_points = parse_num(v, key)? as usize,
                    "eyelid_upper_points" => {
                        script.eyelid_upper_points = parse_num(v, key)? as usize
                    }
                    "eyelid_lower_points" => {
                        script.eyelid_lower_points = parse_num(v, key)? as usize
                    }
                    "marker_points" => script.marker_points = parse_num(v, key)? as usize,
                    other => {
                        return Err(SynthError::Format(format!(
                            "line {}: unknown key {other}",
                            i + 1
                        )))
                    }
                }
            } else {
                // Bare regime row.
                let parts: Vec<&str> = line.split(',').collect();
                if parts.len() != 5 {
                    return Err(SynthError::Format(format!(
                        "line {}: regime rows have 5 fields",
                        i + 1
                    )));
                }
                script.regimes.push(Regime {
                    start_s: parse_num(parts[0], "regime start")?,
                    end_s: parse_num(parts[1], "regime end")?,
                    kind: RegimeKind::parse(parts[2].trim()).ok_or_else(|| {
                        SynthError::Format(format!("line {}: bad regime type", i + 1))
                    })?,
                    p1: parse_num(parts[3], "regime p1")?,
                    p2: parse_num(parts[4], "regime p2")?,
                });
                saw_regime = true;
            }
        }
        if !saw_regime {
            return Err(SynthError::Format("script has no regime rows".into()));
        }
        script.validate()?;
        Ok(script)
    }
}

impl std::fmt::Display for SceneScript {
    /// The script file format.
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        use std::fmt::Write as _;
        let mut s = String::new();
        let _ = writeln!(s, "duration_s={}", self.duration_s);
        let _ = writeln!(s, "eye_fps={}", self.eye_fps);
        let _ = writeln!(s, "scene_fps={}", self.scene_fps);
        let _ = writeln!(s, "seed={}", self.seed);
        let _ = writeln!(s, "noise_sigma_px={}", self.noise_sigma_px);
        let _ = writeln!(s, "dropout_prob={}", self.dropout_prob);
        let _ = writeln!(s, "eye_width={}", self.eye_resolution.0);
        let _ = writeln!(s, "eye_height={}", self.eye_resolution.1);
        let _ = writeln!(s, "scene_width={}", self.scene_resolution.0);
        let _ = writeln!(s, "scene_height={}", self.scene_resolution.1);
        let _ = writeln!(s, "gaze_scale={}", self.gaze_scale);
        let eye = |e: &EyeTruth| {
            format!(
                "{},{},{},{},{},{},{},{}",
                e.center.0,
                e.center.1,
                e.radius,
                e.pupil_radius,
                e.iris_radius,
                e.lid_half_width,
                e.lid_amplitude_upper,
                e.lid_amplitude_lower
            )
        };
        let _ = writeln!(s, "left_eye={}", eye(&self.left));
        let _ = writeln!(s, "right_eye={}", eye(&self.right));
        let m = &self.map;
        let _ = writeln!(
            s,
            "map_input_offset={},{}",
            m.input_offset.0, m.input_offset.1
        );
        let _ = writeln!(
            s,
            "map_output_center={},{}",
            m.output_center.0, m.output_center.1
        );
        let _ = writeln!(
            s,
            "map_linear={},{},{},{}",
            m.linear[0][0], m.linear[0][1], m.linear[1][0], m.linear[1][1]
        );
        let _ = writeln!(s, "map_quad_xx={},{}", m.quad_xx.0, m.quad_xx.1);
        let _ = writeln!(s, "map_quad_xy={},{}", m.quad_xy.0, m.quad_xy.1);
        let _ = writeln!(s, "map_quad_yy={},{}", m.quad_yy.0, m.quad_yy.1);
        let _ = writeln!(s, "map_cubic={},{}", m.cubic.0, m.cubic.1);
        let _ = writeln!(s, "hard_mode={}", if self.hard_mode { 1 } else { 0 });
        let _ = writeln!(s, "perspective_squash={}", self.perspective_squash);
        let _ = writeln!(s, "depth_start_cm={}", self.depth_start_cm);
        let _ = writeln!(s, "depth_end_cm={}", self.depth_end_cm);
        if let Some((a, b)) = self.calib_range {
            let _ = writeln!(s, "calib_start={a}");
            let _ = writeln!(s, "calib_end={b}");
        }
        let _ = writeln!(s, "label_blink_fraction={}", self.label_blink_fraction);
        let _ = writeln!(
            s,
            "label_saccade_threshold={}",
            self.label_saccade_threshold
        );
        let _ = writeln!(s, "label_pursuit_low={}", self.label_pursuit_low);
        let _ = writeln!(s, "pupil_points={}", self.pupil_points);
        let _ = writeln!(s, "iris_points={}", self.iris_points);
        let _ = writeln!(s, "eyelid_upper_points={}", self.eyelid_upper_points);
        let _ = writeln!(s, "eyelid_lower_points={}", self.eyelid_lower_points);
        let _ = writeln!(s, "marker_points={}", self.marker_points);
        for r in &self.regimes {
            let _ = writeln!(
                s,
                "{},{},{},{},{}",
                r.start_s,
                r.end_s,
                r.kind.as_str(),
                r.p1,
                r.p2
            );
        }
        f.write_str(&s)
    }
}

fn parse_eye(v: &str, key: &str) -> Result<EyeTruth, SynthError> {
    let parts: Vec<f64> = v
        .split(',')
        .map(|p| parse_num(p, key))
        .collect::<Result<_, _>>()?;
    if parts.len() != 8 {
        return Err(SynthError::Format(format!("{key}: expected 8 values")));
    }
    Ok(EyeTruth {
        center: (parts[0], parts[1]),
        radius: parts[2],
        pupil_radius: parts[3],
        iris_radius: parts[4],
        lid_half_width: parts[5],
        lid_amplitude_upper: parts[6],
        lid_amplitude_lower: parts[7],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_script_is_valid() {
        let script = SceneScript::default_script();
        script.validate().unwrap();
    }

    #[test]
    fn script_file_round_trip() {
        let script = SceneScript::default_script();
        let text = script.to_string();
        let back: SceneScript = text.parse().unwrap();
        assert_eq!(back.regimes.len(), script.regimes.len());
        assert_eq!(back.seed, script.seed);
        assert_eq!(back.map.linear, script.map.linear);
        assert_eq!(back.left.center, script.left.center);
        assert_eq!(back.calib_range, script.calib_range);
    }

    #[test]
    fn gap_between_regimes_is_invalid() {
        let mut script = SceneScript::default_script();
        script.regimes[3].start_s += 0.01;
        assert!(matches!(
            script.validate(),
            Err(SynthError::InvalidScript(_))
        ));
    }

    #[test]
    fn regimes_must_cover_the_duration() {
        let mut script = SceneScript::default_script();
        script.duration_s = 11.0;
        assert!(script.validate().is_err());
    }

    #[test]
    fn gaze_is_continuous_across_regimes() {
        let script = SceneScript::default_script();
        for reg in &script.regimes {
            let before = script.gaze_at(reg.start_s - 1e-9);
            let after = script.gaze_at(reg.start_s + 1e-9);
            assert!(
                (before.0 - after.0).abs() < 1e-6 && (before.1 - after.1).abs() < 1e-6,
                "jump at {}",
                reg.start_s
            );
        }
    }

    #[test]
    fn hard_mode_bends_the_map() {
        let script = SceneScript::default_script();
        let u = (0.55, 0.45);
        let plain = script.map.eval(u, false);
        let bent = script.map.eval(u, true);
        assert_ne!(plain, bent);
        // The cubic term only involves the x input offset.
        let on_axis = (script.map.input_offset.0, 0.3);
        assert_eq!(
            script.map.eval(on_axis, false),
            script.map.eval(on_axis, true)
        );
    }

    #[test]
    fn openness_dips_to_zero_at_blink_midpoints() {
        let script = SceneScript::default_script();
        assert!(script.openness_at(3.675).abs() < 1e-9);
        assert_eq!(script.openness_at(2.0), 1.0);
    }
}

//! Scripted stylus input and initial robot state.

use std::path::{Path, PathBuf};

use macromicro_core::{ArmConfig, Pose, SnakeConfig, StylusSample};
use nalgebra::{Quaternion, UnitQuaternion, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    pub arm_joints: [f64; 6],
    pub snake_config: [f64; 4],
}

impl Default for InitialState {
    /// Elbow-up arm with the tool pointing down, snake bent away from the
    /// straight (singular) pose.
    fn default() -> Self {
        use std::f64::consts::FRAC_PI_2;
        Self {
            arm_joints: [0.0, -FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, -FRAC_PI_2, 0.0],
            snake_config: [0.0, 0.0, 1.6, 0.8],
        }
    }
}

impl InitialState {
    pub fn arm(&self) -> ArmConfig {
        ArmConfig::new(self.arm_joints)
    }

    pub fn snake(&self) -> SnakeConfig {
        SnakeConfig { theta: self.snake_config }
    }
}

/// Stylus state at time `t`. Position and orientation are interpolated
/// between keyframes; buttons hold their value until the next keyframe.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Keyframe {
    pub t: f64,
    pub position: [f64; 3],
    /// `[w, x, y, z]`; defaults to the previous keyframe's orientation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<[f64; 4]>,
    #[serde(default)]
    pub white: bool,
    #[serde(default)]
    pub grey: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Noise {
    /// Standard deviation of isotropic position noise, mm.
    pub position_std_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Defaults to the last keyframe time.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    #[serde(default)]
    pub initial: InitialState,
    #[serde(default)]
    pub keyframes: Vec<Keyframe>,
    /// CSV with columns t,x,y,z,qw,qx,qy,qz,white,grey, appended to the
    /// keyframes. Relative paths resolve against the scenario file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_csv: Option<PathBuf>,
    #[serde(default)]
    pub noise: Noise,
    /// Used when the caller does not supply one.
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Deserialize)]
struct CsvRow {
    t: f64,
    x: f64,
    y: f64,
    z: f64,
    qw: f64,
    qx: f64,
    qy: f64,
    qz: f64,
    white: u8,
    grey: u8,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| SimError::Scenario(e.to_string()))?;
        if s.samples_csv.is_some() {
            return Err(SimError::Scenario("samples_csv needs a scenario file to resolve against".into()));
        }
        s.validate()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        let mut s: Scenario = serde_json::from_str(&text).map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
        if let Some(csv_path) = s.samples_csv.take() {
            let full = path.parent().unwrap_or(Path::new(".")).join(csv_path);
            s.keyframes.extend(read_samples_csv(&full)?);
        }
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Scenario(m));
        if self.keyframes.is_empty() {
            return bad("scenario has no keyframes".into());
        }
        for (i, k) in self.keyframes.iter().enumerate() {
            if !k.t.is_finite() || k.position.iter().any(|v| !v.is_finite()) {
                return bad(format!("keyframe {i} is not finite"));
            }
            if let Some(q) = k.orientation {
                let n = q.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !(n.is_finite() && n > 1e-9) {
                    return bad(format!("keyframe {i} has a degenerate orientation"));
                }
            }
            if i > 0 && k.t <= self.keyframes[i - 1].t {
                return bad(format!("keyframe {i} time {} does not increase", k.t));
            }
        }
        if self.keyframes[0].t < 0.0 {
            return bad("keyframes start before t = 0".into());
        }
        if let Some(d) = self.duration_s {
            if !(d >= 0.0 && d.is_finite()) {
                return bad(format!("duration {d} is invalid"));
            }
        }
        let n = self.noise.position_std_mm;
        if !(n >= 0.0 && n.is_finite()) {
            return bad(format!("noise std {n} is invalid"));
        }
        if self.initial.arm_joints.iter().chain(&self.initial.snake_config).any(|v| !v.is_finite()) {
            return bad("initial state is not finite".into());
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.duration_s
            .unwrap_or_else(|| self.keyframes.last().map_or(0.0, |k| k.t))
    }

    /// Noise-free stylus state at `t`.
    pub fn sample_at(&self, t: f64) -> StylusSample {
        self.sample_with(t, &self.orientations())
    }

    fn sample_with(&self, t: f64, orientations: &[UnitQuaternion<f64>]) -> StylusSample {
        let kf = &self.keyframes;
        let after = kf.partition_point(|k| k.t <= t);
        let (pose, held) = if after == 0 {
            (pose_of(&kf[0], orientations[0]), &kf[0])
        } else if after == kf.len() {
            let last = kf.len() - 1;
            (pose_of(&kf[last], orientations[last]), &kf[last])
        } else {
            let (a, b) = (&kf[after - 1], &kf[after]);
            let s = (t - a.t) / (b.t - a.t);
            let p = Vector3::from(a.position).lerp(&Vector3::from(b.position), s);
            let (qa, qb) = (orientations[after - 1], orientations[after]);
            let q = qa.try_slerp(&qb, s, 1e-9).unwrap_or(qa);
            (Pose::new(q, p), a)
        };
        StylusSample {
            pose,
            white_button: held.white,
            grey_button: held.grey,
            timestamp: t,
        }
    }

    fn orientations(&self) -> Vec<UnitQuaternion<f64>> {
        let mut current = UnitQuaternion::identity();
        self.keyframes
            .iter()
            .map(|k| {
                if let Some([w, x, y, z]) = k.orientation {
                    current = UnitQuaternion::from_quaternion(Quaternion::new(w, x, y, z));
                }
                current
            })
            .collect()
    }
}

fn pose_of(k: &Keyframe, q: UnitQuaternion<f64>) -> Pose {
    Pose::new(q, Vector3::from(k.position))
}

pub fn read_samples_csv(path: &Path) -> Result<Vec<Keyframe>, SimError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| SimError::Scenario(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, row) in reader.deserialize::<CsvRow>().enumerate() {
        let r = row.map_err(|e| SimError::Scenario(format!("{} row {}: {e}", path.display(), i + 1)))?;
        out.push(Keyframe {
            t: r.t,
            position: [r.x, r.y, r.z],
            orientation: Some([r.qw, r.qx, r.qy, r.qz]),
            white: r.white != 0,
            grey: r.grey != 0,
        });
    }
    Ok(out)
}

/// Stylus samples at `stylus_hz`, with seeded position noise.
pub struct StylusStream<'a> {
    scenario: &'a Scenario,
    hz: f64,
    next: u64,
    last: u64,
    rng: ChaCha8Rng,
    noise: Option<Normal<f64>>,
    orientations: Vec<UnitQuaternion<f64>>,
}

impl<'a> StylusStream<'a> {
    pub fn new(scenario: &'a Scenario, stylus_hz: u32, last_index: u64, seed: u64) -> Self {
        let std = scenario.noise.position_std_mm;
        Self {
            scenario,
            hz: f64::from(stylus_hz),
            next: 0,
            last: last_index,
            rng: ChaCha8Rng::seed_from_u64(seed),
            noise: (std > 0.0).then(|| Normal::new(0.0, std).expect("std validated")),
            orientations: scenario.orientations(),
        }
    }
}

impl Iterator for StylusStream<'_> {
    type Item = StylusSample;

    fn next(&mut self) -> Option<StylusSample> {
        if self.next > self.last {
            return None;
        }
        let t = self.next as f64 / self.hz;
        self.next += 1;
        let mut s = self.scenario.sample_with(t, &self.orientations);
        if let Some(n) = &self.noise {
            let d = Vector3::new(n.sample(&mut self.rng), n.sample(&mut self.rng), n.sample(&mut self.rng));
            s.pose.translation += d;
        }
        Some(s)
    }
}

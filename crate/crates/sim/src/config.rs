//! Simulation configuration.

use macromicro_core::{ArmModel, ClutchMode, IkOptions, Pose, SnakeDescriptor, TaskSpace, TeleopParams};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RateConfig {
    pub stylus_hz: u32,
    pub control_hz: u32,
    /// 40 mimics an electromagnetic tracker.
    pub recorder_hz: u32,
}

impl Default for RateConfig {
    fn default() -> Self {
        Self {
            stylus_hz: 1000,
            control_hz: 100,
            recorder_hz: 100,
        }
    }
}

impl RateConfig {
    pub fn new(stylus_hz: u32, control_hz: u32, recorder_hz: u32) -> Self {
        Self {
            stylus_hz,
            control_hz,
            recorder_hz,
        }
    }

    /// The recorder rate need not divide the control rate: frames are kept
    /// whenever `floor(k·recorder/control)` advances.
    pub fn validate(&self) -> Result<(), SimError> {
        let RateConfig {
            stylus_hz,
            control_hz,
            recorder_hz,
        } = *self;
        if recorder_hz < 1 || control_hz < recorder_hz || stylus_hz < control_hz {
            return Err(SimError::Config(format!(
                "rates must satisfy stylus ≥ control ≥ recorder ≥ 1, got {stylus_hz}/{control_hz}/{recorder_hz}"
            )));
        }
        if stylus_hz % control_hz != 0 {
            return Err(SimError::Config(format!(
                "stylus rate {stylus_hz} is not a multiple of control rate {control_hz}"
            )));
        }
        Ok(())
    }

    pub fn samples_per_tick(&self) -> u64 {
        u64::from(self.stylus_hz / self.control_hz)
    }

    /// Whether control tick `k` produces a recorded frame.
    pub fn records(&self, k: u64) -> bool {
        let r = u64::from(self.recorder_hz);
        let c = u64::from(self.control_hz);
        k == 0 || (k * r) / c > ((k - 1) * r) / c
    }

    pub fn control_period(&self) -> f64 {
        1.0 / f64::from(self.control_hz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServoConfig {
    pub max_speed_rad_s: f64,
    pub min_rad: f64,
    pub max_rad: f64,
}

impl Default for ServoConfig {
    fn default() -> Self {
        Self {
            max_speed_rad_s: 6.1,
            min_rad: -std::f64::consts::FRAC_PI_2,
            max_rad: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub snake: SnakeDescriptor,
    pub arm: ArmModel,
    /// Tool flange to micro-module base.
    pub flange_offset: Pose,
    pub macro_teleop: TeleopParams,
    pub micro_teleop: TeleopParams,
    pub clutch_mode: ClutchMode,
    pub rates: RateConfig,
    pub servo: ServoConfig,
    pub macro_ik: IkOptions<f64>,
    pub micro_ik: IkOptions<f64>,
    /// Outbound state messages per second in live mode.
    pub telemetry_hz: u32,
    /// Emulator port in live mode; 0 picks a free one.
    pub actuator_port: u16,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            snake: SnakeDescriptor::reference(),
            arm: ArmModel::ur5e(),
            flange_offset: Pose::identity(),
            macro_teleop: TeleopParams::macro_default(),
            micro_teleop: TeleopParams::micro_default(),
            clutch_mode: ClutchMode::Toggle,
            rates: RateConfig::default(),
            servo: ServoConfig::default(),
            macro_ik: IkOptions::default(),
            // four joints cannot follow a full pose
            micro_ik: IkOptions {
                task: TaskSpace::Position,
                ..IkOptions::default()
            },
            telemetry_hz: 30,
            actuator_port: 0,
        }
    }
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: SimConfig = serde_json::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.rates.validate()?;
        self.snake.validate()?;
        self.arm.validate()?;
        if !self.flange_offset.is_finite() {
            return Err(SimError::Config("flange_offset is not finite".into()));
        }
        if !self.macro_teleop.is_valid() || !self.micro_teleop.is_valid() {
            return Err(SimError::Config("teleop scales must be positive and finite".into()));
        }
        let s = &self.servo;
        if !(s.max_speed_rad_s > 0.0 && s.max_speed_rad_s.is_finite() && s.min_rad < s.max_rad) {
            return Err(SimError::Config("servo speed must be positive and min_rad < max_rad".into()));
        }
        if self.telemetry_hz < 20 {
            return Err(SimError::Config(format!(
                "telemetry_hz must be at least 20, got {}",
                self.telemetry_hz
            )));
        }
        for (name, o) in [("macro_ik", &self.macro_ik), ("micro_ik", &self.micro_ik)] {
            if !(o.lambda >= 0.0 && o.max_step > 0.0 && o.pos_tol > 0.0 && o.rot_tol > 0.0 && o.max_iters > 0) {
                return Err(SimError::Config(format!("{name} has a non-positive tolerance or budget")));
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}

//! Fixed-timestep simulation of the macro-micro teleoperation loop: scripted
//! or live stylus input, clutch routing, arm and snake IK, the pulley
//! pipeline over the actuator protocol, trace recording and metrics.

pub mod config;
pub mod engine;
pub mod export;
pub mod link;
pub mod live;
pub mod metrics;
pub mod run;
pub mod scenario;
pub mod trace;

use std::path::Path;

use macromicro_core::KinematicsError;
use thiserror::Error;

pub use config::{RateConfig, ServoConfig, SimConfig};
pub use engine::{Engine, TickOutput};
pub use metrics::{evaluate, TrackingReport};
pub use run::run;
pub use scenario::{InitialState, Keyframe, Scenario};
pub use trace::{Replay, SimFrame, Trace};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("config: {0}")]
    Config(String),
    #[error("scenario: {0}")]
    Scenario(String),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("actuator link: {0}")]
    Link(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("trace line {line}{}: {message}", frame.map(|f| format!(" (frame {f})")).unwrap_or_default())]
    Trace {
        frame: Option<u64>,
        line: usize,
        message: String,
    },
    #[error("{0}")]
    Report(String),
}

impl SimError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SimError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

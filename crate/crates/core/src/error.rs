use std::fmt;

use thiserror::Error;

use crate::snake::{Axis, ModuleSide};

/// Identifies one rolling interface of the snake.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InterfaceId {
    pub module: ModuleSide,
    pub index: usize,
    pub axis: Axis,
}

impl fmt::Display for InterfaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} interface {} ({})", self.module, self.index, self.axis)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicsError {
    #[error("joint limit exceeded at {interface}: |{angle}| > {limit} rad")]
    JointLimit {
        interface: InterfaceId,
        angle: f64,
        limit: f64,
    },
    #[error("interface angle |{angle}| exceeds 2·alpha = {limit} rad")]
    InterfaceLimit { angle: f64, limit: f64 },
    #[error("pulley {pair} saturated: |{angle}| > {limit} rad")]
    PulleySaturation { pair: usize, angle: f64, limit: f64 },
    #[error("singular system: J has rank deficiency and lambda is zero")]
    Singular,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

pub type Result<T, E = KinematicsError> = std::result::Result<T, E>;

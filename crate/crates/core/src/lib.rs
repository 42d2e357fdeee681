//! Kinematics and teleoperation for a macro-micro surgical robot: a
//! rolling-joint continuum manipulator (the micro module) carried by a
//! six-joint serial arm (the macro module).
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`). The crate
//! root re-exports `f64` aliases of the common types.

// Validation negates comparisons so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod arm;
pub mod dls;
pub mod error;
pub mod ik;
pub mod real;
pub mod se3;
pub mod snake;
pub mod teleop;
pub mod tendon;

pub use arm::{arm_fk, arm_ik, DhRow};
pub use dls::{dls_step, IkOptions, TaskSpace};
pub use error::{InterfaceId, KinematicsError};
pub use ik::solve_ik;
pub use real::Real;
pub use snake::{interface_transform, snake_fk, snake_frames, snake_jacobian, Axis, ModuleSide};
pub use teleop::{on_button_edge, track, ClutchMode, Module};
pub use tendon::{actuators_to_joints, joints_to_tendons, tendon_delta, tendons_to_actuators};

pub type Pose = se3::Pose<f64>;
pub type ModuleParams = snake::ModuleParams<f64>;
pub type SnakeDescriptor = snake::SnakeDescriptor<f64>;
pub type SnakeConfig = snake::SnakeConfig<f64>;
pub type TendonState = tendon::TendonState<f64>;
pub type ActuatorCommand = tendon::ActuatorCommand<f64>;
pub type SnakeIkSolution = ik::SnakeIkSolution<f64>;
pub type DhTable = arm::DhTable<f64>;
pub type ArmModel = arm::ArmModel<f64>;
pub type ArmConfig = arm::ArmConfig<f64>;
pub type ArmIkSolution = arm::ArmIkSolution<f64>;
pub type StylusSample = teleop::StylusSample<f64>;
pub type ClutchState = teleop::ClutchState<f64>;
pub type TeleopParams = teleop::TeleopParams<f64>;
pub type TeleopRouter = teleop::TeleopRouter<f64>;

pub type Pose32 = se3::Pose<f32>;
pub type SnakeDescriptor32 = snake::SnakeDescriptor<f32>;
pub type SnakeConfig32 = snake::SnakeConfig<f32>;
pub type ArmModel32 = arm::ArmModel<f32>;

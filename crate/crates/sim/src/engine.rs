//! One control tick of the macro-micro system.

use macromicro_core::tendon::ActuatorCommand;
use macromicro_core::{
    actuators_to_joints, arm_fk, arm_ik, joints_to_tendons, snake_fk, solve_ik, tendons_to_actuators, track,
    ArmConfig, Module, Pose, SnakeConfig, StylusSample, TeleopParams, TeleopRouter,
};

use crate::config::SimConfig;
use crate::link::ActuatorLink;
use crate::scenario::InitialState;
use crate::trace::{Clutches, Event, EventKind, SimFrame};
use crate::SimError;

/// Pulley angles that hold `config`.
pub fn pulleys_for(cfg: &SimConfig, config: &SnakeConfig) -> Result<[f64; 4], SimError> {
    cfg.snake.check_limits(config)?;
    let tendons = joints_to_tendons(&cfg.snake, config)?;
    Ok(tendons_to_actuators(&cfg.snake, &tendons)?.pulley_angles)
}

/// Everything a tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TickOutput {
    pub frame: SimFrame,
    pub events: Vec<Event>,
    /// Distance from each module's target to where it ended up, mm.
    pub macro_error: Option<f64>,
    pub micro_error: Option<f64>,
}

pub struct Engine<L> {
    cfg: SimConfig,
    router: TeleopRouter,
    macro_params: TeleopParams,
    micro_params: TeleopParams,
    joints: ArmConfig,
    micro_command: SnakeConfig,
    link: L,
    tick: u64,
    last_sample: StylusSample,
    samples_consumed: u64,
}

impl<L: ActuatorLink> Engine<L> {
    /// `link` must already hold the pulleys at `initial.snake()`.
    pub fn new(cfg: SimConfig, initial: &InitialState, link: L) -> Result<Self, SimError> {
        cfg.validate()?;
        cfg.snake.check_limits(&initial.snake())?;
        if !cfg.arm.within_limits(&initial.arm()) {
            return Err(SimError::Scenario("initial arm joints are outside limits".into()));
        }
        Ok(Self {
            router: TeleopRouter::new(cfg.clutch_mode),
            macro_params: cfg.macro_teleop,
            micro_params: cfg.micro_teleop,
            joints: initial.arm(),
            micro_command: initial.snake(),
            link,
            tick: 0,
            last_sample: StylusSample {
                pose: Pose::identity(),
                white_button: false,
                grey_button: false,
                timestamp: 0.0,
            },
            samples_consumed: 0,
            cfg,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn samples_consumed(&self) -> u64 {
        self.samples_consumed
    }

    pub fn link(&self) -> &L {
        &self.link
    }

    pub fn router(&self) -> &TeleopRouter {
        &self.router
    }

    pub fn params(&self, module: Module) -> TeleopParams {
        match module {
            Module::Macro => self.macro_params,
            Module::Micro => self.micro_params,
        }
    }

    /// Takes effect on the next tick; an engaged clutch keeps its references.
    pub fn set_params(&mut self, module: Module, params: TeleopParams) -> Result<(), SimError> {
        if !params.is_valid() {
            return Err(SimError::Config("teleop scales must be positive and finite".into()));
        }
        match module {
            Module::Macro => self.macro_params = params,
            Module::Micro => self.micro_params = params,
        }
        Ok(())
    }

    /// Dead-man release of both clutches.
    pub fn release_all(&mut self) {
        self.router.release_all();
    }

    /// Advances one control period. `batch` holds the stylus samples that
    /// arrived since the previous tick: every sample's buttons are fed to the
    /// clutches so short presses are not lost, and the latest pose is tracked.
    /// An empty batch repeats the previous sample's pose.
    pub fn step(&mut self, batch: &[StylusSample]) -> Result<TickOutput, SimError> {
        let tick = self.tick;
        let t = tick as f64 * self.cfg.rates.control_period();
        let mut events = Vec::new();
        let mut event = |module, kind, detail: String| {
            log::debug!("tick {tick}: {module:?} {detail}");
            events.push(Event {
                tick,
                t,
                module,
                kind,
                detail,
            });
        };

        let pulleys = self.link.sync(t)?;
        let realized = actuators_to_joints(
            &self.cfg.snake,
            &ActuatorCommand {
                pulley_angles: pulleys,
            },
        );
        let flange = arm_fk(&self.cfg.arm, &self.joints);
        let micro_pose = self.cfg.flange_offset.compose(&snake_fk(&self.cfg.snake, &realized)?);

        for sample in batch {
            self.router.update_clutches(sample, &flange, &micro_pose);
        }
        self.samples_consumed += batch.len() as u64;
        if let Some(s) = batch.last() {
            self.last_sample = *s;
        }
        let stylus = self.last_sample;
        let macro_target = track(&self.router.macro_clutch, &self.macro_params, &stylus.pose);
        let micro_target = track(&self.router.micro_clutch, &self.micro_params, &stylus.pose);

        if let Some(target) = &macro_target {
            match arm_ik(&self.cfg.arm, target, &self.joints, &self.cfg.macro_ik) {
                Ok(s) if s.converged => self.joints = s.config,
                Ok(s) => event(
                    Module::Macro,
                    EventKind::IkNotConverged,
                    format!(
                        "holding; residual {:.6} mm, {:.6} rad",
                        s.position_error, s.orientation_error
                    ),
                ),
                Err(e) => event(Module::Macro, EventKind::Kinematics, e.to_string()),
            }
        }

        if let Some(target) = &micro_target {
            let local = self.cfg.flange_offset.inverse().compose(target);
            match solve_ik(&self.cfg.snake, &local, &self.micro_command, &self.cfg.micro_ik) {
                Ok(s) if s.converged => match pulleys_for(&self.cfg, &s.config) {
                    Ok(angles) => {
                        self.link.command(angles, t)?;
                        self.micro_command = s.config;
                    }
                    Err(e) => event(Module::Micro, EventKind::Kinematics, e.to_string()),
                },
                Ok(s) => event(
                    Module::Micro,
                    EventKind::IkNotConverged,
                    format!("holding; residual {:.6} mm", s.position_error),
                ),
                Err(e) => event(Module::Micro, EventKind::Kinematics, e.to_string()),
            }
        }

        let flange = arm_fk(&self.cfg.arm, &self.joints);
        let tip = flange.compose(&micro_pose);
        let macro_error = macro_target.map(|g| g.position_distance(&flange));
        let micro_error = micro_target.map(|g| g.position_distance(&micro_pose));
        let frame = SimFrame {
            tick,
            t,
            stylus,
            macro_joints: self.joints.joints,
            snake_config: realized.theta,
            micro_command: self.micro_command.theta,
            flange_pose: flange,
            tip_pose: tip,
            clutches: Clutches {
                macro_engaged: self.router.macro_clutch.engaged(),
                micro_engaged: self.router.micro_clutch.engaged(),
            },
            macro_refs: self.router.macro_clutch.refs,
            micro_refs: self.router.micro_clutch.refs,
            macro_target,
            micro_target,
            pulley_angles: pulleys,
        };
        self.tick += 1;
        Ok(TickOutput {
            frame,
            events,
            macro_error,
            micro_error,
        })
    }
}

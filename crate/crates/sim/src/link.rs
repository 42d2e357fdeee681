//! Path from pulley commands to the servo emulator.

use std::net::ToSocketAddrs;

use macromicro_protocol::{encode, ActuatorClient, ClientError, CommandFrame, Reply, ServoBank, ServoController};

use crate::config::ServoConfig;
use crate::SimError;

/// Sends pulley angle commands and reads back servo positions.
pub trait ActuatorLink {
    /// Servo positions at simulation time `t`.
    fn sync(&mut self, t: f64) -> Result<[f64; 4], SimError>;
    fn command(&mut self, angles: [f64; 4], t: f64) -> Result<(), SimError>;
}

pub fn servo_bank(cfg: &ServoConfig, initial: [f64; 4]) -> Result<ServoBank, SimError> {
    let mut bank = ServoBank::new(cfg.max_speed_rad_s, cfg.min_rad, cfg.max_rad)
        .map_err(|e| SimError::Config(e.to_string()))?;
    for (servo, a) in bank.servos.iter_mut().zip(initial) {
        if !(cfg.min_rad..=cfg.max_rad).contains(&a) {
            return Err(SimError::Config(format!("initial pulley angle {a} is outside servo travel")));
        }
        servo.position = a;
        servo.target = a;
    }
    Ok(bank)
}

/// Emulator in the same process, driven in simulated time. Commands still
/// go through the wire encoding so the quantisation matches the TCP path.
pub struct InProcessLink {
    controller: ServoController,
    next_seq: u64,
}

impl InProcessLink {
    pub fn new(bank: ServoBank) -> Self {
        Self {
            controller: ServoController::new(bank),
            next_seq: 1,
        }
    }

    pub fn bank(&self) -> &ServoBank {
        self.controller.bank()
    }
}

impl ActuatorLink for InProcessLink {
    fn sync(&mut self, t: f64) -> Result<[f64; 4], SimError> {
        self.controller.tick(t);
        Ok(self.controller.bank().positions())
    }

    fn command(&mut self, angles: [f64; 4], t: f64) -> Result<(), SimError> {
        let seq = self.next_seq;
        self.next_seq += 1;
        let line = encode(&CommandFrame::Set { seq, angles }).map_err(|e| SimError::Link(e.to_string()))?;
        match self.controller.handle_line(&line, t) {
            Reply::Ack { .. } => Ok(()),
            other => Err(SimError::Link(format!("emulator refused SET {seq}: {other:?}"))),
        }
    }
}

/// Remote emulator (or hardware) over TCP, running on its own clock.
pub struct TcpLink {
    client: ActuatorClient,
}

impl TcpLink {
    pub fn connect(addr: impl ToSocketAddrs) -> Result<Self, SimError> {
        Ok(Self {
            client: ActuatorClient::connect(addr).map_err(link_err)?,
        })
    }
}

fn link_err(e: ClientError) -> SimError {
    SimError::Link(e.to_string())
}

impl ActuatorLink for TcpLink {
    fn sync(&mut self, _t: f64) -> Result<[f64; 4], SimError> {
        self.client.get().map_err(link_err)
    }

    fn command(&mut self, angles: [f64; 4], _t: f64) -> Result<(), SimError> {
        self.client.set(angles).map(|_| ()).map_err(link_err)
    }
}

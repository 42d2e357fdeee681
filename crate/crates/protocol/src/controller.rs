//! Frame handling for the servo emulator, independent of transport.

use crate::frame::{decode, CommandFrame, Reply};
use crate::servo::ServoBank;

#[derive(Debug, Clone)]
pub struct ServoController {
    bank: ServoBank,
    last_seq: Option<u64>,
    last_time: Option<f64>,
}

impl ServoController {
    pub fn new(bank: ServoBank) -> Self {
        Self {
            bank,
            last_seq: None,
            last_time: None,
        }
    }

    pub fn bank(&self) -> &ServoBank {
        &self.bank
    }

    pub fn last_seq(&self) -> Option<u64> {
        self.last_seq
    }

    /// Advances the servos to time `now`.
    pub fn tick(&mut self, now: f64) {
        match self.last_time {
            Some(prev) if now > prev => {
                self.bank.step(now - prev);
                self.last_time = Some(now);
            }
            Some(_) => {}
            None => self.last_time = Some(now),
        }
    }

    /// Sequence numbers restart with each connection.
    pub fn begin_session(&mut self) {
        self.last_seq = None;
    }

    /// Fail-safe: hold the servos where they stand.
    pub fn freeze(&mut self) {
        self.bank.freeze();
    }

    pub fn handle_line(&mut self, line: &[u8], now: f64) -> Reply {
        self.tick(now);
        match decode(line) {
            Ok(frame) => self.apply(&frame),
            Err(e) => {
                log::debug!("rejected frame: {e}");
                Reply::Nack {
                    seq: 0,
                    reason: e.to_string(),
                }
            }
        }
    }

    pub fn handle_frame(&mut self, frame: &CommandFrame, now: f64) -> Reply {
        self.tick(now);
        self.apply(frame)
    }

    fn apply(&mut self, frame: &CommandFrame) -> Reply {
        let seq = frame.seq();
        if self.last_seq.is_some_and(|last| seq <= last) {
            return Reply::Nack {
                seq,
                reason: "stale sequence".into(),
            };
        }
        self.last_seq = Some(seq);
        match frame {
            CommandFrame::Set { angles, .. } => {
                self.bank.set_targets(angles);
                Reply::Ack { seq }
            }
            CommandFrame::Get { .. } => Reply::Pos {
                seq,
                angles: self.bank.positions(),
            },
            CommandFrame::Ping { .. } => Reply::Ack { seq },
        }
    }
}

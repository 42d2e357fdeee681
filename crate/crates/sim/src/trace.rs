//! NDJSON trace: a header line, then frames and events in tick order, then a
//! summary line.

use std::io::{BufRead, Write};
use std::path::Path;

use macromicro_core::teleop::ClutchRefs;
use macromicro_core::{Module, Pose, StylusSample};
use serde::{Deserialize, Serialize};

use crate::config::{RateConfig, SimConfig};
use crate::SimError;

pub const FORMAT: &str = "macromicro-trace";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Clutches {
    #[serde(rename = "macro")]
    pub macro_engaged: bool,
    #[serde(rename = "micro")]
    pub micro_engaged: bool,
}

/// System state at one recorded control tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimFrame {
    pub tick: u64,
    pub t: f64,
    /// Latest stylus sample consumed on this tick.
    pub stylus: StylusSample,
    pub macro_joints: [f64; 6],
    /// Module angles realised by the servos.
    pub snake_config: [f64; 4],
    /// Module angles last sent to the servos.
    pub micro_command: [f64; 4],
    pub flange_pose: Pose,
    /// Snake tip in the arm base frame.
    pub tip_pose: Pose,
    pub clutches: Clutches,
    pub macro_refs: Option<ClutchRefs<f64>>,
    pub micro_refs: Option<ClutchRefs<f64>>,
    /// Arm base frame.
    pub macro_target: Option<Pose>,
    /// Flange frame.
    pub micro_target: Option<Pose>,
    pub pulley_angles: [f64; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    IkNotConverged,
    Kinematics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub tick: u64,
    pub t: f64,
    pub module: Module,
    pub kind: EventKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Header {
    pub format: String,
    pub version: u32,
    pub scenario: String,
    pub seed: u64,
    pub config_hash: String,
    pub rates: RateConfig,
    pub config: SimConfig,
}

impl Header {
    pub fn new(config: &SimConfig, scenario: &str, seed: u64) -> Self {
        Self {
            format: FORMAT.into(),
            version: VERSION,
            scenario: scenario.into(),
            seed,
            config_hash: config.hash(),
            rates: config.rates,
            config: config.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Summary {
    pub ticks: u64,
    pub stylus_samples: u64,
    pub frames: u64,
    pub events: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Record {
    Header(Header),
    Frame(SimFrame),
    Event(Event),
    Summary(Summary),
}

/// A whole trace held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub header: Header,
    pub frames: Vec<SimFrame>,
    pub events: Vec<Event>,
    pub summary: Option<Summary>,
}

impl Trace {
    /// Serialises in tick order: each tick's events precede its frame.
    pub fn write_to(&self, out: &mut impl Write) -> Result<(), SimError> {
        write_record(out, &Record::Header(self.header.clone()))?;
        let mut events = self.events.iter().peekable();
        for frame in &self.frames {
            while let Some(e) = events.next_if(|e| e.tick <= frame.tick) {
                write_record(out, &Record::Event(e.clone()))?;
            }
            write_record(out, &Record::Frame(frame.clone()))?;
        }
        for e in events {
            write_record(out, &Record::Event(e.clone()))?;
        }
        if let Some(s) = self.summary {
            write_record(out, &Record::Summary(s))?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to memory cannot fail");
        buf
    }

    pub fn save(&self, path: &Path) -> Result<(), SimError> {
        let file = std::fs::File::create(path).map_err(|e| SimError::io(path, e))?;
        let mut out = std::io::BufWriter::new(file);
        self.write_to(&mut out)?;
        out.flush().map_err(|e| SimError::io(path, e))
    }

    /// Reads a complete trace. An empty input has no header and yields
    /// `Ok(None)`.
    pub fn read(input: impl BufRead) -> Result<Option<Trace>, SimError> {
        let mut replay = Replay::new(input)?;
        let Some(header) = replay.header.clone() else {
            return Ok(None);
        };
        let mut frames = Vec::new();
        for f in replay.by_ref() {
            frames.push(f?);
        }
        Ok(Some(Trace {
            header,
            frames,
            events: replay.events,
            summary: replay.summary,
        }))
    }

    pub fn load(path: &Path) -> Result<Option<Trace>, SimError> {
        let file = std::fs::File::open(path).map_err(|e| SimError::io(path, e))?;
        Self::read(std::io::BufReader::new(file))
    }
}

fn write_record(out: &mut impl Write, record: &Record) -> Result<(), SimError> {
    serde_json::to_writer(&mut *out, record).map_err(|e| SimError::Trace {
        frame: None,
        line: 0,
        message: e.to_string(),
    })?;
    out.write_all(b"\n").map_err(|e| SimError::Trace {
        frame: None,
        line: 0,
        message: e.to_string(),
    })
}

/// Streams frames from a trace, validating each line.
pub struct Replay<R> {
    input: R,
    pub header: Option<Header>,
    pub events: Vec<Event>,
    pub summary: Option<Summary>,
    line_no: usize,
    frame_index: u64,
    last_tick: Option<u64>,
    failed: bool,
}

impl<R: BufRead> Replay<R> {
    pub fn new(input: R) -> Result<Self, SimError> {
        let mut line = String::new();
        let mut replay = Self {
            input,
            header: None,
            events: Vec::new(),
            summary: None,
            line_no: 0,
            frame_index: 0,
            last_tick: None,
            failed: false,
        };
        let n = replay.input.read_line(&mut line).map_err(|e| replay.error(e.to_string()))?;
        replay.line_no = 1;
        if n == 0 {
            return Ok(replay);
        }
        let header = match serde_json::from_str::<Record>(&line) {
            Ok(Record::Header(h)) => h,
            Ok(_) => return Err(replay.error("first record is not a header".into())),
            Err(e) => return Err(replay.error(e.to_string())),
        };
        if header.format != FORMAT || header.version != VERSION {
            return Err(replay.error(format!(
                "unsupported trace format {} v{}",
                header.format, header.version
            )));
        }
        replay.header = Some(header);
        Ok(replay)
    }

    fn error(&self, message: String) -> SimError {
        SimError::Trace {
            frame: Some(self.frame_index),
            line: self.line_no,
            message,
        }
    }
}

impl<R: BufRead> Iterator for Replay<R> {
    type Item = Result<SimFrame, SimError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed || self.header.is_none() {
            return None;
        }
        let mut line = String::new();
        loop {
            line.clear();
            let n = match self.input.read_line(&mut line) {
                Ok(n) => n,
                Err(e) => {
                    self.failed = true;
                    return Some(Err(self.error(e.to_string())));
                }
            };
            if n == 0 {
                return None;
            }
            self.line_no += 1;
            let fail = |me: &mut Self, msg: String| {
                me.failed = true;
                Some(Err(me.error(msg)))
            };
            if !line.ends_with('\n') {
                return fail(self, "truncated record".into());
            }
            if self.summary.is_some() {
                return fail(self, "record after summary".into());
            }
            match serde_json::from_str::<Record>(&line) {
                Ok(Record::Frame(f)) => {
                    if self.last_tick.is_some_and(|t| f.tick <= t) {
                        return fail(self, format!("tick {} does not increase", f.tick));
                    }
                    if !frame_is_finite(&f) {
                        return fail(self, "non-finite value".into());
                    }
                    self.last_tick = Some(f.tick);
                    self.frame_index += 1;
                    return Some(Ok(f));
                }
                Ok(Record::Event(e)) => self.events.push(e),
                Ok(Record::Summary(s)) => self.summary = Some(s),
                Ok(Record::Header(_)) => return fail(self, "second header".into()),
                Err(e) => return fail(self, e.to_string()),
            }
        }
    }
}

fn frame_is_finite(f: &SimFrame) -> bool {
    f.t.is_finite()
        && f.macro_joints.iter().chain(&f.snake_config).chain(&f.pulley_angles).all(|v| v.is_finite())
        && f.flange_pose.is_finite()
        && f.tip_pose.is_finite()
}

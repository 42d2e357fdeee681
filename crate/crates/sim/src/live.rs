//! Live mode: the engine runs in wall-clock time, a WebSocket service feeds
//! it stylus input and streams state snapshots back.
//!
//! Inbound messages (JSON text frames):
//!
//! ```text
//! {"type": "stylus", "pose": {"position": [x, y, z], "orientation": [w, x, y, z]}, "white": bool, "grey": bool}
//! {"type": "params", "module": "macro" | "micro", "translation_scale": s, "rotation_scale": r}
//! ```
//!
//! `module` defaults to macro; either scale may be omitted. Outbound
//! messages are [`StateMessage`]s tagged `"type": "state"`.

use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, Sender};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use macromicro_core::{Module, Pose, StylusSample, TeleopParams};
use macromicro_protocol::{ServerHandle, SystemClock};
use serde::{Deserialize, Serialize};
use tungstenite::{Message, WebSocket};

use crate::config::SimConfig;
use crate::engine::{pulleys_for, Engine, TickOutput};
use crate::link::{servo_bank, ActuatorLink, TcpLink};
use crate::scenario::InitialState;
use crate::trace::Clutches;
use crate::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ClientMessage {
    Stylus {
        pose: Pose,
        white: bool,
        grey: bool,
    },
    Params {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        module: Option<Module>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        translation_scale: Option<f64>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation_scale: Option<f64>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scales {
    pub translation_scale: f64,
    pub rotation_scale: f64,
}

impl From<TeleopParams> for Scales {
    fn from(p: TeleopParams) -> Self {
        Self {
            translation_scale: p.translation_scale,
            rotation_scale: p.rotation_scale,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModulePair<T> {
    #[serde(rename = "macro")]
    pub macro_module: T,
    #[serde(rename = "micro")]
    pub micro_module: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename = "state")]
pub struct StateMessage {
    pub t: f64,
    pub tick: u64,
    pub stylus: Pose,
    pub flange_pose: Pose,
    pub tip_pose: Pose,
    pub macro_joints: [f64; 6],
    pub snake_config: [f64; 4],
    pub pulley_angles: [f64; 4],
    pub clutches: Clutches,
    /// Target-to-actual distance while engaged, mm.
    pub tracking_error_mm: ModulePair<Option<f64>>,
    pub params: ModulePair<Scales>,
    /// Tick at which the most recent stylus message arrived.
    pub input_tick: Option<u64>,
    /// Inbound messages that failed to parse.
    pub errors: u64,
}

enum Input {
    Stylus { sample: StylusSample, tick: u64 },
    Params(Module, Option<f64>, Option<f64>),
    Disconnect,
}

type Latest = Arc<Mutex<Option<Arc<StateMessage>>>>;

/// A running live session. Dropping it stops every thread.
pub struct LiveHandle {
    telemetry: SocketAddr,
    actuator: SocketAddr,
    stop: Arc<AtomicBool>,
    latest: Latest,
    threads: Vec<JoinHandle<()>>,
    emulator: Option<ServerHandle>,
}

impl LiveHandle {
    pub fn telemetry_addr(&self) -> SocketAddr {
        self.telemetry
    }

    pub fn actuator_addr(&self) -> SocketAddr {
        self.actuator
    }

    pub fn snapshot(&self) -> Option<Arc<StateMessage>> {
        self.latest.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }

    pub fn is_running(&self) -> bool {
        !self.stop.load(Ordering::SeqCst)
    }

    /// Blocks until the engine stops.
    pub fn wait(mut self) {
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }

    pub fn shutdown(self) {
        drop(self);
    }
}

impl Drop for LiveHandle {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        self.emulator.take();
    }
}

/// Starts the servo emulator (unless `actuator` names a running one), the
/// engine loop and the telemetry service on `telemetry_addr`.
pub fn serve_live(
    cfg: SimConfig,
    initial: InitialState,
    telemetry_addr: impl ToSocketAddrs,
    actuator: Option<SocketAddr>,
) -> Result<LiveHandle, SimError> {
    cfg.validate()?;
    let (emulator, actuator_addr) = match actuator {
        Some(addr) => (None, addr),
        None => {
            let bank = servo_bank(&cfg.servo, pulleys_for(&cfg, &initial.snake())?)?;
            let server = macromicro_protocol::serve(("127.0.0.1", cfg.actuator_port), bank, SystemClock::new())
                .map_err(|e| SimError::Link(format!("starting emulator: {e}")))?;
            let addr = server.local_addr();
            (Some(server), addr)
        }
    };
    let link = TcpLink::connect(actuator_addr)?;
    let engine = Engine::new(cfg.clone(), &initial, link)?;

    let listener = TcpListener::bind(telemetry_addr).map_err(|e| SimError::Link(format!("telemetry bind: {e}")))?;
    listener
        .set_nonblocking(true)
        .map_err(|e| SimError::Link(e.to_string()))?;
    let telemetry = listener.local_addr().map_err(|e| SimError::Link(e.to_string()))?;

    let stop = Arc::new(AtomicBool::new(false));
    let latest: Latest = Arc::new(Mutex::new(None));
    let errors = Arc::new(AtomicU64::new(0));
    let (tx, rx) = mpsc::channel();

    let engine_thread = {
        let (stop, latest, errors) = (stop.clone(), latest.clone(), errors.clone());
        thread::Builder::new()
            .name("sim-engine".into())
            .spawn(move || engine_loop(engine, rx, &stop, &latest, &errors))
            .map_err(|e| SimError::Link(e.to_string()))?
    };
    let accept_thread = {
        let (stop, latest) = (stop.clone(), latest.clone());
        let period = Duration::from_secs_f64(1.0 / f64::from(cfg.telemetry_hz));
        thread::Builder::new()
            .name("telemetry".into())
            .spawn(move || accept_loop(listener, tx, &stop, latest, errors, period))
            .map_err(|e| SimError::Link(e.to_string()))?
    };
    log::info!("telemetry on ws://{telemetry}, actuators at {actuator_addr}");
    Ok(LiveHandle {
        telemetry,
        actuator: actuator_addr,
        stop,
        latest,
        threads: vec![engine_thread, accept_thread],
        emulator,
    })
}

fn engine_loop<L: ActuatorLink>(
    mut engine: Engine<L>,
    inputs: Receiver<Input>,
    stop: &AtomicBool,
    latest: &Latest,
    errors: &AtomicU64,
) {
    let period = Duration::from_secs_f64(engine.config().rates.control_period());
    let start = Instant::now();
    let mut input_tick = None;
    let mut batch = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        let t = engine.tick() as f64 * period.as_secs_f64();
        batch.clear();
        while let Ok(input) = inputs.try_recv() {
            match input {
                Input::Stylus { mut sample, tick } => {
                    sample.timestamp = t;
                    batch.push(sample);
                    input_tick = Some(tick);
                }
                Input::Params(module, translation, rotation) => {
                    let mut p = engine.params(module);
                    p.translation_scale = translation.unwrap_or(p.translation_scale);
                    p.rotation_scale = rotation.unwrap_or(p.rotation_scale);
                    if let Err(e) = engine.set_params(module, p) {
                        log::warn!("ignored parameter update: {e}");
                        errors.fetch_add(1, Ordering::SeqCst);
                    }
                }
                Input::Disconnect => {
                    // feed the pending samples first so a press then a drop still ends released
                    if !batch.is_empty() {
                        if let Err(e) = engine.step(&batch) {
                            log::error!("engine stopped: {e}");
                            stop.store(true, Ordering::SeqCst);
                            return;
                        }
                        batch.clear();
                    }
                    engine.release_all();
                }
            }
        }
        match engine.step(&batch) {
            Ok(out) => {
                let msg = state_message(&engine, &out, input_tick, errors.load(Ordering::SeqCst));
                *latest.lock().unwrap_or_else(|e| e.into_inner()) = Some(Arc::new(msg));
            }
            Err(e) => {
                log::error!("engine stopped: {e}");
                stop.store(true, Ordering::SeqCst);
                return;
            }
        }
        let due = start + period * engine.tick() as u32;
        if let Some(wait) = due.checked_duration_since(Instant::now()) {
            thread::sleep(wait);
        }
    }
}

fn state_message<L>(engine: &Engine<L>, out: &TickOutput, input_tick: Option<u64>, errors: u64) -> StateMessage
where
    L: ActuatorLink,
{
    let f = &out.frame;
    StateMessage {
        t: f.t,
        tick: f.tick,
        stylus: f.stylus.pose,
        flange_pose: f.flange_pose,
        tip_pose: f.tip_pose,
        macro_joints: f.macro_joints,
        snake_config: f.snake_config,
        pulley_angles: f.pulley_angles,
        clutches: f.clutches,
        tracking_error_mm: ModulePair {
            macro_module: out.macro_error,
            micro_module: out.micro_error,
        },
        params: ModulePair {
            macro_module: engine.params(Module::Macro).into(),
            micro_module: engine.params(Module::Micro).into(),
        },
        input_tick,
        errors,
    }
}

fn accept_loop(
    listener: TcpListener,
    tx: Sender<Input>,
    stop: &Arc<AtomicBool>,
    latest: Latest,
    errors: Arc<AtomicU64>,
    period: Duration,
) {
    let mut clients = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                log::info!("telemetry client {peer} connected");
                let (tx, stop, latest, errors) = (tx.clone(), stop.clone(), latest.clone(), errors.clone());
                let spawned = thread::Builder::new()
                    .name(format!("telemetry-{peer}"))
                    .spawn(move || {
                        if let Err(e) = client_session(stream, &tx, &stop, &latest, &errors, period) {
                            log::info!("telemetry client {peer}: {e}");
                        }
                        // dead-man: losing the operator disengages both modules
                        let _ = tx.send(Input::Disconnect);
                    });
                match spawned {
                    Ok(h) => clients.push(h),
                    Err(e) => log::warn!("could not spawn client thread: {e}"),
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                log::warn!("telemetry accept: {e}");
                thread::sleep(Duration::from_millis(5));
            }
        }
        clients.retain(|h| !h.is_finished());
    }
    for h in clients {
        let _ = h.join();
    }
}

fn client_session(
    stream: TcpStream,
    tx: &Sender<Input>,
    stop: &AtomicBool,
    latest: &Latest,
    errors: &AtomicU64,
    period: Duration,
) -> Result<(), String> {
    stream.set_nonblocking(false).map_err(|e| e.to_string())?;
    stream
        .set_read_timeout(Some(Duration::from_secs(5)))
        .map_err(|e| e.to_string())?;
    let mut ws = tungstenite::accept(stream).map_err(|e| e.to_string())?;
    ws.get_mut()
        .set_read_timeout(Some(Duration::from_millis(2)))
        .map_err(|e| e.to_string())?;
    let mut last_sent = None;
    let mut next_send = Instant::now();
    while !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(text)) => {
                let tick = current(latest).map_or(0, |s| s.tick);
                match serde_json::from_str::<ClientMessage>(text.as_str()) {
                    Ok(msg) => forward(tx, msg, tick)?,
                    Err(e) => {
                        log::debug!("malformed message: {e}");
                        errors.fetch_add(1, Ordering::SeqCst);
                    }
                }
            }
            Ok(Message::Binary(_)) => {
                errors.fetch_add(1, Ordering::SeqCst);
            }
            Ok(Message::Close(_)) => return close(&mut ws),
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) => {}
            Err(tungstenite::Error::ConnectionClosed | tungstenite::Error::AlreadyClosed) => return Ok(()),
            Err(e) => return Err(e.to_string()),
        }
        let now = Instant::now();
        if now >= next_send {
            if let Some(state) = current(latest) {
                if last_sent != Some(state.tick) {
                    let json = serde_json::to_string(&*state).map_err(|e| e.to_string())?;
                    ws.send(Message::text(json)).map_err(|e| e.to_string())?;
                    last_sent = Some(state.tick);
                    next_send = now + period;
                }
            }
        }
    }
    close(&mut ws)
}

fn close(ws: &mut WebSocket<TcpStream>) -> Result<(), String> {
    let _ = ws.close(None);
    let _ = ws.flush();
    Ok(())
}

fn current(latest: &Latest) -> Option<Arc<StateMessage>> {
    latest.lock().unwrap_or_else(|e| e.into_inner()).clone()
}

fn forward(tx: &Sender<Input>, msg: ClientMessage, tick: u64) -> Result<(), String> {
    let input = match msg {
        ClientMessage::Stylus { pose, white, grey } => Input::Stylus {
            sample: StylusSample {
                pose,
                white_button: white,
                grey_button: grey,
                timestamp: 0.0,
            },
            tick,
        },
        ClientMessage::Params {
            module,
            translation_scale,
            rotation_scale,
        } => Input::Params(module.unwrap_or(Module::Macro), translation_scale, rotation_scale),
    };
    tx.send(input).map_err(|_| "engine stopped".to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inbound_schema() {
        let m: ClientMessage = serde_json::from_str(
            r#"{"type": "stylus", "pose": {"position": [1, 2, 3], "orientation": [1, 0, 0, 0]}, "white": true, "grey": false}"#,
        )
        .unwrap();
        assert!(matches!(m, ClientMessage::Stylus { white: true, grey: false, .. }));
        let p: ClientMessage = serde_json::from_str(r#"{"type": "params", "translation_scale": 0.5}"#).unwrap();
        assert_eq!(
            p,
            ClientMessage::Params {
                module: None,
                translation_scale: Some(0.5),
                rotation_scale: None
            }
        );
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type": "stylus", "white": true}"#).is_err());
        assert!(serde_json::from_str::<ClientMessage>(r#"{"type": "warp"}"#).is_err());
    }

    #[test]
    fn outbound_schema_round_trips() {
        let state = StateMessage {
            t: 0.25,
            tick: 25,
            stylus: Pose::from_translation(1.0, 2.0, 3.0),
            flange_pose: Pose::identity(),
            tip_pose: Pose::from_translation(0.0, 0.0, 270.0),
            macro_joints: [0.0; 6],
            snake_config: [0.0, 0.0, 1.6, 0.8],
            pulley_angles: [0.1, -0.1, 0.2, -0.2],
            clutches: Clutches::default(),
            tracking_error_mm: ModulePair {
                macro_module: Some(0.5),
                micro_module: None,
            },
            params: ModulePair {
                macro_module: TeleopParams::default().into(),
                micro_module: TeleopParams::micro_default().into(),
            },
            input_tick: Some(24),
            errors: 0,
        };
        let json: serde_json::Value = serde_json::to_value(&state).unwrap();
        assert_eq!(json["type"], "state");
        assert_eq!(json["tracking_error_mm"]["micro"], serde_json::Value::Null);
        assert_eq!(json["tip_pose"]["orientation"], serde_json::json!([1.0, 0.0, 0.0, 0.0]));
        let back: StateMessage = serde_json::from_value(json).unwrap();
        assert_eq!(back, state);
    }
}

use std::net::TcpStream;
use std::time::{Duration, Instant};

use macromicro_core::Pose;
use macromicro_sim::live::{serve_live, ClientMessage, LiveHandle, StateMessage};
use macromicro_sim::{InitialState, SimConfig};
use tungstenite::{Message, WebSocket};

type Client = WebSocket<TcpStream>;

fn start() -> LiveHandle {
    serve_live(SimConfig::default(), InitialState::default(), "127.0.0.1:0", None).unwrap()
}

fn connect(handle: &LiveHandle) -> Client {
    let addr = handle.telemetry_addr();
    let stream = TcpStream::connect(addr).unwrap();
    let (ws, _) = tungstenite::client(format!("ws://{addr}/"), stream).unwrap();
    ws.get_ref().set_read_timeout(Some(Duration::from_secs(2))).unwrap();
    ws
}

fn next_state(ws: &mut Client) -> StateMessage {
    loop {
        match ws.read().unwrap() {
            Message::Text(t) => return serde_json::from_str(t.as_str()).unwrap(),
            _ => continue,
        }
    }
}

fn wait_for(ws: &mut Client, what: &str, pred: impl Fn(&StateMessage) -> bool) -> StateMessage {
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let s = next_state(ws);
        if pred(&s) {
            return s;
        }
        assert!(Instant::now() < deadline, "timed out waiting for {what}");
    }
}

fn stylus(ws: &mut Client, x: f64, white: bool, grey: bool) {
    let msg = ClientMessage::Stylus {
        pose: Pose::from_translation(x, 0.0, 0.0),
        white,
        grey,
    };
    ws.send(Message::text(serde_json::to_string(&msg).unwrap())).unwrap();
}

#[test]
fn engaged_motion_shows_within_two_ticks() {
    let handle = start();
    let mut ws = connect(&handle);
    let home = next_state(&mut ws).flange_pose;
    stylus(&mut ws, 0.0, true, false);
    stylus(&mut ws, 0.0, false, false);
    wait_for(&mut ws, "engagement", |s| s.clutches.macro_engaged);
    let before = handle.snapshot().unwrap().input_tick;
    stylus(&mut ws, 5.0, false, false);
    // telemetry is sent slower than the control rate, so watch every tick
    let deadline = Instant::now() + Duration::from_secs(5);
    let moved = loop {
        let s = handle.snapshot().unwrap();
        if s.input_tick != before && (s.flange_pose.translation - home.translation).norm() > 1.0 {
            break s;
        }
        assert!(Instant::now() < deadline, "no motion");
        std::thread::sleep(Duration::from_micros(200));
    };
    let input = moved.input_tick.unwrap();
    assert!(moved.tick - input <= 2, "input at {input}, visible at {}", moved.tick);
    assert!((moved.flange_pose.translation - home.translation).norm() < 5.1);
}

#[test]
fn disconnect_releases_both_clutches() {
    let handle = start();
    let mut ws = connect(&handle);
    stylus(&mut ws, 0.0, true, true);
    stylus(&mut ws, 0.0, false, false);
    wait_for(&mut ws, "engagement", |s| s.clutches.macro_engaged && s.clutches.micro_engaged);
    drop(ws);
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        if let Some(s) = handle.snapshot() {
            if !s.clutches.macro_engaged && !s.clutches.micro_engaged {
                break;
            }
        }
        assert!(Instant::now() < deadline, "clutches still engaged");
        std::thread::sleep(Duration::from_millis(10));
    }
    // a new operator starts disengaged
    let mut ws = connect(&handle);
    let s = next_state(&mut ws);
    assert!(!s.clutches.macro_engaged && !s.clutches.micro_engaged);
}

#[test]
fn malformed_messages_are_counted_not_fatal() {
    let handle = start();
    let mut ws = connect(&handle);
    ws.send(Message::text("{not json")).unwrap();
    ws.send(Message::text(r#"{"type": "stylus", "pose": 3}"#)).unwrap();
    wait_for(&mut ws, "error count", |s| s.errors == 2);
    ws.send(Message::text(r#"{"type": "params", "translation_scale": 0.25}"#)).unwrap();
    let s = wait_for(&mut ws, "params", |s| s.params.macro_module.translation_scale == 0.25);
    assert_eq!(s.errors, 2);
}

#[test]
fn state_rate_is_at_least_twenty_hertz() {
    let handle = start();
    let mut ws = connect(&handle);
    next_state(&mut ws);
    let start = Instant::now();
    let mut n = 0;
    while start.elapsed() < Duration::from_secs(1) {
        next_state(&mut ws);
        n += 1;
    }
    let rate = n as f64 / start.elapsed().as_secs_f64();
    assert!(rate >= 20.0, "{rate} Hz");
}

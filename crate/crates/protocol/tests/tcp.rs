use std::time::{Duration, Instant};

use macromicro_protocol::*;

fn wait_for(handle: &ServerHandle, pred: impl Fn(&Snapshot) -> bool) -> Snapshot {
    let deadline = Instant::now() + Duration::from_secs(5);
    loop {
        let s = handle.snapshot();
        if pred(&s) {
            return s;
        }
        assert!(Instant::now() < deadline, "timed out, last snapshot {s:?}");
        std::thread::sleep(Duration::from_millis(2));
    }
}

#[test]
fn set_get_converges_in_simulated_time() {
    let clock = ManualClock::new();
    let server = serve("127.0.0.1:0", ServoBank::hobby(), clock.clone()).unwrap();
    let mut client = ActuatorClient::connect(server.local_addr()).unwrap();
    client.set([0.4, -0.3, 1.0, -1.2]).unwrap();
    let early = client.get().unwrap();
    assert_eq!(early, [0.0; 4]);
    clock.advance(0.01);
    let step = client.get().unwrap();
    assert!((step[0] - 0.061).abs() < 1e-12);
    clock.advance(1.0);
    assert_eq!(client.get().unwrap(), [0.4, -0.3, 1.0, -1.2]);
}

#[test]
fn malformed_line_then_valid_frames() {
    let server = serve("127.0.0.1:0", ServoBank::hobby(), ManualClock::new()).unwrap();
    let mut client = ActuatorClient::connect(server.local_addr()).unwrap();
    let reply = client.raw(b"SET 7 0.1 x 0 0\n").unwrap();
    match reply {
        Reply::Nack { seq: 0, reason } => assert!(reason.contains("byte 10"), "{reason}"),
        other => panic!("{other:?}"),
    }
    assert!(matches!(client.raw(b"\n").unwrap(), Reply::Nack { .. }));
    assert!(matches!(client.raw(b"JUMP 2\n").unwrap(), Reply::Nack { .. }));
    client.ping().unwrap();
    client.set([0.1, 0.0, 0.0, 0.0]).unwrap();
    let s = wait_for(&server, |s| s.targets[0] == 0.1);
    assert_eq!(s.targets, [0.1, 0.0, 0.0, 0.0]);
}

#[test]
fn disconnect_freezes_mid_motion() {
    let clock = ManualClock::new();
    let server = serve("127.0.0.1:0", ServoBank::hobby(), clock.clone()).unwrap();
    let mut client = ActuatorClient::connect(server.local_addr()).unwrap();
    client.set([1.0, 1.0, -1.0, 0.5]).unwrap();
    clock.advance(0.05);
    let moving = client.get().unwrap();
    assert!(moving[0] > 0.0 && moving[0] < 1.0);
    drop(client);
    let frozen = wait_for(&server, |s| !s.connected && s.frames_handled >= 2);
    assert_eq!(frozen.targets, frozen.positions);
    clock.advance(2.0);
    let mut again = ActuatorClient::connect(server.local_addr()).unwrap();
    assert_eq!(again.get().unwrap(), frozen.positions);
}

#[test]
fn highest_sequence_set_wins() {
    let server = serve("127.0.0.1:0", ServoBank::hobby(), ManualClock::new()).unwrap();
    let mut client = ActuatorClient::connect(server.local_addr()).unwrap();
    client.raw(b"SET 10 0.3 0.3 0.3 0.3\n").unwrap();
    let stale = client.raw(b"SET 9 -0.3 -0.3 -0.3 -0.3\n").unwrap();
    assert!(matches!(stale, Reply::Nack { seq: 9, .. }));
    client.raw(b"SET 12 0.2 0.1 0.0 -0.1\n").unwrap();
    client.raw(b"SET 11 0.9 0.9 0.9 0.9\n").unwrap();
    let s = wait_for(&server, |s| s.frames_handled == 4);
    assert_eq!(s.targets, [0.2, 0.1, 0.0, -0.1]);
    assert_eq!(s.last_seq, Some(12));
}

#[test]
fn rate_limit_over_controller_trace() {
    // drive the controller with jittered time and random targets
    let mut c = ServoController::new(ServoBank::hobby());
    let mut t = 0.0;
    let mut state = 0x2545_f491_4f6c_dd1du64;
    let mut rand = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    };
    c.tick(t);
    for seq in 1..20_000u64 {
        let before = c.bank().positions();
        let prev = t;
        t += 1e-4 + rand() * 0.02;
        let dt = t - prev;
        let angles = [rand() * 4.0 - 2.0, rand() * 4.0 - 2.0, rand() - 0.5, 0.0];
        c.handle_frame(&CommandFrame::Set { seq, angles }, t);
        let after = c.bank().positions();
        for k in 0..4 {
            assert!((after[k] - before[k]).abs() <= 6.1 * dt, "step {seq}");
            assert!(after[k].abs() <= std::f64::consts::FRAC_PI_2);
        }
    }
}

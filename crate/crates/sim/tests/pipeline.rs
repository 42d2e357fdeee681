use std::path::Path;

use macromicro_core::{arm_fk, snake_fk, ArmConfig, Module, SnakeConfig};
use macromicro_sim::metrics::engaged_path;
use macromicro_sim::trace::Replay;
use macromicro_sim::*;

fn scenario(name: &str) -> Scenario {
    Scenario::load(Path::new(&format!("{}/scenarios/{name}.json", env!("CARGO_MANIFEST_DIR")))).unwrap()
}

fn still() -> Scenario {
    Scenario::from_json(
        r#"{"name": "still", "duration_s": 1.0, "keyframes": [
            {"t": 0.0, "position": [0, 0, 0]},
            {"t": 0.4, "position": [30, -20, 10], "orientation": [0.9, 0.1, 0.3, 0]},
            {"t": 1.0, "position": [-5, 5, 0], "grey": false}
        ], "noise": {"position_std_mm": 0.3}}"#,
    )
    .unwrap()
}

#[test]
fn no_buttons_means_no_motion() {
    let trace = run(&still(), &SimConfig::default(), Some(3)).unwrap();
    let first = &trace.frames[0];
    for f in &trace.frames {
        assert_eq!(f.macro_joints, first.macro_joints);
        assert_eq!(f.snake_config, first.snake_config);
        assert_eq!(f.pulley_angles, first.pulley_angles);
        assert_eq!(f.tip_pose, first.tip_pose);
        assert!(f.macro_target.is_none() && f.micro_target.is_none());
    }
    assert!(trace.events.is_empty());
}

#[test]
fn square_flange_path_is_scaled_square() {
    let mut cfg = SimConfig::default();
    cfg.macro_teleop.translation_scale = 0.5;
    let trace = run(&scenario("square"), &cfg, None).unwrap();
    let start = trace.frames.iter().find(|f| f.clutches.macro_engaged).unwrap().flange_pose.translation;
    // corners of the 40 mm stylus square, reached at t = 3, 5, 7, 9
    let corners = [(3.0, [20.0, 0.0]), (5.0, [20.0, 20.0]), (7.0, [0.0, 20.0]), (9.0, [0.0, 0.0])];
    for (t, [dx, dy]) in corners {
        let f = trace.frames.iter().find(|f| (f.t - t).abs() < 1e-9).unwrap();
        let want = start + nalgebra::Vector3::new(dx, dy, 0.0);
        assert!((f.flange_pose.translation - want).norm() < 0.01, "t={t}");
    }
    // every engaged frame lies on the scaled square's boundary
    for f in trace.frames.iter().filter(|f| f.clutches.macro_engaged) {
        let d = f.flange_pose.translation - start;
        let on_edge = [d.x.abs(), (d.x - 20.0).abs(), d.y.abs(), (d.y - 20.0).abs()]
            .iter()
            .any(|e| *e < 0.01);
        assert!(on_edge && d.z.abs() < 0.01, "t={} d={d:?}", f.t);
        assert!((-0.01..=20.01).contains(&d.x) && (-0.01..=20.01).contains(&d.y));
    }
}

#[test]
fn identical_inputs_give_identical_bytes() {
    let s = still();
    let cfg = SimConfig::default();
    let a = run(&s, &cfg, Some(9)).unwrap().to_bytes();
    let b = run(&s, &cfg, Some(9)).unwrap().to_bytes();
    assert_eq!(a, b);
    let c = run(&s, &cfg, Some(10)).unwrap().to_bytes();
    assert_ne!(a, c);
}

#[test]
fn tip_pose_matches_recomputed_composition() {
    let trace = run(&scenario("dual"), &SimConfig::default(), None).unwrap();
    let cfg = &trace.header.config;
    for f in &trace.frames {
        let flange = arm_fk(&cfg.arm, &ArmConfig::new(f.macro_joints));
        assert!(flange.position_distance(&f.flange_pose) < 1e-9);
        let snake = snake_fk(&cfg.snake, &SnakeConfig { theta: f.snake_config }).unwrap();
        let tip = f.flange_pose.compose(&cfg.flange_offset).compose(&snake);
        assert!(tip.position_distance(&f.tip_pose) < 1e-9, "tick {}", f.tick);
        assert!(tip.rotation_distance(&f.tip_pose) < 1e-9);
    }
}

#[test]
fn save_then_replay_is_identical() {
    let trace = run(&scenario("dual"), &SimConfig::default(), None).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("t.ndjson");
    trace.save(&path).unwrap();
    let back = Trace::load(&path).unwrap().unwrap();
    assert_eq!(back, trace);
    assert_eq!(back.to_bytes(), std::fs::read(&path).unwrap());
}

#[test]
fn truncated_trace_fails_at_first_bad_frame() {
    let bytes = run(&still(), &SimConfig::default(), None).unwrap().to_bytes();
    let text = String::from_utf8(bytes).unwrap();
    // header plus 5 whole frames plus half of the sixth
    let lines: Vec<&str> = text.lines().collect();
    let mut cut = lines[..6].join("\n");
    cut.push('\n');
    cut.push_str(&lines[6][..lines[6].len() / 2]);
    let mut ok = 0;
    let mut err = None;
    for f in Replay::new(cut.as_bytes()).unwrap() {
        match f {
            Ok(_) => ok += 1,
            Err(e) => {
                err = Some(e);
                break;
            }
        }
    }
    assert_eq!(ok, 5);
    match err.unwrap() {
        SimError::Trace { frame, .. } => assert_eq!(frame, Some(5)),
        other => panic!("{other:?}"),
    }
    // corrupting a middle frame is caught at that frame
    let mut bad: Vec<String> = lines.iter().map(|s| s.to_string()).collect();
    bad[3] = bad[3].replace("\"tick\"", "\"tock\"");
    let joined = bad.join("\n") + "\n";
    let results: Vec<_> = Replay::new(joined.as_bytes()).unwrap().collect();
    assert_eq!(results.len(), 3);
    assert!(matches!(results[2], Err(SimError::Trace { frame: Some(2), .. })));
}

#[test]
fn empty_trace_is_an_empty_stream() {
    let mut r = Replay::new(&b""[..]).unwrap();
    assert!(r.next().is_none());
    assert!(Trace::read(&b""[..]).unwrap().is_none());
    assert!(Replay::new(&b"{\"type\":\"summary\",\"ticks\":0,\"stylus_samples\":0,\"frames\":0,\"events\":0}\n"[..]).is_err());
}

#[test]
fn zero_motion_evaluates_to_zero() {
    let s = Scenario::from_json(
        r#"{"name": "hold", "duration_s": 1.0, "keyframes": [
            {"t": 0.0, "position": [5, 5, 5]},
            {"t": 0.1, "position": [5, 5, 5], "white": true, "grey": true},
            {"t": 0.2, "position": [5, 5, 5]}
        ]}"#,
    )
    .unwrap();
    let trace = run(&s, &SimConfig::default(), None).unwrap();
    for m in [Module::Macro, Module::Micro] {
        let r = evaluate(&trace, m).unwrap();
        assert_eq!(r.rms_position_error_mm, 0.0, "{m:?}");
        assert_eq!(r.max_position_error_mm, 0.0);
        assert_eq!(r.discrete_frechet_mm, 0.0);
        assert_eq!(r.intervals, 1);
    }
}

#[test]
fn exact_tracking_evaluates_to_zero() {
    let mut trace = run(&scenario("square"), &SimConfig::default(), None).unwrap();
    let path = engaged_path(&trace, Module::Macro).unwrap();
    let mut it = path.iter();
    for f in trace.frames.iter_mut().filter(|f| f.macro_refs.is_some()) {
        f.flange_pose.translation = it.next().unwrap().expected;
    }
    let r = evaluate(&trace, Module::Macro).unwrap();
    assert_eq!(r.rms_position_error_mm, 0.0);
    assert_eq!(r.discrete_frechet_mm, 0.0);
    assert!(r.max_position_error_mm >= r.rms_position_error_mm);
}

#[test]
fn evaluate_without_engagement_is_an_error() {
    let trace = run(&still(), &SimConfig::default(), None).unwrap();
    assert!(matches!(evaluate(&trace, Module::Macro), Err(SimError::Report(_))));
}

#[test]
fn forty_hertz_recorder_decimates_exactly() {
    let cfg = SimConfig {
        rates: RateConfig::new(1000, 100, 40),
        ..SimConfig::default()
    };
    let trace = run(&scenario("square"), &cfg, None).unwrap();
    let s = trace.summary.unwrap();
    assert_eq!(s.ticks, 1001);
    assert_eq!(s.stylus_samples, 10001);
    assert_eq!(s.frames, 401);
    assert_eq!(trace.frames.len(), 401);
    for w in trace.frames.windows(2) {
        let gap = w[1].tick - w[0].tick;
        assert!(gap == 2 || gap == 3);
    }
}

#[test]
fn micro_tracking_ignores_macro_motion() {
    let cfg = SimConfig::default();
    let dual = run(&scenario("dual"), &cfg, None).unwrap();
    let micro = run(&scenario("micro"), &cfg, None).unwrap();
    let a = evaluate(&dual, Module::Micro).unwrap();
    let b = evaluate(&micro, Module::Micro).unwrap();
    assert!(evaluate(&micro, Module::Macro).is_err());
    assert!((a.rms_position_error_mm - b.rms_position_error_mm).abs() < 1e-9);
    assert!(a.rms_position_error_mm < 0.05, "{a:?}");
    // the arm really moved in the dual run
    let flange: Vec<_> = dual.frames.iter().map(|f| f.flange_pose.translation).collect();
    let spread = flange.iter().map(|p| (p - flange[0]).norm()).fold(0.0, f64::max);
    assert!(spread > 10.0);
}

#[test]
fn unreachable_macro_target_holds_and_logs() {
    let s = Scenario::from_json(
        r#"{"name": "far", "duration_s": 1.0, "keyframes": [
            {"t": 0.0, "position": [0, 0, 0]},
            {"t": 0.05, "position": [0, 0, 0], "white": true},
            {"t": 0.1, "position": [0, 0, 0]},
            {"t": 0.2, "position": [3000, 0, 0]}
        ]}"#,
    )
    .unwrap();
    let trace = run(&s, &SimConfig::default(), None).unwrap();
    assert!(!trace.events.is_empty());
    assert!(trace.events.iter().all(|e| e.module == Module::Macro));
    let last = trace.frames.last().unwrap();
    let held = trace.frames.iter().find(|f| f.tick == trace.events[0].tick).unwrap();
    assert_eq!(last.macro_joints, held.macro_joints);
    assert_eq!(trace.summary.unwrap().ticks, 101);
}

#[test]
fn bundled_square_reproduces_checked_in_report() {
    let trace = run(&scenario("square"), &SimConfig::default(), None).unwrap();
    let report = evaluate(&trace, Module::Macro).unwrap();
    let golden: TrackingReport = serde_json::from_str(
        &std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/square.report.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(report.frames, golden.frames);
    assert_eq!(report.expected_samples, golden.expected_samples);
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-9;
    assert!(close(report.rms_position_error_mm, golden.rms_position_error_mm));
    assert!(close(report.max_position_error_mm, golden.max_position_error_mm));
    assert!(close(report.discrete_frechet_mm, golden.discrete_frechet_mm));
}

#[test]
fn bundled_config_is_the_default() {
    let cfg = SimConfig::load(Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/config/default.json"))).unwrap();
    assert_eq!(cfg, SimConfig::default());
}

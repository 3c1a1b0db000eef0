use super::*;
use crate::estimator::{EstimatedState, Status};
use crate::planner::PathStatus;

fn est(stamp: f64) -> EstimatedState {
    EstimatedState {
        stamp,
        position: [0.0; 3],
        rpy: [0.0; 3],
        velocity: [0.0; 3],
        angular_velocity: [0.0; 3],
        slip_angle_front: 0.0,
        slip_angle_rear: 0.0,
        trust: 1.0,
        status: Status::Ok,
    }
}

fn line_path(stamp: f64, v: f64, slope: f64) -> LocalPath {
    let points = (0..=50)
        .map(|k| {
            let x = k as f64 * 2.5;
            PathPoint { x, y: slope * x, heading: slope.atan(), v, t: k as f64 * 0.05, s: x }
        })
        .collect();
    LocalPath { stamp, current_state: est(stamp), points, status: PathStatus::Nominal }
}

fn inputs(now: f64, path: &LocalPath, v_car: f64) -> ControlInputs<'_> {
    ControlInputs {
        now,
        path: Some(path),
        localization_stamp: Some(now),
        v_car,
        rpm: 3000.0,
        gear: 3,
        joystick: None,
        throttle_lockout: false,
    }
}

#[test]
fn deadband_gives_engine_braking() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    assert_eq!(c.longitudinal(50.1, 50.0, 0.02), (0.0, 0.0));
    assert_eq!(c.longitudinal(49.7, 50.0, 0.02), (0.0, 0.0));
}

#[test]
fn throttle_saturates_on_fresh_pid() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let (t, b) = c.longitudinal(52.5, 50.0, 0.02);
    assert_eq!((t, b), (55.0, 0.0));
}

#[test]
fn brake_matches_pid_arithmetic() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let (t, b) = c.longitudinal(45.0, 50.0, 0.02);
    // fresh derivative state: raw rate 5/0.02 through the 0.05 s low-pass
    let d = (5.0 / 0.02) * 0.02 / (0.05 + 0.02);
    let expected = 300.0 * 5.0 + 2.0 * d;
    assert_eq!(t, 0.0);
    assert!((b - expected).abs() < 1e-9, "{b} vs {expected}");
}

#[test]
fn integral_is_clamped() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    for _ in 0..1000 {
        c.longitudinal(60.0, 50.0, 0.02);
        assert!(c.throttle_pid().integral.abs() <= 0.5);
    }
    assert_eq!(c.throttle_pid().integral, 0.5);
}

#[test]
fn lookahead_examples() {
    let p = ControlParams::default();
    assert_eq!(adaptive_lookahead(0.0, &p), 15.0);
    assert_eq!(adaptive_lookahead(50.0, &p), 27.0);
    assert_eq!(adaptive_lookahead(12.0 / 0.63, &p), 27.0);
}

#[test]
fn pursuit_formula_example() {
    let p = ControlParams::default();
    let angle = 1.0f64.atan2(10.0);
    assert!((angle - 0.0996687).abs() < 1e-7);
    let d = pursuit_road_wheel(angle, 15.0, &p);
    assert!((d - 0.0394).abs() < 5e-5, "{d}");
    let hw = hand_wheel_deg(d, &p);
    assert!((hw.to_radians() - 0.5911).abs() < 5e-4, "{hw}");
    assert!((hw - 33.87).abs() < 0.01);
}

#[test]
fn steering_limits_hold() {
    let p = ControlParams::default();
    let d = pursuit_road_wheel(1.5, 15.0, &p);
    assert_eq!(d, p.max_road_wheel());
    assert_eq!(hand_wheel_deg(d, &p), 230.0);
    assert_eq!(hand_wheel_deg(-10.0, &p), -230.0);
}

#[test]
fn straight_path_gives_zero_steer_and_mirror_negates() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let path = line_path(1.0, 50.0, 0.0);
    assert_eq!(c.cycle(&inputs(1.0, &path, 50.0)).steering, 0.0);
    let left = line_path(1.0, 50.0, 0.05);
    let mut right = left.clone();
    for p in &mut right.points {
        p.y = -p.y;
        p.heading = -p.heading;
    }
    let mut c1 = Controller::new(ControlParams::default(), 3).unwrap();
    let mut c2 = Controller::new(ControlParams::default(), 3).unwrap();
    let a = c1.cycle(&inputs(1.0, &left, 30.0)).steering;
    let b = c2.cycle(&inputs(1.0, &right, 30.0)).steering;
    assert!(a > 0.0);
    assert_eq!(a, -b);
}

#[test]
fn lookahead_point_lies_on_circle() {
    let path = line_path(0.0, 10.0, 0.3);
    let (x, y) = find_lookahead_point(&path.points, 20.0).unwrap();
    assert!((x.hypot(y) - 20.0).abs() < 1e-9);
    assert!((y - 0.3 * x).abs() < 1e-12);
    assert!(find_lookahead_point(&path.points[..3], 20.0).is_none());
}

#[test]
fn short_path_falls_back_to_last_point() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let mut path = line_path(1.0, 0.0, 0.1);
    path.points.truncate(3);
    let out = c.cycle(&inputs(1.0, &path, 0.0));
    assert!(out.short_path);
    assert!(out.steering > 0.0);
}

#[test]
fn old_path_triggers_failsafe() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let path = line_path(1.0, 50.0, 0.05);
    let steer = c.cycle(&inputs(1.0, &path, 30.0)).steering;
    let out = c.cycle(&inputs(1.3, &path, 30.0));
    assert_eq!(out.source, Source::Failsafe);
    assert_eq!((out.throttle, out.brake, out.steering), (0.0, 1800.0, steer));
    let mut inp = inputs(1.32, &path, 30.0);
    inp.path = None;
    assert_eq!(c.cycle(&inp).source, Source::Failsafe);
    let fresh = line_path(1.34, 50.0, 0.05);
    let mut inp = inputs(1.34, &fresh, 30.0);
    inp.localization_stamp = Some(1.0);
    assert_eq!(c.cycle(&inp).source, Source::Failsafe);
}

#[test]
fn joystick_override_passes_brake_and_steering() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let path = line_path(1.0, 50.0, 0.0);
    let mut inp = inputs(1.0, &path, 30.0);
    inp.joystick = Some(JoystickCmd { override_active: true, steering: -12.0, brake: 500.0, stamp: 0.9 });
    let out = c.cycle(&inp);
    assert_eq!(out.source, Source::Joystick);
    assert_eq!((out.throttle, out.brake, out.steering), (0.0, 500.0, -12.0));
    inp.now = 7.0;
    inp.localization_stamp = Some(7.0);
    assert_eq!(c.cycle(&inp).source, Source::Failsafe);
}

#[test]
fn lockout_zeroes_throttle() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let path = line_path(1.0, 50.0, 0.0);
    let mut inp = inputs(1.0, &path, 40.0);
    inp.throttle_lockout = true;
    let out = c.cycle(&inp);
    assert_eq!((out.throttle, out.brake), (0.0, 0.0));
}

#[test]
fn gear_table_examples() {
    let p = ControlParams::default();
    assert_eq!(gear_logic(4100.0, 1, &p), 2);
    assert_eq!(gear_logic(2150.0, 4, &p), 3);
    assert_eq!(gear_logic(9000.0, 6, &p), 6);
    assert_eq!(gear_logic(500.0, 1, &p), 1);
}

#[test]
fn shift_hold_blocks_second_shift() {
    let mut c = Controller::new(ControlParams::default(), 1).unwrap();
    assert_eq!(c.gear(0.0, 4100.0, 1), 2);
    // still in first per the gearbox, but within the hold
    assert_eq!(c.gear(0.2, 4100.0, 1), 2);
    assert_eq!(c.gear(0.48, 6000.0, 1), 2);
    assert_eq!(c.gear(0.5, 4300.0, 2), 3);
}

#[test]
fn counter_advances_and_wraps() {
    let mut c = Controller::new(ControlParams::default(), 3).unwrap();
    let path = line_path(1.0, 50.0, 0.0);
    let out = c.cycle(&inputs(1.0, &path, 50.0));
    let mut last = 0;
    for i in 0..300 {
        let cmd = c.command(&out);
        if i > 0 {
            assert!(crate::plant::counter_advanced(last, cmd.rolling_counter));
        }
        last = cmd.rolling_counter;
    }
}

#[test]
fn bad_params_rejected() {
    let p = ControlParams { lookahead_min: 30.0, ..ControlParams::default() };
    assert!(Controller::new(p, 1).is_err());
    let p = ControlParams { shift_up: [4000.0, 3000.0, 4300.0, 4400.0, 4500.0], ..ControlParams::default() };
    assert!(p.validate().is_err());
}

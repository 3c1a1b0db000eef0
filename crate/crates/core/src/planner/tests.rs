use super::*;
use crate::track::{BankingMap, Sample};

fn straight(v: f64) -> Raceline {
    let s: Vec<Sample> = (0..=40).map(|i| Sample { x: i as f64 * 10.0, y: 0.0, v_ref: v }).collect();
    Raceline::fit(s, false, BankingMap::flat()).unwrap()
}

fn circle(r: f64, v: f64) -> Raceline {
    let n = 200;
    let s: Vec<Sample> = (0..n)
        .map(|i| {
            let a = std::f64::consts::TAU * i as f64 / n as f64;
            Sample { x: r * a.cos(), y: r * a.sin(), v_ref: v }
        })
        .collect();
    Raceline::fit(s, true, BankingMap::flat()).unwrap()
}

/// Leg along y = -10 heading -x, half circle round the origin side, leg
/// back along y = +10.
fn hairpin() -> Raceline {
    let mut s = Vec::new();
    for i in 0..=10 {
        s.push(Sample { x: 50.0 - 5.0 * i as f64, y: -10.0, v_ref: 20.0 });
    }
    for i in 1..12 {
        let a = -std::f64::consts::FRAC_PI_2 - std::f64::consts::PI * i as f64 / 12.0;
        s.push(Sample { x: 10.0 * a.cos(), y: 10.0 * a.sin(), v_ref: 20.0 });
    }
    for i in 0..=10 {
        s.push(Sample { x: 5.0 * i as f64, y: 10.0, v_ref: 20.0 });
    }
    Raceline::fit(s, false, BankingMap::flat()).unwrap()
}

fn est_at(x: f64, y: f64, yaw: f64, v: f64, stamp: f64) -> EstimatedState {
    EstimatedState {
        stamp,
        position: [x, y, 0.0],
        rpy: [0.0, 0.0, yaw],
        velocity: [v * yaw.cos(), v * yaw.sin(), 0.0],
        angular_velocity: [0.0; 3],
        slip_angle_front: 0.0,
        slip_angle_rear: 0.0,
        trust: 1.0,
        status: Status::Ok,
    }
}

fn flags(v_max: f64, stamp: f64) -> FlagState {
    FlagState { v_max_remote: v_max, last_remote_stamp: Some(stamp), ..FlagState::default() }
}

#[test]
fn nearest_on_straight_is_projection() {
    let (s, fb) = nearest_point(&straight(50.0), (5.3, 2.0), 0.0, &PlannerConfig::default());
    assert!(!fb);
    assert!((s - 5.3).abs() < 1e-6, "{s}");
}

#[test]
fn nearest_on_circle_is_radial() {
    let rl = circle(49.0, 20.0);
    let cfg = PlannerConfig::default();
    for th in [0.3f64, 1.7, 3.0, 5.9] {
        let (s, _) = nearest_point(&rl, (51.0 * th.cos(), 51.0 * th.sin()), 49.0 * th - 5.0, &cfg);
        assert!((s - 49.0 * th).abs() < 1e-3, "θ {th}: {s}");
    }
}

#[test]
fn equidistant_pose_keeps_warm_lobe() {
    let rl = hairpin();
    let cfg = PlannerConfig::default();
    let (s1, _) = nearest_point(&rl, (30.0, 0.0), 15.0, &cfg);
    let (s2, _) = nearest_point(&rl, (30.0, 0.0), rl.length() - 15.0, &cfg);
    assert!((rl.position(s1).y + 10.0).abs() < 1e-3);
    assert!((rl.position(s2).y - 10.0).abs() < 1e-3);
    assert!((rl.position(s1).x - 30.0).abs() < 1e-3 && (rl.position(s2).x - 30.0).abs() < 1e-3);
}

#[test]
fn path_spacing_follows_speed() {
    let cfg = PlannerConfig::default();
    let pts = build_path(&straight(50.0), 10.0, 56.0, None, &cfg);
    assert_eq!(pts.len(), 51);
    for w in pts.windows(2) {
        assert!((w[1].x - w[0].x - 2.5).abs() < 1e-6);
        assert!((w[1].t - w[0].t - 0.05).abs() < 1e-12);
        assert_eq!(w[0].v, 50.0);
    }
}

#[test]
fn yellow_cap_limits_path() {
    let cfg = PlannerConfig::default();
    let mut f = flags(60.0, 0.0);
    assert_eq!(resolve_caps(&f, 1.0, &cfg), 60.0);
    f.track_flag = TrackFlag::Yellow;
    let cap = resolve_caps(&f, 1.0, &cfg);
    assert_eq!(cap, YELLOW_CAP);
    let pts = build_path(&straight(50.0), 0.0, cap, None, &cfg);
    assert!(pts.iter().all(|p| p.v == YELLOW_CAP));
}

#[test]
fn stale_remote_means_stop() {
    let cfg = PlannerConfig::default();
    assert_eq!(resolve_caps(&flags(60.0, 0.0), 6.0, &cfg), 0.0);
    assert_eq!(resolve_caps(&FlagState::default(), 0.0, &cfg), 0.0);
    let f = FlagState { veh_flag: VehFlag::Black, ..flags(60.0, 0.0) };
    assert_eq!(resolve_caps(&f, 0.1, &cfg), 0.0);
}

#[test]
fn stop_ramp_steps_down() {
    let cfg = PlannerConfig::default();
    let pts = build_path(&straight(60.0), 0.0, 0.0, Some(50.0), &cfg);
    let want = [50.0, 49.5, 49.0, 48.5];
    for (p, w) in pts.iter().zip(want) {
        assert!((p.v - w).abs() < 1e-12);
    }
    let slow = build_path(&straight(60.0), 0.0, 0.0, Some(1.0), &cfg);
    assert!(slow.iter().skip(2).all(|p| p.v == 0.0));
}

#[test]
fn local_transform_examples() {
    let p = |x, y| PathPoint { x, y, heading: 0.0, v: 1.0, t: 0.0, s: 0.0 };
    let id = global_to_local(&[p(3.0, 4.0)], (0.0, 0.0, 0.0));
    assert_eq!((id[0].x, id[0].y), (3.0, 4.0));
    let o = global_to_local(&[p(1.0, 0.0)], (1.0, 0.0, 0.0));
    assert_eq!((o[0].x, o[0].y), (0.0, 0.0));
    let r = global_to_local(&[p(2.0, 0.0)], (1.0, 0.0, std::f64::consts::FRAC_PI_2));
    assert!(r[0].x.abs() < 1e-12 && (r[0].y + 1.0).abs() < 1e-12);
    assert!((r[0].heading + std::f64::consts::FRAC_PI_2).abs() < 1e-12);
}

#[test]
fn cycle_publishes_capped_local_path() {
    let mut pl = Planner::new(PlannerConfig::default(), vec![straight(50.0)]).unwrap();
    let est = est_at(20.0, 0.5, 0.0, 40.0, 1.0);
    let out = pl.cycle(1.0, &est, &flags(45.0, 0.9), false);
    assert_eq!(out.path.status, PathStatus::Nominal);
    assert!((out.s_star - 20.0).abs() < 1e-6);
    assert!((out.cross_track - 0.5).abs() < 1e-6);
    assert!(out.path.points.iter().all(|p| p.v == 45.0));
    assert!((out.path.points[0].y + 0.5).abs() < 1e-6);
}

#[test]
fn stale_localization_ramps_down() {
    let mut pl = Planner::new(PlannerConfig::default(), vec![straight(50.0)]).unwrap();
    let est = est_at(20.0, 0.0, 0.0, 40.0, 1.0);
    let out = pl.cycle(1.3, &est, &flags(45.0, 1.25), false);
    assert_eq!(out.path.status, PathStatus::Stopping);
    assert!((out.path.points[1].v - 39.5).abs() < 1e-12);
    // the ramp continues in time rather than restarting from the car speed
    let out = pl.cycle(1.5, &est_at(25.0, 0.0, 0.0, 40.0, 1.0), &flags(45.0, 1.45), false);
    assert!((out.path.points[0].v - 38.0).abs() < 1e-12);
}

#[test]
fn raceline_switch_waits_for_proximity() {
    let a = straight(50.0);
    let shifted: Vec<Sample> = (0..=40).map(|i| Sample { x: i as f64 * 10.0, y: 5.0, v_ref: 30.0 }).collect();
    let b = Raceline::fit(shifted, false, BankingMap::flat()).unwrap();
    let mut pl = Planner::new(PlannerConfig::default(), vec![a, b]).unwrap();
    let f = FlagState { active_raceline: 1, ..flags(60.0, 0.0) };
    let out = pl.cycle(0.02, &est_at(50.0, 0.0, 0.0, 30.0, 0.02), &f, false);
    assert_eq!(out.raceline, 0);
    let out = pl.cycle(0.04, &est_at(51.0, 3.5, 0.0, 30.0, 0.04), &f, false);
    assert_eq!(out.raceline, 1);
    assert!(out.path.points.iter().all(|p| p.v == 30.0));
}

#[test]
fn config_validation() {
    assert!(PlannerConfig::default().validate().is_ok());
    assert!(PlannerConfig { path_duration: 2.52, ..PlannerConfig::default() }.validate().is_err());
    assert!(PlannerConfig { path_step: 0.0, ..PlannerConfig::default() }.validate().is_err());
}

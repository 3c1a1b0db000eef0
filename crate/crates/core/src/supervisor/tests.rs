use super::*;
use crate::plant::{Plant, VehicleParams};

fn plant_state(v: f64) -> PlantState {
    *Plant::driving_at(VehicleParams::default(), 0.0, 0.0, 0.0, v).unwrap().state()
}

fn cmd(steering: f64, throttle: f64, brake: f64) -> ActuationCommand {
    ActuationCommand { throttle, brake, steering, gear: 6, rolling_counter: 0 }
}

#[test]
fn heartbeats() {
    let mut sup = Supervisor::new(SupervisorConfig::default(), 0.0);
    for m in ["estimator", "planner", "controller"] {
        sup.beat(m, 1.0);
    }
    assert_eq!(sup.registry.check(1.1, 0.0).action, Action::None);
    let mut r = sup.registry.clone();
    r.beat("estimator", 1.3);
    r.beat("controller", 1.3);
    let v = r.check(1.3, 0.0);
    assert_eq!(v.action, Action::ControlledStop);
    assert!(v.cause.contains("planner"));
    let mut r = sup.registry.clone();
    r.beat("planner", 1.3);
    r.beat("controller", 1.3);
    let v = r.check(1.3, 0.0);
    assert_eq!(v.action, Action::EmergencyStop);
    assert!(v.cause.contains("estimator"));
    // both silent: emergency dominates
    assert_eq!(sup.registry.check(1.3, 0.0).action, Action::EmergencyStop);
}

#[test]
fn timeout_must_cover_two_periods() {
    let mut r = HeartbeatRegistry::default();
    assert!(r.register("x", 0.1, 0.15, Criticality::Emergency).is_err());
    assert!(r.register("x", 0.1, 0.2, Criticality::Emergency).is_ok());
}

#[test]
fn cross_track_limits() {
    assert_eq!(check_cross_track(0.8, 3.5, 0.0).action, Action::None);
    assert_eq!(check_cross_track(3.6, 3.5, 0.0).action, Action::ControlledStop);
    assert_eq!(check_cross_track(-3.6, 3.5, 0.0).action, Action::ControlledStop);
    assert_eq!(check_cross_track(f64::NAN, 3.5, 0.0).action, Action::EmergencyStop);
}

#[test]
fn echo_tolerates_lag_and_transients() {
    let mut e = EchoValidator::new(&SupervisorConfig::default());
    let mut p = Plant::driving_at(VehicleParams::default(), 0.0, 0.0, 0.0, 30.0).unwrap();
    for k in 0..200 {
        // sweep ±20° at 0.5 Hz
        let c = ActuationCommand {
            rolling_counter: k as u8,
            ..cmd(20.0 * (k as f64 * 0.02 * std::f64::consts::PI).sin(), 10.0, 0.0)
        };
        p.apply_command(&c);
        for _ in 0..20 {
            p.step(0.001, 0.0).unwrap();
        }
        assert_eq!(e.validate(&c, p.state()), Ok(()), "cycle {k}");
    }
    // one bad cycle is forgiven
    let mut s = *p.state();
    s.steering_deg += 50.0;
    assert_eq!(e.validate(&cmd(0.0, 10.0, 0.0), &s), Ok(()));
}

#[test]
fn stuck_steering_is_flagged() {
    let mut e = EchoValidator::new(&SupervisorConfig::default());
    let mut p = Plant::driving_at(VehicleParams::default(), 0.0, 0.0, 0.0, 30.0).unwrap();
    p.set_actuator_fault(Channel::Steering, Some(crate::plant::ActuatorFault::Stuck));
    let mut result = Ok(());
    for k in 0..100 {
        let c = ActuationCommand {
            rolling_counter: k as u8,
            ..cmd(20.0 * (k as f64 * 0.02 * std::f64::consts::PI).sin(), 10.0, 0.0)
        };
        p.apply_command(&c);
        for _ in 0..20 {
            p.step(0.001, 0.0).unwrap();
        }
        result = result.and(e.validate(&c, p.state()));
    }
    assert_eq!(result, Err(Channel::Steering));
}

#[test]
fn directives_per_action() {
    assert_eq!(orchestrate_stop(Action::None), Directives::default());
    let c = orchestrate_stop(Action::ControlledStop);
    assert!(c.planner_stop && c.plant_controlled_stop && !c.plant_emergency);
    assert!(orchestrate_stop(Action::EmergencyStop).plant_emergency);
}

#[test]
fn latches_and_logs_once() {
    let mut sup = Supervisor::new(SupervisorConfig::default(), 0.0);
    let ps = plant_state(40.0);
    let mut t = 0.0;
    let step = |sup: &mut Supervisor, ct: f64, t: f64| {
        for m in ["estimator", "planner", "controller"] {
            sup.beat(m, t);
        }
        sup.cycle(&SupervisorInputs { now: t, estimate: None, cross_track: Some(ct), command: None, plant: &ps })
    };
    for _ in 0..10 {
        t += 0.02;
        assert_eq!(step(&mut sup, 0.5, t).0.action, Action::None);
    }
    for k in 0..5 {
        t += 0.02;
        let (_, d) = step(&mut sup, 4.0 + 0.3 * k as f64, t);
        assert!(d.planner_stop);
    }
    // back inside the limit: the stop stays latched
    t += 0.02;
    assert!(step(&mut sup, 0.1, t).1.planner_stop);
    assert_eq!(sup.log().len(), 1);
    assert_eq!(sup.log()[0].action, Action::ControlledStop);
    t += 0.02;
    step(&mut sup, f64::NAN, t);
    assert_eq!(sup.latched(), Action::EmergencyStop);
    t += 0.02;
    assert_eq!(step(&mut sup, 0.0, t).1, orchestrate_stop(Action::EmergencyStop));
    assert_eq!(sup.log().len(), 2);
}

#[test]
fn slow_controlled_stop_escalates() {
    let mut sup = Supervisor::new(SupervisorConfig::default(), 0.0);
    let ps = plant_state(20.0);
    let mut t = 0.0;
    while t < 12.0 {
        t += 0.02;
        for m in ["estimator", "planner", "controller"] {
            sup.beat(m, t);
        }
        sup.cycle(&SupervisorInputs { now: t, estimate: None, cross_track: Some(5.0), command: None, plant: &ps });
    }
    assert_eq!(sup.latched(), Action::EmergencyStop);
    assert!(sup.log().iter().any(|v| v.cause.contains("did not finish")));
}

#[test]
fn failed_localization_is_emergency() {
    let mut sup = Supervisor::new(SupervisorConfig::default(), 0.0);
    let ps = plant_state(20.0);
    let est = EstimatedState {
        stamp: 0.0,
        position: [0.0; 3],
        rpy: [0.0; 3],
        velocity: [0.0; 3],
        angular_velocity: [0.0; 3],
        slip_angle_front: 0.0,
        slip_angle_rear: 0.0,
        trust: 0.0,
        status: Status::Failed,
    };
    let (v, d) =
        sup.cycle(&SupervisorInputs { now: 0.02, estimate: Some(&est), cross_track: None, command: None, plant: &ps });
    assert_eq!(v.action, Action::EmergencyStop);
    assert!(d.plant_emergency);
}

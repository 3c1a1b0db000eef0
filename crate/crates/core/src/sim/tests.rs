use super::*;
use std::path::Path;

use crate::planner::TrackFlag;
use crate::telemetry::BasestationFrame;

fn scenario(extra: &str) -> Scenario {
    let text = format!("name = \"unit\"\nseed = 7\nmax_duration = 10.0\n{extra}");
    Scenario::from_toml(&text, Path::new("unit.toml")).unwrap()
}

fn events(out: &RunOutcome) -> Vec<(f64, Event)> {
    out.records
        .iter()
        .filter(|r| r.topic == TOPIC_EVENT)
        .map(|r| (r.stamp_ns as f64 * 1e-9, decode(&r.payload).unwrap()))
        .collect()
}

fn plans(out: &RunOutcome) -> Vec<(f64, PlanRecord)> {
    out.records
        .iter()
        .filter(|r| r.topic == TOPIC_PLAN)
        .map(|r| (r.stamp_ns as f64 * 1e-9, decode(&r.payload).unwrap()))
        .collect()
}

#[test]
fn starts_and_drives_off() {
    let out = run(&scenario(""), &RunOptions::default()).unwrap();
    assert!(out.task_faults.is_empty(), "{:?}", out.task_faults);
    assert!(out.verdicts.is_empty(), "{:?}", out.verdicts);
    assert!(out.emergency.is_none());
    assert_eq!(out.final_state.lowlevel, LowLevel::Driving);
    assert!(out.final_state.speed() > 10.0, "{}", out.final_state.speed());
    // 10 Hz dashboard over 10 s
    assert_eq!(out.dashboards, 100);
    assert_eq!(out.records.iter().filter(|r| r.topic == TOPIC_DASHBOARD).count(), 100);
    assert!(out.rx.applied > 0 && out.rx.dropped == 0);
    assert!(out.expectation_met);
}

#[test]
fn same_seed_same_records() {
    let sc = Scenario { max_duration: 4.0, ..scenario("") };
    let a = run(&sc, &RunOptions::default()).unwrap();
    let b = run(&sc, &RunOptions::default()).unwrap();
    assert_eq!(a.records, b.records);
    let c = run(&Scenario { seed: 8, ..sc }, &RunOptions::default()).unwrap();
    assert_ne!(a.records, c.records);
}

#[test]
fn remote_speed_cap_applies_within_two_cycles() {
    let out = run(&scenario("[[base_station.events]]\nt = 6.0\nv_max = 12.0\n"), &RunOptions::default()).unwrap();
    let p = plans(&out);
    assert!(p.iter().any(|(t, r)| *t < 6.0 && r.v_cap > 12.0));
    for (t, r) in &p {
        if *t >= 6.0 + 2.0 * 0.02 {
            assert!(r.v_cap <= 12.0, "t = {t}: cap {}", r.v_cap);
        }
    }
}

#[test]
fn yellow_flag_from_binary_frame() {
    let out = run(&scenario("[[base_station.events]]\nt = 5.0\ntrack_flag = 1\n"), &RunOptions::default()).unwrap();
    let flags: Vec<(f64, FlagState)> = out
        .records
        .iter()
        .filter(|r| r.topic == TOPIC_FLAGS)
        .map(|r| (r.stamp_ns as f64 * 1e-9, decode(&r.payload).unwrap()))
        .collect();
    let (t, _) = flags.iter().find(|(_, f)| f.track_flag == TrackFlag::Yellow).unwrap();
    assert!(*t >= 5.0 && *t < 5.0 + 0.1, "{t}");
    // the bytes that carried it are in the log too
    assert!(out
        .records
        .iter()
        .filter(|r| r.topic == TOPIC_BASESTATION)
        .any(|r| BasestationFrame::decode(&r.payload).unwrap().track_flag == 1));
    assert!(plans(&out).iter().filter(|(pt, _)| *pt > t + 0.05).all(|(_, r)| r.v_cap <= crate::planner::YELLOW_CAP));
}

#[test]
fn frozen_counter_latches_emergency() {
    let out =
        run(&scenario("[faults]\ncounter_freeze = [[6.0, 0.5]]\n[expect]\nemergency = true\n"), &RunOptions::default())
            .unwrap();
    let (cause, t) = out.emergency.expect("emergency");
    assert_eq!(cause, EmergencyCause::CounterStale);
    // last advance was the 5.98 s command
    assert!(t > 6.08 && t < 6.09, "{t}");
    let ev = events(&out);
    let i = ev.iter().position(|(_, e)| e.source == "watchdog").unwrap();
    assert_eq!(ev[i + 1].1.source, "lowlevel");
    assert!(ev[i + 1].1.message.ends_with("Emergency"));
    assert_eq!(out.final_state.lowlevel, LowLevel::Emergency);
    assert!(out.expectation_met);
}

#[test]
fn log_matches_memory_mirror() {
    let dir = tempfile::tempdir().unwrap();
    let sc = Scenario { max_duration: 3.0, ..scenario("") };
    let out = run(&sc, &RunOptions { out_dir: Some(dir.path().to_path_buf()), realtime: None }).unwrap();
    assert!(out.log_error.is_none());
    assert!(!out.chunks.is_empty());
    let back = crate::telemetry::log::read_run(dir.path()).unwrap();
    assert!(back.gaps.is_complete(), "{}", back.gaps);
    assert_eq!(back.records, out.records);
}

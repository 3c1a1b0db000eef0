use super::frames::*;
use super::*;
use crate::planner::{TrackFlag, VehFlag};

fn hex(s: &str) -> Vec<u8> {
    (0..s.len()).step_by(2).map(|i| u8::from_str_radix(&s[i..i + 2], 16).unwrap()).collect()
}

fn sample_dashboard() -> DashboardFrame {
    DashboardFrame {
        stamp: Stamp { sec: 12, nanosec: 500_000_000 },
        cmd_gear: 3,
        actual_gear: 2,
        cmd_throttle: 55,
        actual_throttle: -1,
        cmd_brake: 1800,
        actual_brake_front: -900,
        actual_brake_rear: 450,
        cmd_steering_degree: -230,
        actual_steering_degree: 229,
        heading_error: 0.25,
        cross_track_error: -1.5,
        velocity_error: 2.0,
        target_velocity_mps: 50.0,
        actual_velocity_mps: 48.5,
        purepursuit_lookahead_distance: 30.0,
        purepursuit_lookahead_angle_rad: -0.125,
        position_x: 100.0,
        position_y: -200.5,
        position_z: 0.0,
        position_r: 0.0625,
        position_p: 0.0,
        position_yaw: 3.0,
        velocity_x: 40.0,
        velocity_y: -1.0,
        velocity_z: 0.0,
        trust: 0.75,
        status: 1,
        engine_speed_rpm: 6500.0,
        vehicle_speed_kmph: 174.6,
    }
}

fn sample_basestation() -> BasestationFrame {
    BasestationFrame {
        stamp: Stamp { sec: 7, nanosec: 250_000_000 },
        v_max: 45.0,
        raceline_index: 1,
        veh_flag: 0,
        track_flag: 1,
        enable_engine: true,
        enable_driving: true,
        enable_joystick_control: false,
        target_velocity: 30.0,
        steering_cmd: -12.5,
        brake_amount: 600.0,
        throttle_lockout: true,
    }
}

// Reference bytes produced with Python's struct.pack('<...') and zlib.crc32.
const DASHBOARD_GOLDEN: &str = "0c0000000065cd1d030237ff08077cfcc2011affe5000000803e0000c0bf0000004000004842000042420000f041000000be0000c842008048c3000000000000803d000000000000404000002042000080bf000000000000403f010020cb459a992e43f5b057f4";
const BASESTATION_GOLDEN: &str = "0700000080b2e60e000034420100010101000000f041000048c100001644014c9424ca";

#[test]
fn frame_sizes() {
    assert_eq!(DASHBOARD_SIZE, 103);
    assert_eq!(BASESTATION_SIZE, 35);
}

#[test]
fn dashboard_golden_bytes() {
    let bytes = sample_dashboard().encode();
    assert_eq!(bytes, hex(DASHBOARD_GOLDEN));
    assert_eq!(DashboardFrame::decode(&bytes).unwrap(), sample_dashboard());
}

#[test]
fn basestation_golden_bytes() {
    let bytes = sample_basestation().encode();
    assert_eq!(bytes, hex(BASESTATION_GOLDEN));
    assert_eq!(BasestationFrame::decode(&bytes).unwrap(), sample_basestation());
}

#[test]
fn all_zero_dashboard() {
    let bytes = DashboardFrame::default().encode();
    assert_eq!(bytes.len(), DASHBOARD_SIZE);
    assert!(bytes[..99].iter().all(|&b| b == 0));
    assert_eq!(&bytes[99..], &hex("2500fd8e")[..]);
    assert_eq!(DashboardFrame::decode(&bytes).unwrap(), DashboardFrame::default());
}

#[test]
fn corrupt_frames_are_rejected() {
    let bytes = sample_dashboard().encode();
    assert_eq!(DashboardFrame::decode(&bytes[..102]), Err(FrameError::Length { expected: 103, got: 102 }));
    let mut flipped = bytes.clone();
    flipped[20] ^= 0x10;
    assert_eq!(DashboardFrame::decode(&flipped), Err(FrameError::Crc));

    let mut b = sample_basestation();
    b.v_max = -1.0;
    assert_eq!(BasestationFrame::decode(&b.encode()), Err(FrameError::Field("v_max")));
    // A bool byte other than 0/1 with a valid CRC.
    let mut raw = sample_basestation().encode();
    raw[15] = 2;
    let crc = crc32fast::hash(&raw[..31]).to_le_bytes();
    raw[31..].copy_from_slice(&crc);
    assert_eq!(BasestationFrame::decode(&raw), Err(FrameError::Field("enable_engine")));
}

#[test]
fn truncated_datagram_counts_drop() {
    let (mut car, mut base) = loopback_pair();
    let good = sample_basestation().encode();
    base.send(&good[..good.len() - 1]).unwrap();
    base.send(&good).unwrap();
    let mut flags = FlagState::default();
    let mut stats = RxStats::default();
    receive_basestation(&mut car, &mut flags, 2, &mut stats);
    assert_eq!(stats.dropped, 1);
    assert_eq!(stats.applied, 1);
    assert_eq!(flags.v_max_remote, 45.0);
    assert_eq!(flags.track_flag, TrackFlag::Yellow);
    assert_eq!(flags.veh_flag, VehFlag::None);
    assert_eq!(flags.active_raceline, 1);
    assert!(flags.throttle_lockout);
    assert_eq!(flags.joystick.brake, 600.0);
    assert_eq!(flags.last_remote_stamp, Some(7.25));
}

#[test]
fn stale_frame_leaves_flags_unchanged() {
    let mut flags = FlagState::default();
    assert!(apply_basestation(&mut flags, &sample_basestation(), 2));
    let before = flags.clone();
    let mut old = sample_basestation();
    old.stamp = Stamp { sec: 7, nanosec: 0 };
    old.v_max = 10.0;
    assert!(!apply_basestation(&mut flags, &old, 2));
    assert_eq!(format!("{before:?}"), format!("{flags:?}"));
}

#[test]
fn unknown_raceline_index_is_ignored() {
    let mut flags = FlagState::default();
    let mut f = sample_basestation();
    f.raceline_index = 5;
    assert!(apply_basestation(&mut flags, &f, 2));
    assert_eq!(flags.active_raceline, 0);
    assert_eq!(flags.v_max_remote, 45.0);
}

#[test]
fn stamp_conversion() {
    assert_eq!(Stamp::from_secs(12.5), Stamp { sec: 12, nanosec: 500_000_000 });
    assert_eq!(Stamp::from_secs(0.999_999_999_9), Stamp { sec: 1, nanosec: 0 });
    assert_eq!(Stamp::from_secs(-3.0), Stamp::default());
    assert!((Stamp::from_secs(1234.567).secs() - 1234.567).abs() < 1e-9);
}

#[test]
fn saturating_fields() {
    assert_eq!(sat_i8(1e9), 127);
    assert_eq!(sat_i8(-1e9), -128);
    assert_eq!(sat_i8(f64::NAN), 0);
    assert_eq!(sat_i16(1800.4), 1800);
    assert_eq!(sat_i16(-40000.0), i16::MIN);
}

#[test]
fn json_names_match_message_table() {
    let v: serde_json::Value = serde_json::from_str(&bridge::dashboard_json(&sample_dashboard())).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    let table = [
        "stamp",
        "cmd_gear",
        "actual_gear",
        "cmd_throttle",
        "actual_throttle",
        "cmd_brake",
        "actual_brake_front",
        "actual_brake_rear",
        "cmd_steering_degree",
        "actual_steering_degree",
        "heading_error",
        "cross_track_error",
        "velocity_error",
        "target_velocity_mps",
        "actual_velocity_mps",
        "purepursuit_lookahead_distance",
        "purepursuit_lookahead_angle_rad",
        "position_x",
        "position_y",
        "position_z",
        "position_r",
        "position_p",
        "position_yaw",
        "velocity_x",
        "velocity_y",
        "velocity_z",
        "trust",
        "status",
        "engine_speed_rpm",
        "vehicle_speed_kmph",
    ];
    let mut sorted = table.to_vec();
    sorted.sort();
    let mut got = keys.clone();
    got.sort();
    assert_eq!(got, sorted);
    assert_eq!(table.len(), 30);
    let cmd = bridge::parse_command(&serde_json::to_string(&sample_basestation()).unwrap()).unwrap();
    assert_eq!(cmd, sample_basestation());
    assert!(bridge::parse_command("{\"v_max\": 3}").is_err());
}

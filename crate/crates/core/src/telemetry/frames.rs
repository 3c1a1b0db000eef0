//! Packed little-endian frames with a trailing CRC-32.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::planner::{FlagState, JoystickCmd, TrackFlag, VehFlag};

pub const DASHBOARD_PAYLOAD: usize = 99;
pub const DASHBOARD_SIZE: usize = DASHBOARD_PAYLOAD + 4;
pub const BASESTATION_PAYLOAD: usize = 31;
pub const BASESTATION_SIZE: usize = BASESTATION_PAYLOAD + 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FrameError {
    #[error("frame is {got} bytes, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("CRC mismatch")]
    Crc,
    #[error("field {0} out of range")]
    Field(&'static str),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Stamp {
    pub sec: u32,
    pub nanosec: u32,
}

impl Stamp {
    pub fn from_secs(t: f64) -> Self {
        let t = t.max(0.0);
        let mut sec = t.floor();
        let mut ns = ((t - sec) * 1e9).round();
        if ns >= 1e9 {
            sec += 1.0;
            ns -= 1e9;
        }
        Self { sec: sec as u32, nanosec: ns as u32 }
    }

    pub fn secs(&self) -> f64 {
        self.sec as f64 + self.nanosec as f64 * 1e-9
    }
}

/// Car → base station.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct DashboardFrame {
    pub stamp: Stamp,
    pub cmd_gear: i8,
    pub actual_gear: i8,
    pub cmd_throttle: i8,
    pub actual_throttle: i8,
    pub cmd_brake: i16,
    pub actual_brake_front: i16,
    pub actual_brake_rear: i16,
    pub cmd_steering_degree: i16,
    pub actual_steering_degree: i16,
    pub heading_error: f32,
    pub cross_track_error: f32,
    pub velocity_error: f32,
    pub target_velocity_mps: f32,
    pub actual_velocity_mps: f32,
    pub purepursuit_lookahead_distance: f32,
    pub purepursuit_lookahead_angle_rad: f32,
    pub position_x: f32,
    pub position_y: f32,
    pub position_z: f32,
    pub position_r: f32,
    pub position_p: f32,
    pub position_yaw: f32,
    pub velocity_x: f32,
    pub velocity_y: f32,
    pub velocity_z: f32,
    pub trust: f32,
    pub status: i8,
    pub engine_speed_rpm: f32,
    pub vehicle_speed_kmph: f32,
}

/// Base station → car.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct BasestationFrame {
    pub stamp: Stamp,
    pub v_max: f32,
    pub raceline_index: i8,
    pub veh_flag: i8,
    pub track_flag: i8,
    pub enable_engine: bool,
    pub enable_driving: bool,
    pub enable_joystick_control: bool,
    pub target_velocity: f32,
    pub steering_cmd: f32,
    pub brake_amount: f32,
    pub throttle_lockout: bool,
}

/// Rounds and saturates into an integer field.
pub fn sat_i8(v: f64) -> i8 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(i8::MIN as f64, i8::MAX as f64) as i8
    }
}

pub fn sat_i16(v: f64) -> i16 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(i16::MIN as f64, i16::MAX as f64) as i16
    }
}

struct Writer(Vec<u8>);

impl Writer {
    fn put(&mut self, b: &[u8]) {
        self.0.extend_from_slice(b);
    }

    fn seal(mut self) -> Vec<u8> {
        let crc = crc32fast::hash(&self.0);
        self.0.extend_from_slice(&crc.to_le_bytes());
        self.0
    }
}

struct Reader<'a> {
    b: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take<const N: usize>(&mut self) -> [u8; N] {
        let mut out = [0u8; N];
        out.copy_from_slice(&self.b[self.at..self.at + N]);
        self.at += N;
        out
    }
    fn u32(&mut self) -> u32 {
        u32::from_le_bytes(self.take())
    }
    fn i8(&mut self) -> i8 {
        i8::from_le_bytes(self.take())
    }
    fn i16(&mut self) -> i16 {
        i16::from_le_bytes(self.take())
    }
    fn f32(&mut self) -> f32 {
        f32::from_le_bytes(self.take())
    }
    fn bool(&mut self, name: &'static str) -> Result<bool, FrameError> {
        match self.take::<1>()[0] {
            0 => Ok(false),
            1 => Ok(true),
            _ => Err(FrameError::Field(name)),
        }
    }
}

/// Checks length and CRC, returning the payload.
fn open(bytes: &[u8], size: usize) -> Result<&[u8], FrameError> {
    if bytes.len() != size {
        return Err(FrameError::Length { expected: size, got: bytes.len() });
    }
    let (payload, crc) = bytes.split_at(size - 4);
    let want = u32::from_le_bytes(crc.try_into().expect("4 bytes"));
    if crc32fast::hash(payload) != want {
        return Err(FrameError::Crc);
    }
    Ok(payload)
}

impl DashboardFrame {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(DASHBOARD_SIZE));
        w.put(&self.stamp.sec.to_le_bytes());
        w.put(&self.stamp.nanosec.to_le_bytes());
        for v in [self.cmd_gear, self.actual_gear, self.cmd_throttle, self.actual_throttle] {
            w.put(&v.to_le_bytes());
        }
        for v in [
            self.cmd_brake,
            self.actual_brake_front,
            self.actual_brake_rear,
            self.cmd_steering_degree,
            self.actual_steering_degree,
        ] {
            w.put(&v.to_le_bytes());
        }
        for v in [
            self.heading_error,
            self.cross_track_error,
            self.velocity_error,
            self.target_velocity_mps,
            self.actual_velocity_mps,
            self.purepursuit_lookahead_distance,
            self.purepursuit_lookahead_angle_rad,
            self.position_x,
            self.position_y,
            self.position_z,
            self.position_r,
            self.position_p,
            self.position_yaw,
            self.velocity_x,
            self.velocity_y,
            self.velocity_z,
            self.trust,
        ] {
            w.put(&v.to_le_bytes());
        }
        w.put(&self.status.to_le_bytes());
        w.put(&self.engine_speed_rpm.to_le_bytes());
        w.put(&self.vehicle_speed_kmph.to_le_bytes());
        debug_assert_eq!(w.0.len(), DASHBOARD_PAYLOAD);
        w.seal()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let b = open(bytes, DASHBOARD_SIZE)?;
        let mut r = Reader { b, at: 0 };
        Ok(Self {
            stamp: Stamp { sec: r.u32(), nanosec: r.u32() },
            cmd_gear: r.i8(),
            actual_gear: r.i8(),
            cmd_throttle: r.i8(),
            actual_throttle: r.i8(),
            cmd_brake: r.i16(),
            actual_brake_front: r.i16(),
            actual_brake_rear: r.i16(),
            cmd_steering_degree: r.i16(),
            actual_steering_degree: r.i16(),
            heading_error: r.f32(),
            cross_track_error: r.f32(),
            velocity_error: r.f32(),
            target_velocity_mps: r.f32(),
            actual_velocity_mps: r.f32(),
            purepursuit_lookahead_distance: r.f32(),
            purepursuit_lookahead_angle_rad: r.f32(),
            position_x: r.f32(),
            position_y: r.f32(),
            position_z: r.f32(),
            position_r: r.f32(),
            position_p: r.f32(),
            position_yaw: r.f32(),
            velocity_x: r.f32(),
            velocity_y: r.f32(),
            velocity_z: r.f32(),
            trust: r.f32(),
            status: r.i8(),
            engine_speed_rpm: r.f32(),
            vehicle_speed_kmph: r.f32(),
        })
    }
}

impl BasestationFrame {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer(Vec::with_capacity(BASESTATION_SIZE));
        w.put(&self.stamp.sec.to_le_bytes());
        w.put(&self.stamp.nanosec.to_le_bytes());
        w.put(&self.v_max.to_le_bytes());
        for v in [self.raceline_index, self.veh_flag, self.track_flag] {
            w.put(&v.to_le_bytes());
        }
        for v in [self.enable_engine, self.enable_driving, self.enable_joystick_control] {
            w.put(&[v as u8]);
        }
        for v in [self.target_velocity, self.steering_cmd, self.brake_amount] {
            w.put(&v.to_le_bytes());
        }
        w.put(&[self.throttle_lockout as u8]);
        debug_assert_eq!(w.0.len(), BASESTATION_PAYLOAD);
        w.seal()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, FrameError> {
        let b = open(bytes, BASESTATION_SIZE)?;
        let mut r = Reader { b, at: 0 };
        let f = Self {
            stamp: Stamp { sec: r.u32(), nanosec: r.u32() },
            v_max: r.f32(),
            raceline_index: r.i8(),
            veh_flag: r.i8(),
            track_flag: r.i8(),
            enable_engine: r.bool("enable_engine")?,
            enable_driving: r.bool("enable_driving")?,
            enable_joystick_control: r.bool("enable_joystick_control")?,
            target_velocity: r.f32(),
            steering_cmd: r.f32(),
            brake_amount: r.f32(),
            throttle_lockout: r.bool("throttle_lockout")?,
        };
        f.check()?;
        Ok(f)
    }

    /// Field-range invariants.
    pub fn check(&self) -> Result<(), FrameError> {
        if !(self.v_max >= 0.0) || !self.v_max.is_finite() {
            return Err(FrameError::Field("v_max"));
        }
        if self.raceline_index < 0 {
            return Err(FrameError::Field("raceline_index"));
        }
        for (v, name) in [
            (self.target_velocity, "target_velocity"),
            (self.steering_cmd, "steering_cmd"),
            (self.brake_amount, "brake_amount"),
        ] {
            if !v.is_finite() {
                return Err(FrameError::Field(name));
            }
        }
        Ok(())
    }
}

/// Folds an inbound frame into the flag state. Frames older than the last
/// applied one, and raceline indices outside `0..racelines`, are ignored
/// (the latter only for the index). Returns whether the frame was applied.
pub fn apply_basestation(flags: &mut FlagState, f: &BasestationFrame, racelines: usize) -> bool {
    let t = f.stamp.secs();
    if flags.last_remote_stamp.is_some_and(|last| t < last) {
        return false;
    }
    flags.last_remote_stamp = Some(t);
    flags.v_max_remote = f.v_max as f64;
    if (f.raceline_index as usize) < racelines {
        flags.active_raceline = f.raceline_index as usize;
    }
    flags.veh_flag = VehFlag::from_code(f.veh_flag);
    flags.track_flag = TrackFlag::from_code(f.track_flag);
    flags.enable_engine = f.enable_engine;
    flags.enable_driving = f.enable_driving;
    flags.throttle_lockout = f.throttle_lockout;
    flags.target_velocity = f.target_velocity as f64;
    flags.joystick = JoystickCmd {
        override_active: f.enable_joystick_control,
        steering: f.steering_cmd as f64,
        brake: f.brake_amount as f64,
        stamp: t,
    };
    true
}

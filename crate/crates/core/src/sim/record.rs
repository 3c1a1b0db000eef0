//! Topic ids and payloads of the run log. Payloads are bincode.

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use crate::controller::ControllerOutput;
use crate::planner::{PathStatus, PlanOutput};
use crate::plant::{ActuationCommand, VehicleParams};
use crate::track::raceline::Sidecar;
use crate::track::{Raceline, Sample, TrackError};

pub const TOPIC_META: u16 = 0;
pub const TOPIC_TRUTH: u16 = 1;
pub const TOPIC_IMU: u16 = 2;
pub const TOPIC_GNSS: u16 = 3;
pub const TOPIC_ESTIMATE: u16 = 4;
pub const TOPIC_PLAN: u16 = 5;
pub const TOPIC_CONTROL: u16 = 6;
pub const TOPIC_FLAGS: u16 = 7;
pub const TOPIC_VERDICT: u16 = 8;
/// Encoded dashboard frames as sent.
pub const TOPIC_DASHBOARD: u16 = 9;
/// Encoded basestation frames as received by the car.
pub const TOPIC_BASESTATION: u16 = 10;
pub const TOPIC_EVENT: u16 = 11;

pub fn topic_name(topic: u16) -> &'static str {
    match topic {
        TOPIC_META => "meta",
        TOPIC_TRUTH => "truth",
        TOPIC_IMU => "imu",
        TOPIC_GNSS => "gnss",
        TOPIC_ESTIMATE => "estimate",
        TOPIC_PLAN => "plan",
        TOPIC_CONTROL => "control",
        TOPIC_FLAGS => "flags",
        TOPIC_VERDICT => "verdict",
        TOPIC_DASHBOARD => "dashboard",
        TOPIC_BASESTATION => "basestation",
        TOPIC_EVENT => "event",
        _ => "unknown",
    }
}

pub fn encode<T: Serialize>(v: &T) -> Vec<u8> {
    bincode::serialize(v).expect("log payloads serialize")
}

pub fn decode<T: DeserializeOwned>(bytes: &[u8]) -> Result<T, String> {
    bincode::deserialize(bytes).map_err(|e| e.to_string())
}

/// Enough to rebuild the exact raceline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RacelineRecord {
    pub samples: Vec<Sample>,
    pub sidecar: Sidecar,
}

impl RacelineRecord {
    pub fn of(rl: &Raceline) -> Self {
        Self { samples: rl.samples().to_vec(), sidecar: rl.sidecar() }
    }

    pub fn rebuild(&self) -> Result<Raceline, TrackError> {
        let sc = &self.sidecar;
        Raceline::from_stations(self.samples.clone(), &sc.stations, sc.length, sc.closed, sc.banking.clone())
    }
}

/// First record of every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub run_id: String,
    pub scenario: String,
    pub seed: u64,
    pub base_tick_us: u64,
    pub vehicle: VehicleParams,
    pub raceline: RacelineRecord,
}

/// Planner output without the path points.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub s_star: f64,
    pub cross_track: f64,
    pub heading_error: f64,
    pub v_cap: f64,
    pub raceline: usize,
    pub status: PathStatus,
    pub points: usize,
    pub fault: Option<String>,
}

impl PlanRecord {
    pub fn of(p: &PlanOutput) -> Self {
        Self {
            s_star: p.s_star,
            cross_track: p.cross_track,
            heading_error: p.heading_error,
            v_cap: p.v_cap,
            raceline: p.raceline,
            status: p.path.status,
            points: p.path.points.len(),
            fault: p.fault.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlRecord {
    pub output: ControllerOutput,
    pub command: ActuationCommand,
    pub accepted: bool,
    /// Speed the controller saw.
    pub v_car: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Event {
    pub source: String,
    pub message: String,
}

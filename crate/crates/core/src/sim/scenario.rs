//! Scenario files (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::ControlParams;
use crate::estimator::EstimatorConfig;
use crate::planner::PlannerConfig;
use crate::plant::{ActuatorFault, Channel, RtkStatus, SensorConfig, SensorFaults, VehicleParams};
use crate::supervisor::SupervisorConfig;
use crate::track::RacelineOptions;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("{path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
    #[error("invalid scenario: {key}: {msg}")]
    Invalid { key: String, msg: String },
}

fn invalid(key: &str, msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Invalid { key: key.into(), msg: msg.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    /// Timed laps to complete; 0 runs for `max_duration`.
    #[serde(default)]
    pub laps: u32,
    #[serde(default = "default_max_duration")]
    pub max_duration: f64,
    /// Start this far (m) behind the start line, at rest.
    #[serde(default = "default_start_offset")]
    pub start_offset: f64,
    #[serde(default)]
    pub track: TrackConfig,
    #[serde(default)]
    pub base_station: BaseStationConfig,
    #[serde(default)]
    pub faults: FaultConfig,
    #[serde(default)]
    pub expect: Expectation,
    #[serde(default)]
    pub vehicle: VehicleParams,
    #[serde(default)]
    pub sensors: SensorConfig,
    #[serde(default)]
    pub estimator: EstimatorConfig,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub control: ControlParams,
    #[serde(default)]
    pub supervisor: SupervisorConfig,
    #[serde(default)]
    pub log: LogConfig,
}

fn default_max_duration() -> f64 {
    600.0
}

fn default_start_offset() -> f64 {
    5.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrackSource {
    /// Built-in speedway oval.
    Oval,
    /// Raceline file (CSV + sidecar), relative to the scenario file.
    File,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackConfig {
    pub source: TrackSource,
    pub raceline: Option<PathBuf>,
    /// Turn banking of the oval (deg).
    pub bank_deg: f64,
    pub width: f64,
    /// Boundary station spacing (m).
    pub spacing: f64,
    pub optimizer: RacelineOptions,
}

impl Default for TrackConfig {
    fn default() -> Self {
        Self {
            source: TrackSource::Oval,
            raceline: None,
            bank_deg: 9.2,
            width: 15.0,
            spacing: 2.0,
            optimizer: RacelineOptions::default(),
        }
    }
}

/// Scripted operator. Speed caps step up per lap; events override fields
/// from their time on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseStationConfig {
    pub rate: f64,
    pub lap_caps: Vec<f64>,
    pub raceline_index: i8,
    pub events: Vec<BaseStationEvent>,
}

impl Default for BaseStationConfig {
    fn default() -> Self {
        Self { rate: 20.0, lap_caps: vec![50.0, 53.0, 56.0], raceline_index: 0, events: Vec::new() }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaseStationEvent {
    pub t: f64,
    pub v_max: Option<f64>,
    pub track_flag: Option<i8>,
    pub veh_flag: Option<i8>,
    pub raceline_index: Option<i8>,
    pub enable_joystick_control: Option<bool>,
    pub steering_cmd: Option<f64>,
    pub brake_amount: Option<f64>,
    pub throttle_lockout: Option<bool>,
    /// Stop transmitting (link loss) from `t` on.
    pub silent: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FaultConfig {
    /// `[t0, t1]` windows without fixes.
    pub rtk_dropout: Vec<[f64; 2]>,
    pub rtk_degrade: Vec<DegradeWindow>,
    /// `[t0, t1, dx, dy]` windows of offset fixes.
    pub gnss_outlier: Vec<[f64; 4]>,
    /// `[t0, duration]` windows in which the rolling counter stops advancing.
    pub counter_freeze: Vec<[f64; 2]>,
    /// Counter freeze triggered when the car first passes raceline station
    /// `s` on lap `lap` (0 is the run-up before the first crossing).
    pub counter_freeze_at: Vec<FreezeAt>,
    pub actuator_fault: Vec<ActuatorFaultConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DegradeWindow {
    pub t0: f64,
    pub t1: f64,
    pub status: RtkStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FreezeAt {
    pub lap: u32,
    pub s: f64,
    pub duration: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultMode {
    Stuck,
    StuckAt,
    Lag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActuatorFaultConfig {
    pub channel: Channel,
    pub t: f64,
    #[serde(default = "default_fault_mode")]
    pub mode: FaultMode,
    /// Value for `stuck_at`, time constant for `lag`.
    #[serde(default)]
    pub value: f64,
}

fn default_fault_mode() -> FaultMode {
    FaultMode::Stuck
}

impl ActuatorFaultConfig {
    pub fn fault(&self) -> ActuatorFault {
        match self.mode {
            FaultMode::Stuck => ActuatorFault::Stuck,
            FaultMode::StuckAt => ActuatorFault::StuckAt(self.value),
            FaultMode::Lag => ActuatorFault::Lag(self.value),
        }
    }
}

/// What the run is supposed to show. An EMERGENCY is a failure unless
/// `emergency` is set, and the reverse.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Expectation {
    pub emergency: bool,
    pub controlled_stop: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LogConfig {
    pub enabled: bool,
    pub budget: usize,
    /// Ground truth is logged every this many plant ticks.
    pub truth_decimation: u32,
}

impl Default for LogConfig {
    fn default() -> Self {
        Self { enabled: true, budget: crate::telemetry::log::DEFAULT_BUDGET, truth_decimation: 10 }
    }
}

impl FaultConfig {
    pub fn sensor_faults(&self) -> SensorFaults {
        SensorFaults {
            rtk_dropout: self.rtk_dropout.iter().map(|w| (w[0], w[1])).collect(),
            degrade: self.rtk_degrade.iter().map(|d| (d.t0, d.t1, d.status)).collect(),
            gnss_outlier: self.gnss_outlier.iter().map(|w| (w[0], w[1], w[2], w[3])).collect(),
        }
    }
}

impl Scenario {
    pub fn from_toml(text: &str, origin: &Path) -> Result<Self, ScenarioError> {
        let sc: Scenario = toml::from_str(text)
            .map_err(|e| ScenarioError::Parse { path: origin.to_path_buf(), msg: e.to_string() })?;
        sc.validate()?;
        Ok(sc)
    }

    /// Reads a scenario; a relative raceline path is resolved against the
    /// scenario's directory.
    pub fn load(path: &Path) -> Result<Self, ScenarioError> {
        let text =
            std::fs::read_to_string(path).map_err(|source| ScenarioError::Read { path: path.to_path_buf(), source })?;
        let mut sc = Self::from_toml(&text, path)?;
        if let Some(rl) = &sc.track.raceline {
            if rl.is_relative() {
                let base = path.parent().unwrap_or(Path::new("."));
                sc.track.raceline = Some(base.join(rl));
            }
        }
        Ok(sc)
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        if self.name.is_empty() || !self.name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
            return Err(invalid("name", "use letters, digits, '-' and '_'"));
        }
        if !(self.max_duration > 0.0) {
            return Err(invalid("max_duration", "must be positive"));
        }
        if !(self.start_offset >= 0.0) {
            return Err(invalid("start_offset", "must be non-negative"));
        }
        if self.track.source == TrackSource::File && self.track.raceline.is_none() {
            return Err(invalid("track.raceline", "required when track.source = \"file\""));
        }
        if !(self.base_station.rate > 0.0 && self.base_station.rate <= 1000.0) {
            return Err(invalid("base_station.rate", "must be in (0, 1000] Hz"));
        }
        if self.base_station.lap_caps.iter().any(|v| !(*v >= 0.0)) {
            return Err(invalid("base_station.lap_caps", "caps must be non-negative"));
        }
        if self.base_station.raceline_index < 0 {
            return Err(invalid("base_station.raceline_index", "must be non-negative"));
        }
        for (i, e) in self.base_station.events.iter().enumerate() {
            if e.v_max.is_some_and(|v| !(v >= 0.0)) {
                return Err(invalid(&format!("base_station.events[{i}].v_max"), "must be non-negative"));
            }
        }
        for (i, w) in self.faults.rtk_dropout.iter().enumerate() {
            if !(w[1] >= w[0]) {
                return Err(invalid(&format!("faults.rtk_dropout[{i}]"), "window end precedes start"));
            }
        }
        for (i, w) in self.faults.counter_freeze.iter().enumerate() {
            if !(w[1] > 0.0) {
                return Err(invalid(&format!("faults.counter_freeze[{i}]"), "duration must be positive"));
            }
        }
        if self.log.budget < 1024 {
            return Err(invalid("log.budget", "at least 1024 bytes"));
        }
        if self.log.truth_decimation == 0 {
            return Err(invalid("log.truth_decimation", "must be at least 1"));
        }
        self.vehicle.validate().map_err(|e| invalid("vehicle", e.to_string()))?;
        self.planner.validate().map_err(|e| invalid("planner", e))?;
        self.control.validate().map_err(|e| invalid("control", e))?;
        Ok(())
    }
}

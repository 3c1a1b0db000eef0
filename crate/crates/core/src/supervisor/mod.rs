//! Safety supervisor: module heartbeats, cross-track limit, sensor health,
//! command-echo validation and stop orchestration.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::estimator::{EstimatedState, Status};
use crate::plant::{ActuationCommand, Channel, LowLevel, PlantState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    None,
    ControlledStop,
    EmergencyStop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SupervisorVerdict {
    pub action: Action,
    pub cause: String,
    pub stamp: f64,
}

impl SupervisorVerdict {
    pub fn none(stamp: f64) -> Self {
        Self { action: Action::None, cause: String::new(), stamp }
    }

    fn new(action: Action, cause: impl Into<String>, stamp: f64) -> Self {
        Self { action, cause: cause.into(), stamp }
    }

    /// The more severe of two verdicts; the earlier one on a tie.
    pub fn worst(self, other: Self) -> Self {
        if other.action > self.action {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criticality {
    ControlledStop,
    Emergency,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heartbeat {
    pub last_beat: Option<f64>,
    pub period: f64,
    pub timeout: f64,
    pub criticality: Criticality,
}

#[derive(Debug, Clone, Default)]
pub struct HeartbeatRegistry {
    modules: BTreeMap<String, Heartbeat>,
}

impl HeartbeatRegistry {
    pub fn register(&mut self, name: &str, period: f64, timeout: f64, criticality: Criticality) -> Result<(), String> {
        if timeout < 2.0 * period {
            return Err(format!("{name}: timeout {timeout} s is under twice the period {period} s"));
        }
        self.modules.insert(name.to_string(), Heartbeat { last_beat: None, period, timeout, criticality });
        Ok(())
    }

    pub fn beat(&mut self, name: &str, now: f64) {
        if let Some(h) = self.modules.get_mut(name) {
            h.last_beat = Some(now);
        }
    }

    pub fn get(&self, name: &str) -> Option<&Heartbeat> {
        self.modules.get(name)
    }

    /// Modules whose last beat is older than their timeout. A module that
    /// never beat counts from `armed_at`.
    pub fn check(&self, now: f64, armed_at: f64) -> SupervisorVerdict {
        let mut v = SupervisorVerdict::none(now);
        for (name, h) in &self.modules {
            let last = h.last_beat.unwrap_or(armed_at);
            if now - last > h.timeout + 1e-9 {
                let (action, cause) = match h.criticality {
                    Criticality::Emergency => (Action::EmergencyStop, format!("{name} heartbeat lost")),
                    Criticality::ControlledStop => (Action::ControlledStop, format!("{name} heartbeat lost")),
                };
                v = v.worst(SupervisorVerdict::new(action, cause, now));
            }
        }
        v
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SupervisorConfig {
    pub rate: f64,
    pub cross_track_limit: f64,
    pub steering_tolerance: f64,
    pub brake_tolerance: f64,
    pub throttle_tolerance: f64,
    /// Commands from this many recent cycles bound the expected echo.
    pub echo_window: usize,
    /// Consecutive mismatching cycles before a stop.
    pub echo_persistence: usize,
    /// A controlled stop that has not slowed below `stop_speed` by then
    /// escalates to an emergency stop.
    pub stop_escalation: f64,
    pub stop_speed: f64,
    pub heartbeat_timeout: f64,
}

impl Default for SupervisorConfig {
    fn default() -> Self {
        Self {
            rate: 50.0,
            cross_track_limit: 3.5,
            steering_tolerance: 3.0,
            brake_tolerance: 100.0,
            throttle_tolerance: 5.0,
            echo_window: 3,
            echo_persistence: 10,
            stop_escalation: 10.0,
            stop_speed: 0.5,
            heartbeat_timeout: 0.2,
        }
    }
}

/// `|e_ct|` over the limit stops the car; a non-finite value is a sensor
/// health failure.
pub fn check_cross_track(e_ct: f64, limit: f64, now: f64) -> SupervisorVerdict {
    if !e_ct.is_finite() {
        return SupervisorVerdict::new(Action::EmergencyStop, "cross-track error not finite", now);
    }
    if e_ct.abs() > limit {
        return SupervisorVerdict::new(
            Action::ControlledStop,
            format!("cross-track error {e_ct:.2} m over {limit} m"),
            now,
        );
    }
    SupervisorVerdict::none(now)
}

/// Persistence-filtered comparison of actuator echoes against recent
/// commands.
#[derive(Debug, Clone)]
pub struct EchoValidator {
    history: VecDeque<ActuationCommand>,
    window: usize,
    persistence: usize,
    tolerance: [f64; 3],
    streak: [usize; 3],
}

const CHANNELS: [Channel; 3] = [Channel::Steering, Channel::Throttle, Channel::Brake];

impl EchoValidator {
    pub fn new(cfg: &SupervisorConfig) -> Self {
        Self {
            history: VecDeque::new(),
            window: cfg.echo_window.max(1),
            persistence: cfg.echo_persistence.max(1),
            tolerance: [cfg.steering_tolerance, cfg.throttle_tolerance, cfg.brake_tolerance],
            streak: [0; 3],
        }
    }

    fn pick(c: &ActuationCommand, ch: Channel) -> f64 {
        match ch {
            Channel::Steering => c.steering,
            Channel::Throttle => c.throttle,
            Channel::Brake => c.brake,
        }
    }

    fn actual(s: &PlantState, ch: Channel) -> f64 {
        match ch {
            Channel::Steering => s.steering_deg,
            Channel::Throttle => s.throttle_actual,
            Channel::Brake => s.brake_pressure_front,
        }
    }

    pub fn reset(&mut self) {
        self.history.clear();
        self.streak = [0; 3];
    }

    /// Records `cmd` and checks the echoes in `actual`; returns the first
    /// channel whose mismatch persisted.
    pub fn validate(&mut self, cmd: &ActuationCommand, actual: &PlantState) -> Result<(), Channel> {
        self.history.push_back(*cmd);
        while self.history.len() > self.window + 1 {
            self.history.pop_front();
        }
        let mut failed = None;
        for (i, ch) in CHANNELS.iter().enumerate() {
            let (lo, hi) = self
                .history
                .iter()
                .map(|c| Self::pick(c, *ch))
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
            let a = Self::actual(actual, *ch);
            let tol = self.tolerance[i];
            if a < lo - tol || a > hi + tol {
                self.streak[i] += 1;
            } else {
                self.streak[i] = 0;
            }
            if self.streak[i] >= self.persistence && failed.is_none() {
                failed = Some(*ch);
            }
        }
        failed.map_or(Ok(()), Err)
    }
}

/// What the rest of the stack must do about a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Directives {
    /// Planner cap forced to 0 (ramp along the raceline).
    pub planner_stop: bool,
    /// Plant told a supervised stop is under way.
    pub plant_controlled_stop: bool,
    /// Plant latched into EMERGENCY.
    pub plant_emergency: bool,
}

pub fn orchestrate_stop(action: Action) -> Directives {
    match action {
        Action::None => Directives::default(),
        Action::ControlledStop => {
            Directives { planner_stop: true, plant_controlled_stop: true, plant_emergency: false }
        }
        Action::EmergencyStop => Directives { planner_stop: true, plant_controlled_stop: false, plant_emergency: true },
    }
}

/// Per-cycle observations.
#[derive(Debug, Clone, Copy)]
pub struct SupervisorInputs<'a> {
    pub now: f64,
    pub estimate: Option<&'a EstimatedState>,
    pub cross_track: Option<f64>,
    pub command: Option<&'a ActuationCommand>,
    pub plant: &'a PlantState,
}

#[derive(Debug, Clone)]
pub struct Supervisor {
    cfg: SupervisorConfig,
    registry: HeartbeatRegistry,
    echo: EchoValidator,
    latched: Action,
    stop_since: Option<f64>,
    armed_at: f64,
    log: Vec<SupervisorVerdict>,
    seen: Vec<(Action, String)>,
}

impl Supervisor {
    /// Registers the estimator (loss is an emergency) and the planner and
    /// controller (loss stops the car under control).
    pub fn new(cfg: SupervisorConfig, armed_at: f64) -> Self {
        let mut registry = HeartbeatRegistry::default();
        let t = cfg.heartbeat_timeout;
        registry.register("estimator", 0.008, t, Criticality::Emergency).expect("static periods");
        registry.register("planner", 0.02, t, Criticality::ControlledStop).expect("static periods");
        registry.register("controller", 0.02, t, Criticality::ControlledStop).expect("static periods");
        Self {
            echo: EchoValidator::new(&cfg),
            cfg,
            registry,
            latched: Action::None,
            stop_since: None,
            armed_at,
            log: Vec::new(),
            seen: Vec::new(),
        }
    }

    pub fn registry_mut(&mut self) -> &mut HeartbeatRegistry {
        &mut self.registry
    }

    pub fn beat(&mut self, module: &str, now: f64) {
        self.registry.beat(module, now);
    }

    pub fn latched(&self) -> Action {
        self.latched
    }

    /// One verdict per onset, in order.
    pub fn log(&self) -> &[SupervisorVerdict] {
        &self.log
    }

    fn record(&mut self, v: &SupervisorVerdict) {
        if v.action == Action::None {
            return;
        }
        // measured values in the cause do not make a new onset
        let kind = v.cause.split(|c: char| c.is_ascii_digit()).next().unwrap_or("");
        let key = (v.action, kind.to_string());
        if !self.seen.contains(&key) {
            self.seen.push(key);
            self.log.push(v.clone());
        }
    }

    /// Runs every check, latches the worst action and returns the
    /// directives for this cycle.
    pub fn cycle(&mut self, inp: &SupervisorInputs) -> (SupervisorVerdict, Directives) {
        let now = inp.now;
        let mut found = Vec::new();
        found.push(self.registry.check(now, self.armed_at));
        if let Some(e) = inp.estimate {
            let bad = e.position.iter().chain(e.velocity.iter()).chain(e.rpy.iter()).any(|v| !v.is_finite());
            if bad {
                found.push(SupervisorVerdict::new(Action::EmergencyStop, "estimate not finite", now));
            } else if e.status == Status::Failed {
                found.push(SupervisorVerdict::new(Action::EmergencyStop, "localization failed", now));
            }
        }
        if let Some(ct) = inp.cross_track {
            found.push(check_cross_track(ct, self.cfg.cross_track_limit, now));
        }
        if inp.plant.lowlevel == LowLevel::Driving && self.latched == Action::None {
            if let Some(cmd) = inp.command {
                if let Err(ch) = self.echo.validate(cmd, inp.plant) {
                    found.push(SupervisorVerdict::new(
                        Action::ControlledStop,
                        format!("{} echo mismatch", ch.name()),
                        now,
                    ));
                }
            }
        } else {
            self.echo.reset();
        }
        if inp.plant.lowlevel == LowLevel::Emergency {
            found.push(SupervisorVerdict::new(Action::EmergencyStop, "drive-by-wire emergency", now));
        }
        if self.latched == Action::ControlledStop {
            let since = *self.stop_since.get_or_insert(now);
            if inp.plant.speed() >= self.cfg.stop_speed && now - since > self.cfg.stop_escalation {
                found.push(SupervisorVerdict::new(Action::EmergencyStop, "controlled stop did not finish", now));
            }
        }

        let verdict = found.into_iter().fold(SupervisorVerdict::none(now), SupervisorVerdict::worst);
        self.record(&verdict);
        if verdict.action > self.latched {
            self.latched = verdict.action;
            if self.latched == Action::ControlledStop {
                self.stop_since = Some(now);
            }
        }
        (verdict, orchestrate_stop(self.latched))
    }
}

#[cfg(test)]
mod tests;

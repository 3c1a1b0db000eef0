//! Closed-loop simulation: the whole stack plus plant, sensors and a
//! scripted base station on one deterministic scheduler.

pub mod basestation;
pub mod record;
pub mod scenario;

use std::path::PathBuf;
use std::time::{Duration, Instant};

use nalgebra::Vector2;
use serde::Serialize;
use thiserror::Error;

use crate::controller::{ControlInputs, Controller, ControllerOutput};
use crate::estimator::{EstimatedState, Estimator};
use crate::planner::{FlagState, PlanOutput, Planner};
use crate::plant::{
    ActuationCommand, CommandStatus, EmergencyCause, GnssFix, ImuSample, LowLevel, Plant, PlantState, Sensors,
};
use crate::runtime::{FaultEvent, RngStreams, RunMode, Scheduler, SimClock, TaskSpec, Tick, Topic, WriterToken};
use crate::supervisor::{Action, Directives, Supervisor, SupervisorInputs, SupervisorVerdict};
use crate::telemetry::frames::{sat_i16, sat_i8};
use crate::telemetry::log::{ChunkLogger, Record};
use crate::telemetry::{loopback_pair, receive_datagram, DashboardFrame, Link, RxStats, Stamp};
use crate::track::shapes::OvalLayout;
use crate::track::Raceline;

use basestation::{ScriptedBaseStation, StartLine};
use record::*;
use scenario::{Scenario, TrackSource};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("track: {0}")]
    Track(#[from] crate::track::TrackError),
    #[error("plant: {0}")]
    Plant(#[from] crate::plant::PlantError),
    #[error("runtime: {0}")]
    Runtime(#[from] crate::runtime::RuntimeError),
    #[error("{0}")]
    Setup(String),
}

/// Base tick of the simulation clock (µs).
pub const BASE_TICK_US: u64 = 1000;

/// Task periods in base ticks.
pub mod periods {
    pub const PLANT: u64 = 1;
    pub const IMU: u64 = 8;
    pub const GNSS: u64 = 50;
    pub const ESTIMATOR: u64 = 8;
    pub const RX: u64 = 20;
    pub const PLANNER: u64 = 20;
    pub const CONTROLLER: u64 = 20;
    pub const SUPERVISOR: u64 = 20;
    pub const TELEMETRY: u64 = 100;
}

/// Supervision starts this long after power-up (s).
pub const ARMING_DELAY: f64 = 1.0;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    /// Where chunk files go; `None` keeps the log in memory only.
    pub out_dir: Option<PathBuf>,
    /// Pace against the wall clock (1.0 = real time) instead of lockstep.
    pub realtime: Option<f64>,
}

/// Builds the scenario's raceline.
pub fn build_raceline(sc: &Scenario) -> Result<Raceline, SimError> {
    match sc.track.source {
        TrackSource::Oval => {
            let lay = OvalLayout { bank: sc.track.bank_deg.to_radians(), width: sc.track.width, ..Default::default() };
            let b = lay.boundaries(sc.track.spacing)?;
            Ok(Raceline::generate(&b, &sc.track.optimizer)?)
        }
        TrackSource::File => {
            let p = sc.track.raceline.as_ref().ok_or_else(|| SimError::Setup("track.raceline missing".into()))?;
            Ok(Raceline::load(p)?)
        }
    }
}

pub fn run_id(sc: &Scenario) -> String {
    format!("{}-{}", sc.name, sc.seed)
}

struct Topics {
    imu: Topic<ImuSample>,
    imu_w: WriterToken,
    gnss: Topic<GnssFix>,
    gnss_w: WriterToken,
    estimate: Topic<EstimatedState>,
    estimate_w: WriterToken,
    plan: Topic<PlanOutput>,
    plan_w: WriterToken,
    command: Topic<ActuationCommand>,
    command_w: WriterToken,
}

impl Topics {
    fn new() -> Self {
        let mut imu = Topic::new("imu", 64);
        let mut gnss = Topic::new("gnss", 16);
        let mut estimate = Topic::new("estimate", 16);
        let mut plan = Topic::new("plan", 4);
        let mut command = Topic::new("command", 16);
        Self {
            imu_w: imu.register_writer("imu").expect("fresh topic"),
            gnss_w: gnss.register_writer("gnss").expect("fresh topic"),
            estimate_w: estimate.register_writer("estimator").expect("fresh topic"),
            plan_w: plan.register_writer("planner").expect("fresh topic"),
            command_w: command.register_writer("controller").expect("fresh topic"),
            imu,
            gnss,
            estimate,
            plan,
            command,
        }
    }
}

/// Everything the tasks share.
pub struct Stack {
    sc: Scenario,
    raceline: Raceline,
    plant: Plant,
    sensors: Sensors,
    estimator: Estimator,
    planner: Planner,
    controller: Controller,
    supervisor: Supervisor,
    flags: FlagState,
    car_link: Box<dyn Link>,
    base: ScriptedBaseStation,
    topics: Topics,
    logger: Option<ChunkLogger>,
    records: Vec<Record>,
    log_error: Option<String>,

    plant_ticks: u64,
    truth_s: f64,
    crossings: u32,
    freezes: Vec<(f64, f64)>,
    freeze_pending: Vec<bool>,
    faults_applied: Vec<bool>,
    frozen_counter: Option<u8>,
    last_lowlevel: LowLevel,
    est_imu_cursor: Option<Tick>,
    est_gnss_cursor: Option<Tick>,
    est_s: Option<f64>,
    last_imu: Option<ImuSample>,
    last_out: Option<ControllerOutput>,
    last_cmd: Option<ActuationCommand>,
    directives: Directives,
    rx: RxStats,
    tx_errors: u64,
    dashboards: u64,
    verdicts_logged: usize,
    done_at: Option<f64>,
    still_since: Option<f64>,
}

impl Stack {
    fn log<T: Serialize>(&mut self, topic: u16, tick: Tick, value: &T) {
        self.log_bytes(topic, tick, encode(value));
    }

    fn log_bytes(&mut self, topic: u16, tick: Tick, payload: Vec<u8>) {
        let stamp_ns = tick * BASE_TICK_US * 1000;
        if let Some(l) = &mut self.logger {
            if let Err(e) = l.log_record(topic, stamp_ns, &payload) {
                // recording is not critical; keep running without it
                self.log_error = Some(e.to_string());
                self.logger = None;
            }
        }
        self.records.push(Record { topic, stamp_ns, payload });
    }

    fn event(&mut self, tick: Tick, source: &str, message: impl Into<String>) {
        let ev = Event { source: source.into(), message: message.into() };
        self.log(TOPIC_EVENT, tick, &ev);
    }

    fn plant_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let tick = clock.now();
        let now = clock.now_secs();
        let dt = clock.ticks_to_secs(periods::PLANT);

        for (i, f) in self.sc.faults.actuator_fault.clone().iter().enumerate() {
            if !self.faults_applied[i] && now >= f.t {
                self.faults_applied[i] = true;
                self.plant.set_actuator_fault(f.channel, Some(f.fault()));
                self.event(tick, "fault", format!("{} actuator fault {:?} injected", f.channel.name(), f.mode));
            }
        }

        let bank = self.raceline.banking().eval(self.truth_s);
        let state = match self.plant.step(dt, bank) {
            Ok(s) => *s,
            Err(e) => {
                self.event(tick, "plant", e.to_string());
                return Err(e.to_string());
            }
        };
        self.plant_ticks += 1;

        if state.lowlevel != self.last_lowlevel {
            if state.lowlevel == LowLevel::Emergency {
                if let Some((EmergencyCause::CounterStale, _)) = self.plant.emergency() {
                    self.event(tick, "watchdog", "rolling counter stale");
                }
            }
            let msg = format!("{:?} -> {:?}", self.last_lowlevel, state.lowlevel);
            self.event(tick, "lowlevel", msg);
            self.last_lowlevel = state.lowlevel;
        }

        // ground-truth progress along the raceline
        let l = self.raceline.length();
        let warm = self.truth_s + state.speed() * dt;
        let s = self.raceline.newton_nearest(&Vector2::new(state.x, state.y), warm, 10).s;
        let prev = self.truth_s;
        if self.raceline.is_closed() && prev > 0.75 * l && s < 0.25 * l {
            self.crossings += 1;
        }
        let lap = self.crossings;
        for (i, fz) in self.sc.faults.counter_freeze_at.clone().iter().enumerate() {
            let passed = if s >= prev { prev < fz.s && s >= fz.s } else { false };
            if self.freeze_pending[i] && fz.lap == lap && passed {
                self.freeze_pending[i] = false;
                self.freezes.push((now, now + fz.duration));
                self.event(tick, "fault", format!("rolling counter frozen at s = {:.1} m", s));
            }
        }
        self.truth_s = s;

        if self.plant_ticks % self.sc.log.truth_decimation as u64 == 0 {
            self.log(TOPIC_TRUTH, tick, &state);
        }

        if self.sc.laps > 0 && self.done_at.is_none() && self.crossings > self.sc.laps {
            self.done_at = Some(now + 0.5);
        }
        let halted = matches!(state.lowlevel, LowLevel::Emergency | LowLevel::SupervisedStop)
            || self.supervisor.latched() != Action::None;
        if halted && state.speed() < 0.1 {
            let since = *self.still_since.get_or_insert(now);
            if self.done_at.is_none() && now - since >= 2.0 {
                self.done_at = Some(now);
            }
        } else {
            self.still_since = None;
        }
        Ok(())
    }

    fn imu_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let s = self.sensors.sample_imu(self.plant.state());
        self.topics.imu.publish(&self.topics.imu_w, clock.now(), s).map_err(|e| e.to_string())?;
        self.log(TOPIC_IMU, clock.now(), &s);
        Ok(())
    }

    fn gnss_task(&mut self, clock: &SimClock) -> Result<(), String> {
        if let Some(f) = self.sensors.sample_gnss(self.plant.state()) {
            self.topics.gnss.publish(&self.topics.gnss_w, clock.now(), f).map_err(|e| e.to_string())?;
            self.log(TOPIC_GNSS, clock.now(), &f);
        }
        Ok(())
    }

    fn estimator_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let tick = clock.now();
        let now = clock.now_secs();
        let imus: Vec<ImuSample> = self.topics.imu.since(self.est_imu_cursor, tick).map(|s| s.value).collect();
        self.est_imu_cursor = Some(tick);
        let fixes: Vec<GnssFix> = self.topics.gnss.since(self.est_gnss_cursor, tick).map(|s| s.value).collect();
        self.est_gnss_cursor = Some(tick);

        let mut errors = Vec::new();
        for imu in imus {
            if let Some(prev) = self.last_imu {
                if let Err(e) = self.estimator.predict(&imu, imu.stamp - prev.stamp) {
                    errors.push(e.to_string());
                    continue;
                }
            }
            self.last_imu = Some(imu);
        }
        for fix in fixes {
            if let Err(e) = self.estimator.update_gnss(&fix) {
                errors.push(e.to_string());
            }
        }
        self.estimator.check_deadreckoning(now);
        if self.estimator.is_initialized() {
            let p = self.estimator.state().position();
            let q = Vector2::new(p.x, p.y);
            let s = match self.est_s {
                Some(w) => self.raceline.newton_nearest(&q, w, 10).s,
                None => self.raceline.grid_nearest(&q, 0.0, self.raceline.length(), 1.0).s,
            };
            self.est_s = Some(s);
            let bank = (!self.raceline.banking().is_flat()).then(|| self.raceline.banking().eval(s));
            let ct = self.raceline.lateral_offset(s, &q);
            if let Err(e) = self.estimator.correct_banking(bank, ct) {
                errors.push(e.to_string());
            }
            let est = self.estimator.estimate(now, self.plant.state().road_wheel_angle);
            self.topics.estimate.publish(&self.topics.estimate_w, tick, est).map_err(|e| e.to_string())?;
            self.log(TOPIC_ESTIMATE, tick, &est);
        }
        for e in &errors {
            self.event(tick, "estimator", e.clone());
        }
        self.supervisor.beat("estimator", now);
        match errors.first() {
            Some(e) => Err(e.clone()),
            None => Ok(()),
        }
    }

    fn basestation_task(&mut self, clock: &SimClock) -> Result<(), String> {
        self.base.tick(clock.now_secs());
        Ok(())
    }

    fn rx_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let tick = clock.now();
        let before = self.flags;
        let stats = self.rx;
        let racelines = self.planner.racelines().len();
        loop {
            match self.car_link.recv() {
                Ok(Some(bytes)) => {
                    receive_datagram(&bytes, &mut self.flags, racelines, &mut self.rx);
                    self.log_bytes(TOPIC_BASESTATION, tick, bytes);
                }
                Ok(None) => break,
                Err(_) => {
                    self.rx.link_errors += 1;
                    break;
                }
            }
        }
        if self.rx.dropped > stats.dropped {
            self.event(tick, "telemetry", format!("{} basestation frames dropped", self.rx.dropped - stats.dropped));
        }
        if self.flags != before {
            let f = self.flags;
            self.log(TOPIC_FLAGS, tick, &f);
        }
        if self.flags.enable_driving && self.plant.state().lowlevel == LowLevel::EngineOn {
            self.plant.enable_driving().map_err(|e| e.to_string())?;
        }
        Ok(())
    }

    fn planner_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let tick = clock.now();
        let now = clock.now_secs();
        let Some(est) = self.topics.estimate.latest().map(|s| s.value) else {
            return Ok(());
        };
        let out = self.planner.cycle(now, &est, &self.flags, self.directives.planner_stop);
        self.log(TOPIC_PLAN, tick, &PlanRecord::of(&out));
        if let Some(f) = &out.fault {
            let f = f.clone();
            self.event(tick, "planner", f);
        }
        self.topics.plan.publish(&self.topics.plan_w, tick, out).map_err(|e| e.to_string())?;
        self.supervisor.beat("planner", now);
        Ok(())
    }

    fn controller_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let tick = clock.now();
        let now = clock.now_secs();
        let est = self.topics.estimate.latest().map(|s| s.value);
        let plan = self.topics.plan.latest().map(|s| s.value.path.clone());
        let truth = *self.plant.state();
        let v_car = est.map(|e| e.speed()).unwrap_or(0.0);
        let inputs = ControlInputs {
            now,
            path: plan.as_ref(),
            localization_stamp: est.map(|e| e.stamp),
            v_car,
            rpm: truth.engine_rpm,
            gear: truth.gear,
            joystick: Some(self.flags.joystick),
            throttle_lockout: self.flags.throttle_lockout,
        };
        let out = self.controller.cycle(&inputs);
        let mut cmd = self.controller.command(&out);
        let frozen = self.freezes.iter().any(|&(a, b)| now >= a && now < b);
        if frozen {
            let c = *self.frozen_counter.get_or_insert(self.last_cmd.map(|c| c.rolling_counter).unwrap_or(0));
            cmd.rolling_counter = c;
        } else {
            self.frozen_counter = None;
        }
        let status = self.plant.apply_command(&cmd);
        self.log(
            TOPIC_CONTROL,
            tick,
            &ControlRecord { output: out, command: cmd, accepted: status == CommandStatus::Accepted, v_car },
        );
        self.topics.command.publish(&self.topics.command_w, tick, cmd).map_err(|e| e.to_string())?;
        self.last_out = Some(out);
        self.last_cmd = Some(cmd);
        self.supervisor.beat("controller", now);
        Ok(())
    }

    fn supervisor_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let tick = clock.now();
        let now = clock.now_secs();
        let est = self.topics.estimate.latest().map(|s| s.value);
        let ct = self.topics.plan.latest().map(|s| s.value.cross_track);
        let cmd = self.last_cmd;
        let truth = *self.plant.state();
        let (_, directives) = self.supervisor.cycle(&SupervisorInputs {
            now,
            estimate: est.as_ref(),
            cross_track: ct,
            command: cmd.as_ref(),
            plant: &truth,
        });
        let new: Vec<SupervisorVerdict> = self.supervisor.log()[self.verdicts_logged..].to_vec();
        self.verdicts_logged = self.supervisor.log().len();
        for v in new {
            self.log(TOPIC_VERDICT, tick, &v);
            self.event(tick, "supervisor", format!("{:?}: {}", v.action, v.cause));
        }
        if directives.plant_emergency {
            self.plant.request_emergency();
        } else if directives.plant_controlled_stop {
            self.plant.request_controlled_stop();
        }
        self.directives = directives;
        Ok(())
    }

    fn dashboard(&self, now: f64) -> DashboardFrame {
        let truth = self.plant.state();
        let est = self.topics.estimate.latest().map(|s| s.value);
        let plan = self.topics.plan.latest().map(|s| &s.value);
        let out = self.last_out;
        let cmd = self.last_cmd;
        let speed = est.map(|e| e.speed()).unwrap_or(0.0);
        let mut f = DashboardFrame {
            stamp: Stamp::from_secs(now),
            cmd_gear: cmd.map(|c| c.gear as i8).unwrap_or(0),
            actual_gear: truth.gear as i8,
            cmd_throttle: sat_i8(cmd.map(|c| c.throttle).unwrap_or(0.0)),
            actual_throttle: sat_i8(truth.throttle_actual),
            cmd_brake: sat_i16(cmd.map(|c| c.brake).unwrap_or(0.0)),
            actual_brake_front: sat_i16(truth.brake_pressure_front),
            actual_brake_rear: sat_i16(truth.brake_pressure_rear),
            cmd_steering_degree: sat_i16(cmd.map(|c| c.steering).unwrap_or(0.0)),
            actual_steering_degree: sat_i16(truth.steering_deg),
            engine_speed_rpm: truth.engine_rpm as f32,
            vehicle_speed_kmph: (speed * 3.6) as f32,
            actual_velocity_mps: speed as f32,
            ..Default::default()
        };
        if let Some(p) = plan {
            f.heading_error = p.heading_error as f32;
            f.cross_track_error = p.cross_track as f32;
        }
        if let Some(o) = out {
            f.target_velocity_mps = o.v_ref as f32;
            f.velocity_error = (o.v_ref - speed) as f32;
            f.purepursuit_lookahead_distance = o.lookahead_distance as f32;
            f.purepursuit_lookahead_angle_rad = o.lookahead_angle as f32;
        }
        if let Some(e) = est {
            f.position_x = e.position[0] as f32;
            f.position_y = e.position[1] as f32;
            f.position_z = e.position[2] as f32;
            f.position_r = e.rpy[0] as f32;
            f.position_p = e.rpy[1] as f32;
            f.position_yaw = e.rpy[2] as f32;
            f.velocity_x = e.velocity[0] as f32;
            f.velocity_y = e.velocity[1] as f32;
            f.velocity_z = e.velocity[2] as f32;
            f.trust = e.trust as f32;
            f.status = e.status.code();
        } else {
            f.status = crate::estimator::Status::Reinitializing.code();
        }
        f
    }

    fn telemetry_task(&mut self, clock: &SimClock) -> Result<(), String> {
        let tick = clock.now();
        let bytes = self.dashboard(clock.now_secs()).encode();
        let sent = self.car_link.send(&bytes);
        self.log_bytes(TOPIC_DASHBOARD, tick, bytes);
        match sent {
            Ok(()) => {
                self.dashboards += 1;
                Ok(())
            }
            Err(e) => {
                self.tx_errors += 1;
                self.event(tick, "telemetry", format!("dashboard send failed: {e}"));
                Err(e.to_string())
            }
        }
    }
}

/// Outcome of one run.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub run_id: String,
    pub records: Vec<Record>,
    pub chunks: Vec<PathBuf>,
    pub log_error: Option<String>,
    pub sim_time: f64,
    pub wall_time: Duration,
    pub laps: u32,
    pub verdicts: Vec<SupervisorVerdict>,
    pub emergency: Option<(EmergencyCause, f64)>,
    pub task_faults: Vec<FaultEvent>,
    pub rx: RxStats,
    pub dashboards: u64,
    pub final_state: PlantState,
    pub raceline: Raceline,
    /// The run did what the scenario said it would.
    pub expectation_met: bool,
}

impl RunOutcome {
    pub fn emergency_occurred(&self) -> bool {
        self.emergency.is_some() || self.verdicts.iter().any(|v| v.action == Action::EmergencyStop)
    }
}

/// Wires the stack for `sc` on a fresh scheduler.
pub fn build(sc: &Scenario, raceline: Raceline, opts: &RunOptions) -> Result<(Scheduler<Stack>, Stack), SimError> {
    let rng = RngStreams::new(sc.seed);
    let id = run_id(sc);
    let l = raceline.length();
    let s0 = if raceline.is_closed() { (l - sc.start_offset).rem_euclid(l) } else { 0.0 };
    let start = raceline.eval(s0);
    let mut plant = Plant::at_rest(sc.vehicle.clone(), start.x, start.y, start.heading)?;
    plant.run_actuation_test().map_err(|ch| SimError::Setup(format!("actuation test failed on {}", ch.name())))?;
    let line0 = raceline.eval(0.0);
    let line = StartLine { x: line0.x, y: line0.y, heading: line0.heading, half_width: sc.track.width * 2.0 };
    let (car_link, base_link) = loopback_pair();
    let planner = Planner::new(sc.planner.clone(), vec![raceline.clone()]).map_err(SimError::Setup)?;
    let controller = Controller::new(sc.control.clone(), 1).map_err(SimError::Setup)?;
    let logger = match (&opts.out_dir, sc.log.enabled) {
        (Some(dir), true) => Some(ChunkLogger::new(dir, &id, sc.log.budget)),
        _ => None,
    };
    let mut stack = Stack {
        sensors: Sensors::new(sc.sensors.clone(), sc.faults.sensor_faults(), &rng),
        estimator: Estimator::new(sc.estimator.clone()),
        planner,
        controller,
        supervisor: Supervisor::new(sc.supervisor.clone(), ARMING_DELAY),
        flags: FlagState::default(),
        car_link: Box::new(car_link),
        base: ScriptedBaseStation::new(sc.base_station.clone(), Box::new(base_link), line),
        topics: Topics::new(),
        logger,
        records: Vec::new(),
        log_error: None,
        plant_ticks: 0,
        truth_s: s0,
        crossings: 0,
        freezes: sc.faults.counter_freeze.iter().map(|w| (w[0], w[0] + w[1])).collect(),
        freeze_pending: vec![true; sc.faults.counter_freeze_at.len()],
        faults_applied: vec![false; sc.faults.actuator_fault.len()],
        frozen_counter: None,
        last_lowlevel: plant.state().lowlevel,
        est_imu_cursor: None,
        est_gnss_cursor: None,
        est_s: None,
        last_imu: None,
        last_out: None,
        last_cmd: None,
        directives: Directives::default(),
        rx: RxStats::default(),
        tx_errors: 0,
        dashboards: 0,
        verdicts_logged: 0,
        done_at: None,
        still_since: None,
        plant,
        raceline: raceline.clone(),
        sc: sc.clone(),
    };
    let meta = RunMeta {
        run_id: id,
        scenario: sc.name.clone(),
        seed: sc.seed,
        base_tick_us: BASE_TICK_US,
        vehicle: sc.vehicle.clone(),
        raceline: RacelineRecord::of(&raceline),
    };
    stack.log(TOPIC_META, 0, &meta);

    let mut sched: Scheduler<Stack> = Scheduler::new(SimClock::new(BASE_TICK_US));
    let bs_period = ((1000.0 / sc.base_station.rate).round() as u64).max(1);
    let tasks: [(&str, u64, i32, fn(&mut Stack, &SimClock) -> Result<(), String>); 10] = [
        ("plant", periods::PLANT, 0, Stack::plant_task),
        ("imu", periods::IMU, 1, Stack::imu_task),
        ("gnss", periods::GNSS, 2, Stack::gnss_task),
        ("estimator", periods::ESTIMATOR, 3, Stack::estimator_task),
        ("basestation", bs_period, 4, Stack::basestation_task),
        ("rx", periods::RX, 5, Stack::rx_task),
        ("planner", periods::PLANNER, 6, Stack::planner_task),
        ("controller", periods::CONTROLLER, 7, Stack::controller_task),
        ("supervisor", periods::SUPERVISOR, 8, Stack::supervisor_task),
        ("telemetry", periods::TELEMETRY, 9, Stack::telemetry_task),
    ];
    for (name, period, prio, f) in tasks {
        sched.add_task(TaskSpec::new(name, period).with_priority(prio), Box::new(f))?;
    }
    Ok((sched, stack))
}

/// Runs a scenario to completion: laps done, car halted after a stop, or
/// `max_duration`.
pub fn run(sc: &Scenario, opts: &RunOptions) -> Result<RunOutcome, SimError> {
    let raceline = build_raceline(sc)?;
    run_with_raceline(sc, raceline, opts)
}

pub fn run_with_raceline(sc: &Scenario, raceline: Raceline, opts: &RunOptions) -> Result<RunOutcome, SimError> {
    let wall = Instant::now();
    let (mut sched, mut stack) = build(sc, raceline, opts)?;
    let mode = match opts.realtime {
        Some(speed) => RunMode::WallClock { speed },
        None => RunMode::Lockstep,
    };
    let end = (sc.max_duration * 1000.0).round() as Tick;
    let mut t = 0;
    while t < end {
        t = (t + 100).min(end);
        sched.run(&mut stack, t, mode)?;
        if stack.done_at.is_some_and(|d| sched.clock().now_secs() >= d) {
            break;
        }
    }
    let mut chunks = Vec::new();
    if let Some(mut l) = stack.logger.take() {
        match l.finish() {
            Ok(c) => chunks = c,
            Err(e) => stack.log_error = Some(e.to_string()),
        }
    }
    let verdicts = stack.supervisor.log().to_vec();
    let emergency = stack.plant.emergency();
    let mut out = RunOutcome {
        run_id: run_id(sc),
        records: std::mem::take(&mut stack.records),
        chunks,
        log_error: stack.log_error.clone(),
        sim_time: sched.clock().now_secs(),
        wall_time: wall.elapsed(),
        laps: stack.crossings.saturating_sub(1),
        verdicts,
        emergency,
        task_faults: sched.faults().history().map(|s| s.value.clone()).collect(),
        rx: stack.rx,
        dashboards: stack.dashboards,
        final_state: *stack.plant.state(),
        raceline: stack.raceline.clone(),
        expectation_met: false,
    };
    let stop_seen = out.verdicts.iter().any(|v| v.action == Action::ControlledStop);
    out.expectation_met = out.emergency_occurred() == sc.expect.emergency
        && (!sc.expect.controlled_stop || stop_seen)
        && (sc.expect.controlled_stop || sc.expect.emergency || out.verdicts.is_empty());
    Ok(out)
}

#[cfg(test)]
mod tests;

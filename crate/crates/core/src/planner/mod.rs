//! Online planner: nearest raceline station by Newton's method, a
//! time-parameterised local path over a fixed horizon, velocity caps from
//! remote commands, flags and timeouts, and the vehicle-frame transform.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

use crate::estimator::{EstimatedState, Status};
use crate::plant::wrap_angle;
use crate::track::Raceline;

/// 80 mph.
pub const YELLOW_CAP: f64 = 35.763;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerConfig {
    pub rate: f64,
    pub path_step: f64,
    pub path_duration: f64,
    pub localization_timeout: f64,
    pub remote_timeout: f64,
    /// Deceleration of the stop ramp (m/s²).
    pub a_stop: f64,
    pub newton_max_iter: usize,
    /// Half window of the fallback grid search (m).
    pub grid_window: f64,
    /// A raceline switch waits until the car is this close to the new line.
    pub switch_distance: f64,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            rate: 50.0,
            path_step: 0.05,
            path_duration: 2.5,
            localization_timeout: 0.2,
            remote_timeout: 5.0,
            a_stop: 10.0,
            newton_max_iter: 20,
            grid_window: 200.0,
            switch_distance: 2.0,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), String> {
        let pos = [
            self.rate,
            self.path_step,
            self.path_duration,
            self.localization_timeout,
            self.remote_timeout,
            self.a_stop,
        ];
        if pos.iter().any(|v| !(*v > 0.0)) {
            return Err("planner parameters must be positive".into());
        }
        let n = self.path_duration / self.path_step;
        if (n - n.round()).abs() > 1e-9 {
            return Err("path_duration must be a whole number of path steps".into());
        }
        Ok(())
    }

    /// Points after the current one.
    pub fn horizon_points(&self) -> usize {
        (self.path_duration / self.path_step).round() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackFlag {
    Green,
    Yellow,
    Red,
}

impl TrackFlag {
    pub fn code(self) -> i8 {
        match self {
            Self::Green => 0,
            Self::Yellow => 1,
            Self::Red => 2,
        }
    }

    /// Unknown codes are read as red.
    pub fn from_code(c: i8) -> Self {
        match c {
            0 => Self::Green,
            1 => Self::Yellow,
            _ => Self::Red,
        }
    }

    pub fn cap(self) -> f64 {
        match self {
            Self::Green => f64::INFINITY,
            Self::Yellow => YELLOW_CAP,
            Self::Red => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VehFlag {
    None,
    /// Stop this car.
    Black,
}

impl VehFlag {
    pub fn code(self) -> i8 {
        match self {
            Self::None => 0,
            Self::Black => 1,
        }
    }

    pub fn from_code(c: i8) -> Self {
        if c == 0 {
            Self::None
        } else {
            Self::Black
        }
    }

    pub fn cap(self) -> f64 {
        match self {
            Self::None => f64::INFINITY,
            Self::Black => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JoystickCmd {
    pub override_active: bool,
    /// Hand-wheel angle (deg).
    pub steering: f64,
    /// kPa.
    pub brake: f64,
    pub stamp: f64,
}

/// Latest remote state from the base station.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlagState {
    pub veh_flag: VehFlag,
    pub track_flag: TrackFlag,
    pub v_max_remote: f64,
    pub active_raceline: usize,
    pub last_remote_stamp: Option<f64>,
    pub enable_engine: bool,
    pub enable_driving: bool,
    pub throttle_lockout: bool,
    pub target_velocity: f64,
    pub joystick: JoystickCmd,
}

impl Default for FlagState {
    fn default() -> Self {
        Self {
            veh_flag: VehFlag::None,
            track_flag: TrackFlag::Green,
            v_max_remote: 0.0,
            active_raceline: 0,
            last_remote_stamp: None,
            enable_engine: false,
            enable_driving: false,
            throttle_lockout: false,
            target_velocity: 0.0,
            joystick: JoystickCmd { override_active: false, steering: 0.0, brake: 0.0, stamp: 0.0 },
        }
    }
}

/// Velocity cap from remote command and flags; 0 on remote timeout.
pub fn resolve_caps(flags: &FlagState, now: f64, cfg: &PlannerConfig) -> f64 {
    let fresh = flags.last_remote_stamp.is_some_and(|t| now - t <= cfg.remote_timeout);
    if !fresh {
        return 0.0;
    }
    flags.v_max_remote.max(0.0).min(flags.track_flag.cap()).min(flags.veh_flag.cap())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub v: f64,
    pub t: f64,
    /// Raceline station.
    pub s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PathStatus {
    Nominal = 0,
    Stopping = 1,
    /// Nearest point came from the grid fallback.
    Degraded = 2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalPath {
    pub stamp: f64,
    pub current_state: EstimatedState,
    pub points: Vec<PathPoint>,
    pub status: PathStatus,
}

/// Steps through the raceline from `s0`: `v_k = min(v_ref(s_k), v_cap)`,
/// or a ramp down from `stop_from` at `a_stop` when stopping.
pub fn build_path(
    raceline: &Raceline,
    s0: f64,
    v_cap: f64,
    stop_from: Option<f64>,
    cfg: &PlannerConfig,
) -> Vec<PathPoint> {
    let n = cfg.horizon_points();
    let dt = cfg.path_step;
    let mut pts = Vec::with_capacity(n + 1);
    let mut s = raceline.param(s0);
    let mut ramp = stop_from;
    for k in 0..=n {
        let e = raceline.eval(s);
        let mut v = e.v_ref.min(v_cap.max(0.0));
        if let Some(r) = ramp.as_mut() {
            if k > 0 {
                *r = (*r - cfg.a_stop * dt).max(0.0);
            }
            v = e.v_ref.min(*r);
        }
        pts.push(PathPoint { x: e.x, y: e.y, heading: e.heading, v, t: k as f64 * dt, s });
        s = raceline.param(s + v * dt);
    }
    pts
}

/// Rigid transform of global points into the frame of `pose` (x, y, yaw).
pub fn global_to_local(points: &[PathPoint], pose: (f64, f64, f64)) -> Vec<PathPoint> {
    let (px, py, yaw) = pose;
    let (s, c) = yaw.sin_cos();
    points
        .iter()
        .map(|p| {
            let dx = p.x - px;
            let dy = p.y - py;
            PathPoint { x: c * dx + s * dy, y: -s * dx + c * dy, heading: wrap_angle(p.heading - yaw), ..*p }
        })
        .collect()
}

/// Newton nearest point with a grid-search fallback; the flag reports
/// whether the fallback was used.
pub fn nearest_point(raceline: &Raceline, p: (f64, f64), s_warm: f64, cfg: &PlannerConfig) -> (f64, bool) {
    let q = Vector2::new(p.0, p.1);
    let n = raceline.newton_nearest(&q, s_warm, cfg.newton_max_iter);
    if n.converged {
        return (n.s, false);
    }
    let g = raceline.grid_nearest(&q, s_warm, cfg.grid_window, 0.5);
    let refined = raceline.newton_nearest(&q, g.s, cfg.newton_max_iter);
    (if refined.converged { refined.s } else { g.s }, true)
}

/// Everything the planner publishes in one cycle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanOutput {
    pub path: LocalPath,
    /// Path in ENU, for display and analysis.
    pub global: Vec<PathPoint>,
    pub s_star: f64,
    pub cross_track: f64,
    pub heading_error: f64,
    pub v_cap: f64,
    pub raceline: usize,
    pub fault: Option<String>,
}

#[derive(Debug, Clone)]
pub struct Planner {
    cfg: PlannerConfig,
    racelines: Vec<Raceline>,
    active: usize,
    s_warm: Option<f64>,
    stop: Option<(f64, f64)>,
}

impl Planner {
    pub fn new(cfg: PlannerConfig, racelines: Vec<Raceline>) -> Result<Self, String> {
        cfg.validate()?;
        if racelines.is_empty() {
            return Err("planner needs at least one raceline".into());
        }
        Ok(Self { cfg, racelines, active: 0, s_warm: None, stop: None })
    }

    pub fn config(&self) -> &PlannerConfig {
        &self.cfg
    }

    pub fn active(&self) -> usize {
        self.active
    }

    pub fn raceline(&self) -> &Raceline {
        &self.racelines[self.active]
    }

    pub fn racelines(&self) -> &[Raceline] {
        &self.racelines
    }

    fn locate(&mut self, idx: usize, p: (f64, f64)) -> (f64, bool) {
        let rl = &self.racelines[idx];
        let warm = match self.s_warm {
            Some(s) if idx == self.active => s,
            _ => rl.grid_nearest(&Vector2::new(p.0, p.1), 0.0, rl.length(), 1.0).s,
        };
        nearest_point(rl, p, warm, &self.cfg)
    }

    /// One planner cycle. `forced_stop` comes from the supervisor.
    pub fn cycle(&mut self, now: f64, est: &EstimatedState, flags: &FlagState, forced_stop: bool) -> PlanOutput {
        let pose = (est.position[0], est.position[1], est.yaw());
        let mut fault = None;

        let want = flags.active_raceline;
        if want != self.active && want < self.racelines.len() {
            let (s, _) = self.locate(want, (pose.0, pose.1));
            let rl = &self.racelines[want];
            let d = (rl.position(s) - Vector2::new(pose.0, pose.1)).norm();
            if d < self.cfg.switch_distance {
                self.active = want;
                self.s_warm = Some(s);
            }
        }

        let stale = now - est.stamp > self.cfg.localization_timeout || est.status == Status::Failed;
        let mut v_cap = resolve_caps(flags, now, &self.cfg);
        if stale {
            v_cap = 0.0;
        }
        let stopping = forced_stop || v_cap <= 0.0;
        if stopping {
            if self.stop.is_none() {
                self.stop = Some((now, est.speed()));
            }
        } else {
            self.stop = None;
        }
        let ramp = self.stop.map(|(t0, v0)| (v0 - self.cfg.a_stop * (now - t0)).max(0.0));

        let (s_star, fallback) = self.locate(self.active, (pose.0, pose.1));
        if fallback {
            fault = Some(format!("nearest point fell back to grid search at s = {s_star:.2}"));
        }
        self.s_warm = Some(s_star);
        let rl = &self.racelines[self.active];
        let global = build_path(rl, s_star, if stopping { 0.0 } else { v_cap }, ramp, &self.cfg);
        let points = global_to_local(&global, pose);
        let status = if fallback {
            PathStatus::Degraded
        } else if stopping {
            PathStatus::Stopping
        } else {
            PathStatus::Nominal
        };
        let q = Vector2::new(pose.0, pose.1);
        let cross_track = rl.lateral_offset(s_star, &q);
        let heading_error = wrap_angle(pose.2 - rl.eval(s_star).heading);
        PlanOutput {
            path: LocalPath { stamp: now, current_state: *est, points, status },
            global,
            s_star,
            cross_track,
            heading_error,
            v_cap: if stopping { ramp.unwrap_or(0.0) } else { v_cap },
            raceline: self.active,
            fault,
        }
    }
}

#[cfg(test)]
mod tests;

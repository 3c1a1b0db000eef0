//! Longitudinal PID with deadbands, RPM-table gear shifting, pure pursuit
//! with adaptive lookahead, joystick override and the dependency-timeout
//! fallback.

use serde::{Deserialize, Serialize};

use crate::planner::{JoystickCmd, LocalPath, PathPoint};
use crate::plant::ActuationCommand;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    pub i_max: f64,
    pub cmd_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ControlParams {
    pub rate: f64,
    pub lateral_error_threshold: f64,
    pub trajectory_timeout: f64,
    pub localization_timeout: f64,
    pub joystick_timeout: f64,
    pub throttle_deadband: f64,
    /// m/s on the velocity error.
    pub brake_deadband: f64,
    pub throttle_pid: PidGains,
    pub brake_pid: PidGains,
    /// Derivative low-pass time constant (s).
    pub derivative_tau: f64,
    pub lookahead_ratio: f64,
    pub lookahead_min: f64,
    pub lookahead_max: f64,
    pub steering_gain: f64,
    /// Upshift rpm for gears 1..=5.
    pub shift_up: [f64; 5],
    /// Downshift rpm for gears 2..=6.
    pub shift_down: [f64; 5],
    pub shift_time: f64,
    /// Path element whose speed is the reference.
    pub reference_index: usize,
    pub wheelbase: f64,
    pub steering_ratio: f64,
    pub max_steering: f64,
}

impl Default for ControlParams {
    fn default() -> Self {
        Self {
            rate: 50.0,
            lateral_error_threshold: 3.5,
            trajectory_timeout: 0.2,
            localization_timeout: 0.2,
            joystick_timeout: 5.0,
            throttle_deadband: 0.2,
            brake_deadband: 0.4,
            throttle_pid: PidGains { kp: 17.0, ki: 16.0, kd: 1.1, i_max: 0.5, cmd_max: 55.0 },
            brake_pid: PidGains { kp: 300.0, ki: 0.0, kd: 2.0, i_max: 15.0, cmd_max: 1800.0 },
            derivative_tau: 0.05,
            lookahead_ratio: 0.63,
            lookahead_min: 15.0,
            lookahead_max: 27.0,
            steering_gain: 1.0,
            shift_up: [4000.0, 4200.0, 4300.0, 4400.0, 4500.0],
            shift_down: [2000.0, 2100.0, 2200.0, 2300.0, 2400.0],
            shift_time: 0.5,
            reference_index: 2,
            wheelbase: 2.9718,
            steering_ratio: 15.0,
            max_steering: 230.0,
        }
    }
}

impl ControlParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.lookahead_min > self.lookahead_max {
            return Err("lookahead_min must not exceed lookahead_max".into());
        }
        if !(self.throttle_deadband > 0.0 && self.brake_deadband > 0.0) {
            return Err("deadbands must be positive".into());
        }
        let mono = |a: &[f64; 5]| a.windows(2).all(|w| w[0] < w[1]);
        if !mono(&self.shift_up) || !mono(&self.shift_down) {
            return Err("gear thresholds must increase with gear".into());
        }
        if self.shift_down.iter().zip(&self.shift_up).any(|(d, u)| d >= u) {
            return Err("downshift thresholds must sit below upshift thresholds".into());
        }
        Ok(())
    }

    /// Road-wheel limit (rad).
    pub fn max_road_wheel(&self) -> f64 {
        (self.max_steering / self.steering_ratio).to_radians()
    }
}

/// PID with clamped integral and a low-passed derivative of the error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pid {
    pub gains: PidGains,
    pub tau: f64,
    pub integral: f64,
    pub prev_error: f64,
    pub derivative: f64,
}

impl Pid {
    pub fn new(gains: PidGains, tau: f64) -> Self {
        Self { gains, tau, integral: 0.0, prev_error: 0.0, derivative: 0.0 }
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.prev_error = 0.0;
        self.derivative = 0.0;
    }

    /// Output clamped to `[0, cmd_max]`.
    pub fn step(&mut self, error: f64, dt: f64) -> f64 {
        let g = &self.gains;
        self.integral = (self.integral + error * dt).clamp(-g.i_max, g.i_max);
        let raw = (error - self.prev_error) / dt;
        self.derivative += (raw - self.derivative) * dt / (self.tau + dt);
        self.prev_error = error;
        (g.kp * error + g.ki * self.integral + g.kd * self.derivative).clamp(0.0, g.cmd_max)
    }
}

/// `min(Ld_min + k·v, Ld_max)`.
pub fn adaptive_lookahead(v: f64, p: &ControlParams) -> f64 {
    (p.lookahead_min + p.lookahead_ratio * v.max(0.0)).min(p.lookahead_max)
}

/// Road-wheel angle `atan(2 L sin(angle) / Ld)` clamped to the steering
/// limit, times the steering gain.
pub fn pursuit_road_wheel(lookahead_angle: f64, ld: f64, p: &ControlParams) -> f64 {
    let d = (2.0 * p.wheelbase * lookahead_angle.sin() / ld).atan() * p.steering_gain;
    d.clamp(-p.max_road_wheel(), p.max_road_wheel())
}

/// Hand-wheel angle in degrees for a road-wheel angle in radians.
pub fn hand_wheel_deg(road_wheel: f64, p: &ControlParams) -> f64 {
    (road_wheel.to_degrees() * p.steering_ratio).clamp(-p.max_steering, p.max_steering)
}

/// First crossing of the circle of radius `ld` about the origin along the
/// vehicle-frame path; `None` when the whole path is inside it.
pub fn find_lookahead_point(points: &[PathPoint], ld: f64) -> Option<(f64, f64)> {
    let d = |p: &PathPoint| p.x.hypot(p.y);
    if let Some(first) = points.first() {
        if d(first) >= ld {
            return Some((first.x, first.y));
        }
    }
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        if d(b) >= ld {
            // |a + t (b - a)| = ld for t in [0, 1]
            let (ex, ey) = (b.x - a.x, b.y - a.y);
            let qa = ex * ex + ey * ey;
            let qb = 2.0 * (a.x * ex + a.y * ey);
            let qc = a.x * a.x + a.y * a.y - ld * ld;
            let t = if qa > 0.0 { (-qb + (qb * qb - 4.0 * qa * qc).max(0.0).sqrt()) / (2.0 * qa) } else { 1.0 };
            let t = t.clamp(0.0, 1.0);
            return Some((a.x + t * ex, a.y + t * ey));
        }
    }
    None
}

/// Table-driven gear decision; returns `gear` to hold.
pub fn gear_logic(rpm: f64, gear: u8, p: &ControlParams) -> u8 {
    let g = gear.clamp(1, 6);
    if g < 6 && rpm > p.shift_up[(g - 1) as usize] {
        g + 1
    } else if g > 1 && rpm < p.shift_down[(g - 2) as usize] {
        g - 1
    } else {
        g
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Source {
    Autonomy,
    Joystick,
    Failsafe,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControllerOutput {
    pub throttle: f64,
    pub brake: f64,
    /// Hand-wheel (deg).
    pub steering: f64,
    pub gear_cmd: u8,
    pub source: Source,
    pub v_ref: f64,
    pub lookahead_distance: f64,
    pub lookahead_angle: f64,
    /// Angle between car heading and the lookahead point's path heading.
    pub heading_error: f64,
    /// Set when the path was shorter than the lookahead distance.
    pub short_path: bool,
}

/// Inputs of one control cycle.
#[derive(Debug, Clone, Copy)]
pub struct ControlInputs<'a> {
    pub now: f64,
    pub path: Option<&'a LocalPath>,
    /// Stamp of the newest localization estimate.
    pub localization_stamp: Option<f64>,
    pub v_car: f64,
    pub rpm: f64,
    pub gear: u8,
    pub joystick: Option<JoystickCmd>,
    pub throttle_lockout: bool,
}

#[derive(Debug, Clone)]
pub struct Controller {
    params: ControlParams,
    throttle_pid: Pid,
    brake_pid: Pid,
    gear_cmd: u8,
    last_shift: f64,
    last_steering: f64,
    counter: u8,
    last_time: Option<f64>,
}

impl Controller {
    pub fn new(params: ControlParams, gear: u8) -> Result<Self, String> {
        params.validate()?;
        Ok(Self {
            throttle_pid: Pid::new(params.throttle_pid, params.derivative_tau),
            brake_pid: Pid::new(params.brake_pid, params.derivative_tau),
            params,
            gear_cmd: gear.clamp(1, 6),
            last_shift: f64::NEG_INFINITY,
            last_steering: 0.0,
            counter: 0,
            last_time: None,
        })
    }

    pub fn params(&self) -> &ControlParams {
        &self.params
    }

    pub fn throttle_pid(&self) -> &Pid {
        &self.throttle_pid
    }

    pub fn brake_pid(&self) -> &Pid {
        &self.brake_pid
    }

    /// `(throttle, brake)` for reference and car speed.
    pub fn longitudinal(&mut self, v_ref: f64, v_car: f64, dt: f64) -> (f64, f64) {
        let dv = v_ref - v_car;
        if dv > self.params.throttle_deadband {
            self.brake_pid.reset();
            (self.throttle_pid.step(dv, dt), 0.0)
        } else if dv < -self.params.brake_deadband {
            self.throttle_pid.reset();
            (0.0, self.brake_pid.step(-dv, dt))
        } else {
            // engine braking band
            self.throttle_pid.reset();
            self.brake_pid.reset();
            (0.0, 0.0)
        }
    }

    /// Gear command with the shift hold applied.
    pub fn gear(&mut self, now: f64, rpm: f64, gear: u8) -> u8 {
        if now - self.last_shift < self.params.shift_time - 1e-9 {
            return self.gear_cmd;
        }
        let g = gear_logic(rpm, gear, &self.params);
        if g != gear {
            self.last_shift = now;
        }
        self.gear_cmd = g;
        g
    }

    fn failsafe(&self) -> ControllerOutput {
        ControllerOutput {
            throttle: 0.0,
            brake: self.params.brake_pid.cmd_max,
            steering: self.last_steering,
            gear_cmd: self.gear_cmd,
            source: Source::Failsafe,
            v_ref: 0.0,
            lookahead_distance: 0.0,
            lookahead_angle: 0.0,
            heading_error: 0.0,
            short_path: false,
        }
    }

    pub fn cycle(&mut self, inp: &ControlInputs) -> ControllerOutput {
        let dt = match self.last_time {
            Some(t) if inp.now > t => inp.now - t,
            _ => 1.0 / self.params.rate,
        };
        self.last_time = Some(inp.now);
        let p = &self.params;

        let path_ok = inp.path.is_some_and(|pa| inp.now - pa.stamp <= p.trajectory_timeout && !pa.points.is_empty());
        let loc_ok = inp.localization_stamp.is_some_and(|t| inp.now - t <= p.localization_timeout);
        let joy = inp.joystick.filter(|j| j.override_active);
        let joy_stale = joy.is_some_and(|j| inp.now - j.stamp > p.joystick_timeout);
        if !loc_ok || joy_stale || (joy.is_none() && !path_ok) {
            self.throttle_pid.reset();
            self.brake_pid.reset();
            return self.failsafe();
        }
        if let Some(j) = joy {
            self.throttle_pid.reset();
            self.brake_pid.reset();
            let steering = j.steering.clamp(-p.max_steering, p.max_steering);
            self.last_steering = steering;
            return ControllerOutput {
                throttle: 0.0,
                brake: j.brake.clamp(0.0, p.brake_pid.cmd_max),
                steering,
                gear_cmd: self.gear_cmd,
                source: Source::Joystick,
                v_ref: 0.0,
                lookahead_distance: 0.0,
                lookahead_angle: 0.0,
                heading_error: 0.0,
                short_path: false,
            };
        }

        let path = inp.path.expect("checked above");
        let idx = p.reference_index.min(path.points.len() - 1);
        let v_ref = path.points[idx].v;
        let (mut throttle, brake) = self.longitudinal(v_ref, inp.v_car, dt);
        if inp.throttle_lockout {
            throttle = 0.0;
        }
        let gear_cmd = self.gear(inp.now, inp.rpm, inp.gear);

        let p = &self.params;
        let ld = adaptive_lookahead(inp.v_car, p);
        let (target, short_path) = match find_lookahead_point(&path.points, ld) {
            Some(t) => (t, false),
            None => {
                let l = path.points.last().expect("non-empty");
                ((l.x, l.y), true)
            }
        };
        let lookahead_angle = target.1.atan2(target.0);
        let delta = if short_path && target.0.hypot(target.1) < 1e-6 {
            0.0
        } else {
            pursuit_road_wheel(lookahead_angle, ld, p)
        };
        let steering = hand_wheel_deg(delta, p);
        self.last_steering = steering;
        let heading_error = path
            .points
            .iter()
            .min_by(|a, b| ((a.x - target.0).hypot(a.y - target.1)).total_cmp(&(b.x - target.0).hypot(b.y - target.1)))
            .map(|q| -q.heading)
            .unwrap_or(0.0);
        ControllerOutput {
            throttle,
            brake,
            steering,
            gear_cmd,
            source: Source::Autonomy,
            v_ref,
            lookahead_distance: ld,
            lookahead_angle,
            heading_error,
            short_path,
        }
    }

    /// Wraps an output in a drive-by-wire frame with the next counter.
    pub fn command(&mut self, out: &ControllerOutput) -> ActuationCommand {
        self.counter = self.counter.wrapping_add(1);
        ActuationCommand {
            throttle: out.throttle,
            brake: out.brake,
            steering: out.steering,
            gear: out.gear_cmd,
            rolling_counter: self.counter,
        }
    }
}

#[cfg(test)]
mod tests;

//! Ground-truth vehicle: dynamic bicycle with linear tires, drivetrain,
//! drive-by-wire actuators, the low-level state machine with its
//! rolling-counter watchdog, and GNSS/IMU emulation.

mod actuator;
mod params;
pub mod sensors;

pub use actuator::{Actuator, ActuatorFault, Channel};
pub use params::VehicleParams;
pub use sensors::{GnssFix, ImuSample, RtkStatus, SensorConfig, SensorFaults, Sensors};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const GRAVITY: f64 = 9.81;
/// Largest integration step; longer steps are split.
pub const MAX_SUBSTEP: f64 = 0.002;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlantError {
    #[error("invalid vehicle parameters: {0}")]
    Params(String),
    #[error("non-finite plant state; simulation frozen")]
    NonFinite,
    #[error("cannot go from {from:?} to {to:?}")]
    Transition { from: LowLevel, to: LowLevel },
}

/// Low-level (drive-by-wire) state machine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LowLevel {
    Uninit,
    ActTest,
    EngineOn,
    Driving,
    SupervisedStop,
    Emergency,
}

impl LowLevel {
    pub fn code(self) -> u8 {
        self as u8
    }

    /// Engine running and the watchdog armed.
    pub fn is_powered(self) -> bool {
        matches!(self, LowLevel::EngineOn | LowLevel::Driving | LowLevel::SupervisedStop)
    }
}

/// One drive-by-wire command frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ActuationCommand {
    /// Throttle (%).
    pub throttle: f64,
    /// Brake line pressure (kPa).
    pub brake: f64,
    /// Hand-wheel angle (deg).
    pub steering: f64,
    pub gear: u8,
    pub rolling_counter: u8,
}

impl ActuationCommand {
    pub fn clamped(&self, p: &VehicleParams) -> Self {
        Self {
            throttle: self.throttle.clamp(0.0, p.max_throttle),
            brake: self.brake.clamp(0.0, p.max_brake),
            steering: self.steering.clamp(-p.max_steering, p.max_steering),
            gear: self.gear.clamp(1, 6),
            rolling_counter: self.rolling_counter,
        }
    }
}

/// True when `new` is a forward step of the 8-bit counter from `old`.
pub fn counter_advanced(old: u8, new: u8) -> bool {
    (1..=127).contains(&new.wrapping_sub(old))
}

/// Outcome of presenting a command to the watchdog.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CommandStatus {
    Accepted,
    Stale,
}

/// Ground-truth snapshot published every plant tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub time: f64,
    pub x: f64,
    pub y: f64,
    pub yaw: f64,
    /// Body-frame velocity (m/s).
    pub v_x: f64,
    pub v_y: f64,
    pub yaw_rate: f64,
    /// Roll equal to the local bank; positive when the left side is lower.
    pub roll: f64,
    pub roll_rate: f64,
    /// Body-frame specific force (m/s²), what an ideal accelerometer reads.
    pub accel_x: f64,
    pub accel_y: f64,
    pub accel_z: f64,
    pub engine_rpm: f64,
    pub gear: u8,
    pub road_wheel_angle: f64,
    /// Actual hand-wheel angle (deg).
    pub steering_deg: f64,
    pub brake_pressure_front: f64,
    pub brake_pressure_rear: f64,
    pub throttle_actual: f64,
    pub lowlevel: LowLevel,
    pub rolling_counter: u8,
}

impl PlantState {
    pub fn speed(&self) -> f64 {
        self.v_x.hypot(self.v_y)
    }

    /// Front axle slip angle.
    pub fn slip_front(&self, p: &VehicleParams) -> f64 {
        if self.v_x <= 0.0 {
            return 0.0;
        }
        self.road_wheel_angle - (self.v_y + p.l_f * self.yaw_rate).atan2(self.v_x)
    }

    pub fn slip_rear(&self, p: &VehicleParams) -> f64 {
        if self.v_x <= 0.0 {
            return 0.0;
        }
        -(self.v_y - p.l_r * self.yaw_rate).atan2(self.v_x)
    }
}

/// Why the plant entered EMERGENCY.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EmergencyCause {
    CounterStale,
    Supervisor,
}

#[derive(Debug, Clone)]
pub struct Plant {
    params: VehicleParams,
    state: PlantState,
    steering: Actuator,
    throttle: Actuator,
    brake: Actuator,
    cmd: ActuationCommand,
    last_counter: Option<u8>,
    last_advance: f64,
    pending_shift: Option<(u8, f64)>,
    controlled_stop: bool,
    latched_steering: f64,
    emergency: Option<(EmergencyCause, f64)>,
    frozen: bool,
}

impl Plant {
    pub fn new(params: VehicleParams) -> Result<Self, PlantError> {
        params.validate()?;
        let state = PlantState {
            time: 0.0,
            x: 0.0,
            y: 0.0,
            yaw: 0.0,
            v_x: 0.0,
            v_y: 0.0,
            yaw_rate: 0.0,
            roll: 0.0,
            roll_rate: 0.0,
            accel_x: 0.0,
            accel_y: 0.0,
            accel_z: GRAVITY,
            engine_rpm: 0.0,
            gear: 1,
            road_wheel_angle: 0.0,
            steering_deg: 0.0,
            brake_pressure_front: 0.0,
            brake_pressure_rear: 0.0,
            throttle_actual: 0.0,
            lowlevel: LowLevel::Uninit,
            rolling_counter: 0,
        };
        Ok(Self {
            steering: Actuator::new(params.steering_tau, params.steering_rate),
            throttle: Actuator::new(params.throttle_tau, params.throttle_rate),
            brake: Actuator::new(0.0, params.brake_rate),
            params,
            state,
            cmd: ActuationCommand { throttle: 0.0, brake: 0.0, steering: 0.0, gear: 1, rolling_counter: 0 },
            last_counter: None,
            last_advance: 0.0,
            pending_shift: None,
            controlled_stop: false,
            latched_steering: 0.0,
            emergency: None,
            frozen: false,
        })
    }

    /// A car already rolling in DRIVING at the given pose, in the gear the
    /// default shift table would hold at that speed.
    pub fn driving_at(params: VehicleParams, x: f64, y: f64, yaw: f64, speed: f64) -> Result<Self, PlantError> {
        let mut p = Self::new(params)?;
        let gear = (1..=6u8).find(|g| p.params.rpm_for_speed(speed, *g) < 5000.0).unwrap_or(6);
        let s = &mut p.state;
        s.x = x;
        s.y = y;
        s.yaw = yaw;
        s.v_x = speed;
        s.gear = gear;
        s.lowlevel = LowLevel::Driving;
        s.engine_rpm = p.params.rpm_for_speed(speed, gear).max(p.params.idle_rpm);
        p.cmd.gear = gear;
        Ok(p)
    }

    /// A car at rest in UNINIT at the given pose.
    pub fn at_rest(params: VehicleParams, x: f64, y: f64, yaw: f64) -> Result<Self, PlantError> {
        let mut p = Self::new(params)?;
        p.state.x = x;
        p.state.y = y;
        p.state.yaw = yaw;
        Ok(p)
    }

    pub fn params(&self) -> &VehicleParams {
        &self.params
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn is_frozen(&self) -> bool {
        self.frozen
    }

    pub fn emergency(&self) -> Option<(EmergencyCause, f64)> {
        self.emergency
    }

    pub fn last_command(&self) -> &ActuationCommand {
        &self.cmd
    }

    pub fn set_actuator_fault(&mut self, ch: Channel, fault: Option<ActuatorFault>) {
        match ch {
            Channel::Steering => self.steering.fault = fault,
            Channel::Throttle => self.throttle.fault = fault,
            Channel::Brake => self.brake.fault = fault,
        }
    }

    /// Sweeps steering ±10° and pulses the brake with the car at rest,
    /// checking that each echo settles on its command. On success the
    /// state machine moves to ENGINE_ON.
    pub fn run_actuation_test(&mut self) -> Result<(), Channel> {
        assert_eq!(self.state.lowlevel, LowLevel::Uninit, "actuation test runs from UNINIT");
        self.state.lowlevel = LowLevel::ActTest;
        let dt = 0.001;
        let settle = 500;
        let phases: [(Channel, f64, f64); 4] = [
            (Channel::Steering, 10.0, 3.0),
            (Channel::Steering, -10.0, 3.0),
            (Channel::Brake, 1000.0, 100.0),
            (Channel::Brake, 0.0, 100.0),
        ];
        for (ch, target, tol) in phases {
            for _ in 0..settle {
                match ch {
                    Channel::Steering => self.steering.step(target, dt),
                    Channel::Brake => self.brake.step(target, dt),
                    Channel::Throttle => self.throttle.step(target, dt),
                };
            }
            let echo = match ch {
                Channel::Steering => self.steering.value,
                Channel::Brake => self.brake.value,
                Channel::Throttle => self.throttle.value,
            };
            if (echo - target).abs() > tol {
                self.state.lowlevel = LowLevel::Uninit;
                return Err(ch);
            }
        }
        for _ in 0..settle {
            self.steering.step(0.0, dt);
        }
        self.sync_actuators();
        self.state.lowlevel = LowLevel::EngineOn;
        self.state.engine_rpm = self.params.idle_rpm;
        self.last_advance = self.state.time;
        Ok(())
    }

    pub fn enable_driving(&mut self) -> Result<(), PlantError> {
        if self.state.lowlevel != LowLevel::EngineOn {
            return Err(PlantError::Transition { from: self.state.lowlevel, to: LowLevel::Driving });
        }
        self.state.lowlevel = LowLevel::Driving;
        Ok(())
    }

    /// Presents a command to the rolling-counter watchdog. Only commands
    /// whose counter advanced are acted upon.
    pub fn apply_command(&mut self, cmd: &ActuationCommand) -> CommandStatus {
        let advanced = match self.last_counter {
            None => true,
            Some(old) => counter_advanced(old, cmd.rolling_counter),
        };
        if !advanced {
            return CommandStatus::Stale;
        }
        self.last_counter = Some(cmd.rolling_counter);
        self.last_advance = self.state.time;
        self.state.rolling_counter = cmd.rolling_counter;
        self.cmd = cmd.clamped(&self.params);
        CommandStatus::Accepted
    }

    pub fn request_emergency(&mut self) {
        self.enter_emergency(EmergencyCause::Supervisor);
    }

    /// Marks a supervised stop in progress; the car drops to
    /// SUPERVISED_STOP once slower than the stop threshold.
    pub fn request_controlled_stop(&mut self) {
        self.controlled_stop = true;
    }

    fn enter_emergency(&mut self, cause: EmergencyCause) {
        if self.state.lowlevel == LowLevel::Emergency {
            return;
        }
        self.latched_steering = self.steering.value;
        self.state.lowlevel = LowLevel::Emergency;
        self.emergency = Some((cause, self.state.time));
        self.pending_shift = None;
    }

    fn sync_actuators(&mut self) {
        let s = &mut self.state;
        s.steering_deg = self.steering.value;
        s.road_wheel_angle = (self.steering.value / self.params.steering_ratio).to_radians();
        s.throttle_actual = self.throttle.value;
        s.brake_pressure_front = self.brake.value;
        s.brake_pressure_rear = self.brake.value;
    }

    /// Advances by `dt` seconds on ground banked by `bank` (rad).
    pub fn step(&mut self, dt: f64, bank: f64) -> Result<&PlantState, PlantError> {
        if self.frozen {
            return Err(PlantError::NonFinite);
        }
        let n = (dt / MAX_SUBSTEP).ceil().max(1.0) as usize;
        let h = dt / n as f64;
        for _ in 0..n {
            self.substep(h, bank);
        }
        let s = &self.state;
        let vals = [s.x, s.y, s.yaw, s.v_x, s.v_y, s.yaw_rate, s.engine_rpm, s.accel_x, s.accel_y];
        if vals.iter().any(|v| !v.is_finite()) {
            self.frozen = true;
            return Err(PlantError::NonFinite);
        }
        Ok(&self.state)
    }

    fn substep(&mut self, dt: f64, bank: f64) {
        let p = self.params.clone();
        self.state.time += dt;
        let t = self.state.time;
        if self.state.lowlevel.is_powered() && t - self.last_advance > p.watchdog + 1e-9 {
            self.enter_emergency(EmergencyCause::CounterStale);
        }

        let (thr_target, brake_target, steer_target) = match self.state.lowlevel {
            LowLevel::Driving => (self.cmd.throttle, self.cmd.brake, self.cmd.steering),
            LowLevel::Emergency => (0.0, p.max_brake, self.latched_steering),
            LowLevel::SupervisedStop => (0.0, p.max_brake * 0.5, self.steering.value),
            _ => (0.0, self.cmd.brake, self.steering.value),
        };
        self.steering.step(steer_target, dt);
        if self.state.lowlevel == LowLevel::Emergency {
            // the engine is cut, so the throttle echo drops at once
            self.throttle.value = 0.0;
        } else {
            self.throttle.step(thr_target, dt);
        }
        self.brake.step(brake_target, dt);
        self.sync_actuators();

        // gearbox: one step toward the commanded gear, engaged after shift_time
        if self.state.lowlevel == LowLevel::Driving {
            if let Some((g, at)) = self.pending_shift {
                if t + 1e-12 >= at {
                    self.state.gear = g;
                    self.pending_shift = None;
                }
            } else if self.cmd.gear != self.state.gear {
                let g = if self.cmd.gear > self.state.gear { self.state.gear + 1 } else { self.state.gear - 1 };
                self.pending_shift = Some((g, t + p.shift_time));
            }
        }

        let s = &mut self.state;
        let delta = s.road_wheel_angle;
        let engine_live = matches!(s.lowlevel, LowLevel::Driving);
        let rpm_wheel = p.rpm_for_speed(s.v_x.max(0.0), s.gear);
        let drive = if engine_live && rpm_wheel < p.redline_rpm {
            let ratio = p.gear_ratios[(s.gear - 1) as usize] * p.final_drive;
            s.throttle_actual / 100.0 * p.torque_at(rpm_wheel.max(p.idle_rpm)) * ratio / p.wheel_radius
        } else {
            0.0
        };
        let moving = s.v_x > 1e-6;
        let brake_force = if moving { self.brake.value * p.brake_gain } else { 0.0 };
        let (fbf, fbr) = (brake_force * p.brake_front_share, brake_force * (1.0 - p.brake_front_share));
        let resist = if moving { p.drag_coeff * s.v_x * s.v_x + p.rolling_resistance } else { 0.0 };
        let g_lat = GRAVITY * bank.sin();

        let (ax_kin, ay_kin);
        if s.v_x < p.kinematic_speed {
            let fx = drive - fbf * delta.cos() - fbr - resist;
            let mut vx = s.v_x + fx / p.mass * dt;
            if vx < 0.0 {
                vx = 0.0;
            }
            ax_kin = (vx - s.v_x) / dt;
            s.v_x = vx;
            s.yaw_rate = s.v_x * delta.tan() / p.wheelbase;
            s.v_y = s.yaw_rate * p.l_r;
            ay_kin = s.v_x * s.yaw_rate;
        } else {
            let sf = delta - (s.v_y + p.l_f * s.yaw_rate).atan2(s.v_x);
            let sr = -(s.v_y - p.l_r * s.yaw_rate).atan2(s.v_x);
            let fyf = p.c_f * sf;
            let fyr = p.c_r * sr;
            let fx = drive - fbr - fbf * delta.cos() - fyf * delta.sin() - resist;
            let fy = fyf * delta.cos() + fyr - fbf * delta.sin();
            let vx_dot = fx / p.mass + s.v_y * s.yaw_rate;
            let vy_dot = fy / p.mass - s.v_x * s.yaw_rate + g_lat;
            let r_dot = (p.l_f * (fyf * delta.cos() - fbf * delta.sin()) - p.l_r * fyr) / p.yaw_inertia;
            ax_kin = vx_dot - s.v_y * s.yaw_rate;
            ay_kin = vy_dot + s.v_x * s.yaw_rate;
            s.v_x = (s.v_x + vx_dot * dt).max(0.0);
            s.v_y += vy_dot * dt;
            s.yaw_rate += r_dot * dt;
        }
        let (sy, cy) = s.yaw.sin_cos();
        s.x += (s.v_x * cy - s.v_y * sy) * dt;
        s.y += (s.v_x * sy + s.v_y * cy) * dt;
        s.yaw = wrap_angle(s.yaw + s.yaw_rate * dt);
        s.roll_rate = (bank - s.roll) / dt;
        s.roll = bank;
        // accelerometer: kinematic acceleration minus gravity, in the body frame
        s.accel_x = ax_kin;
        s.accel_y = ay_kin - g_lat;
        s.accel_z = GRAVITY * bank.cos();

        s.engine_rpm = match s.lowlevel {
            LowLevel::Driving => p.rpm_for_speed(s.v_x, s.gear).max(p.idle_rpm),
            LowLevel::EngineOn | LowLevel::SupervisedStop => p.idle_rpm,
            LowLevel::Emergency => {
                let r = s.engine_rpm * (-dt / p.engine_spindown_tau).exp();
                if r < 50.0 {
                    0.0
                } else {
                    r
                }
            }
            LowLevel::Uninit | LowLevel::ActTest => 0.0,
        };

        if self.controlled_stop && s.lowlevel == LowLevel::Driving && s.v_x < p.supervised_stop_speed {
            s.lowlevel = LowLevel::SupervisedStop;
        }
    }
}

pub fn wrap_angle(a: f64) -> f64 {
    let w = (a + std::f64::consts::PI).rem_euclid(std::f64::consts::TAU) - std::f64::consts::PI;
    if w <= -std::f64::consts::PI {
        w + std::f64::consts::TAU
    } else {
        w
    }
}

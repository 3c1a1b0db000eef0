use serde::{Deserialize, Serialize};

use super::PlantError;

/// Physical and actuator parameters of the simulated car.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VehicleParams {
    pub wheelbase: f64,
    pub steering_ratio: f64,
    /// Hand-wheel limit (deg).
    pub max_steering: f64,
    /// Throttle limit (%).
    pub max_throttle: f64,
    /// Brake limit (kPa).
    pub max_brake: f64,
    pub mass: f64,
    pub l_f: f64,
    pub l_r: f64,
    pub yaw_inertia: f64,
    pub c_f: f64,
    pub c_r: f64,
    /// Aerodynamic drag `F = drag_coeff * v²`.
    pub drag_coeff: f64,
    pub rolling_resistance: f64,
    pub width: f64,
    pub wheel_radius: f64,
    pub final_drive: f64,
    pub gear_ratios: [f64; 6],
    /// Engine torque at full throttle, `(rpm, N·m)` with increasing rpm.
    pub torque_map: Vec<(f64, f64)>,
    pub idle_rpm: f64,
    pub redline_rpm: f64,
    /// Gear engagement delay (s).
    pub shift_time: f64,
    /// Total brake force per kPa of line pressure (N/kPa).
    pub brake_gain: f64,
    pub brake_front_share: f64,
    pub steering_tau: f64,
    /// Hand-wheel slew limit (deg/s).
    pub steering_rate: f64,
    pub throttle_tau: f64,
    pub throttle_rate: f64,
    /// Brake slew limit (kPa/s); the brake has no lag beyond the slew.
    pub brake_rate: f64,
    /// Window within which the rolling counter must advance (s).
    pub watchdog: f64,
    /// Engine spin-down time constant after shutdown (s).
    pub engine_spindown_tau: f64,
    /// Below this speed the kinematic model replaces the tire model.
    pub kinematic_speed: f64,
    pub supervised_stop_speed: f64,
}

impl Default for VehicleParams {
    fn default() -> Self {
        let wheelbase = 2.9718;
        let l_f = 1.60;
        Self {
            wheelbase,
            steering_ratio: 15.0,
            max_steering: 230.0,
            max_throttle: 55.0,
            max_brake: 1800.0,
            mass: 750.0,
            l_f,
            l_r: wheelbase - l_f,
            yaw_inertia: 1000.0,
            c_f: 1.6e5,
            c_r: 2.2e5,
            drag_coeff: 0.8,
            rolling_resistance: 150.0,
            width: 1.9,
            wheel_radius: 0.3,
            final_drive: 3.0,
            gear_ratios: [2.9, 2.1, 1.65, 1.35, 1.15, 1.0],
            torque_map: vec![
                (1000.0, 300.0),
                (2000.0, 420.0),
                (3000.0, 520.0),
                (4000.0, 580.0),
                (5500.0, 600.0),
                (7200.0, 520.0),
            ],
            idle_rpm: 1000.0,
            redline_rpm: 7200.0,
            shift_time: 0.5,
            brake_gain: 6.25,
            brake_front_share: 0.6,
            steering_tau: 0.05,
            steering_rate: 900.0,
            throttle_tau: 0.05,
            throttle_rate: 400.0,
            brake_rate: 1.0e5,
            watchdog: 0.1,
            engine_spindown_tau: 0.4,
            kinematic_speed: 1.0,
            supervised_stop_speed: 0.5,
        }
    }
}

impl VehicleParams {
    pub fn validate(&self) -> Result<(), PlantError> {
        let bad = |what: &str| Err(PlantError::Params(what.to_string()));
        if (self.l_f + self.l_r - self.wheelbase).abs() > 1e-9 {
            return bad("l_f + l_r must equal the wheelbase");
        }
        let positive = [
            ("wheelbase", self.wheelbase),
            ("steering_ratio", self.steering_ratio),
            ("max_steering", self.max_steering),
            ("max_throttle", self.max_throttle),
            ("max_brake", self.max_brake),
            ("mass", self.mass),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("yaw_inertia", self.yaw_inertia),
            ("c_f", self.c_f),
            ("c_r", self.c_r),
            ("wheel_radius", self.wheel_radius),
            ("final_drive", self.final_drive),
            ("shift_time", self.shift_time),
            ("brake_gain", self.brake_gain),
            ("watchdog", self.watchdog),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return bad(&format!("{name} must be positive"));
            }
        }
        if self.gear_ratios.iter().any(|g| !(*g > 0.0)) {
            return bad("gear ratios must be positive");
        }
        if self.torque_map.len() < 2 || self.torque_map.windows(2).any(|w| w[1].0 <= w[0].0) {
            return bad("torque map needs increasing rpm breakpoints");
        }
        let (lo, hi) = (self.torque_map[0].0, self.torque_map[self.torque_map.len() - 1].0);
        if lo > self.idle_rpm || hi < self.redline_rpm {
            return bad("torque map must cover idle to redline");
        }
        Ok(())
    }

    /// Road-wheel angle limit (rad).
    pub fn max_road_wheel(&self) -> f64 {
        (self.max_steering / self.steering_ratio).to_radians()
    }

    /// Full-throttle engine torque at `rpm`, linearly interpolated and
    /// held flat outside the map.
    pub fn torque_at(&self, rpm: f64) -> f64 {
        let m = &self.torque_map;
        if rpm <= m[0].0 {
            return m[0].1;
        }
        if rpm >= m[m.len() - 1].0 {
            return m[m.len() - 1].1;
        }
        let j = m.partition_point(|p| p.0 <= rpm) - 1;
        let t = (rpm - m[j].0) / (m[j + 1].0 - m[j].0);
        m[j].1 + t * (m[j + 1].1 - m[j].1)
    }

    /// Engine speed for wheel speed `v` in `gear` (1-based).
    pub fn rpm_for_speed(&self, v: f64, gear: u8) -> f64 {
        let ratio = self.gear_ratios[(gear.clamp(1, 6) - 1) as usize] * self.final_drive;
        v / self.wheel_radius * ratio * 60.0 / std::f64::consts::TAU
    }

    /// Understeer gradient `m/L (l_r/C_f - l_f/C_r)` (rad per m/s²).
    pub fn understeer_gradient(&self) -> f64 {
        self.mass / self.wheelbase * (self.l_r / self.c_f - self.l_f / self.c_r)
    }
}

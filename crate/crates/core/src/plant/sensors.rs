//! GNSS (20 Hz) and IMU (125 Hz) emulation on top of the plant truth.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::PlantState;
use crate::runtime::RngStreams;

/// Reported variances never go below this.
pub const MIN_VARIANCE: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RtkStatus {
    RtkFixed,
    RtkFloat,
    Single,
    None,
}

impl RtkStatus {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Some(match c {
            0 => Self::RtkFixed,
            1 => Self::RtkFloat,
            2 => Self::Single,
            3 => Self::None,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GnssFix {
    pub stamp: f64,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
    /// Variance per axis (m²).
    pub variance: [f64; 3],
    pub heading_variance: f64,
    pub rtk_status: RtkStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub stamp: f64,
    /// Body angular rate (rad/s): roll, pitch, yaw.
    pub gyro: [f64; 3],
    /// Body specific force (m/s²).
    pub accel: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorConfig {
    pub sigma_fixed: f64,
    pub sigma_float: f64,
    pub sigma_single: f64,
    pub sigma_none: f64,
    pub heading_sigma_deg: f64,
    /// Gyro white noise density (rad/s/√Hz).
    pub gyro_noise_density: f64,
    pub gyro_bias: [f64; 3],
    pub accel_noise: f64,
    pub accel_bias: [f64; 3],
    /// Vibration: AR(1) noise with this stationary σ and pole.
    pub vibration_sigma: f64,
    pub vibration_pole: f64,
    pub imu_rate: f64,
    pub gnss_rate: f64,
}

impl Default for SensorConfig {
    fn default() -> Self {
        Self {
            sigma_fixed: 0.02,
            sigma_float: 0.2,
            sigma_single: 1.5,
            sigma_none: 5.0,
            heading_sigma_deg: 0.2,
            gyro_noise_density: 0.005,
            gyro_bias: [0.0, 0.0, 0.002],
            accel_noise: 0.05,
            accel_bias: [0.05, -0.03, 0.0],
            vibration_sigma: 0.8,
            vibration_pole: 0.6,
            imu_rate: 125.0,
            gnss_rate: 20.0,
        }
    }
}

impl SensorConfig {
    pub fn noiseless() -> Self {
        Self {
            sigma_fixed: 0.0,
            sigma_float: 0.0,
            sigma_single: 0.0,
            sigma_none: 0.0,
            heading_sigma_deg: 0.0,
            gyro_noise_density: 0.0,
            gyro_bias: [0.0; 3],
            accel_noise: 0.0,
            accel_bias: [0.0; 3],
            vibration_sigma: 0.0,
            ..Self::default()
        }
    }

    pub fn sigma_for(&self, status: RtkStatus) -> f64 {
        match status {
            RtkStatus::RtkFixed => self.sigma_fixed,
            RtkStatus::RtkFloat => self.sigma_float,
            RtkStatus::Single => self.sigma_single,
            RtkStatus::None => self.sigma_none,
        }
    }

    /// Heading noise grows with the position noise outside RTK_FIXED.
    pub fn heading_sigma_for(&self, status: RtkStatus) -> f64 {
        let base = self.heading_sigma_deg.to_radians();
        match status {
            RtkStatus::RtkFixed => base,
            RtkStatus::RtkFloat => 3.0 * base,
            RtkStatus::Single | RtkStatus::None => 10.0 * base,
        }
    }
}

/// Time intervals (s) during which sensor faults are active.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensorFaults {
    /// No fixes are emitted inside these windows.
    pub rtk_dropout: Vec<(f64, f64)>,
    /// Fix quality forced to the given status.
    pub degrade: Vec<(f64, f64, RtkStatus)>,
    /// Position offset (dx, dy) added to fixes inside the window.
    pub gnss_outlier: Vec<(f64, f64, f64, f64)>,
}

fn inside(t: f64, t0: f64, t1: f64) -> bool {
    t >= t0 && t <= t1
}

impl SensorFaults {
    pub fn dropout_at(&self, t: f64) -> bool {
        self.rtk_dropout.iter().any(|&(a, b)| inside(t, a, b))
    }

    pub fn status_at(&self, t: f64) -> RtkStatus {
        self.degrade.iter().rev().find(|d| inside(t, d.0, d.1)).map(|d| d.2).unwrap_or(RtkStatus::RtkFixed)
    }

    pub fn outlier_at(&self, t: f64) -> (f64, f64) {
        self.gnss_outlier.iter().filter(|o| inside(t, o.0, o.1)).fold((0.0, 0.0), |acc, o| (acc.0 + o.2, acc.1 + o.3))
    }
}

#[derive(Debug, Clone)]
pub struct Sensors {
    config: SensorConfig,
    faults: SensorFaults,
    gnss_rng: ChaCha8Rng,
    gyro_rng: ChaCha8Rng,
    accel_rng: ChaCha8Rng,
    vibration_rng: ChaCha8Rng,
    vibration: [f64; 3],
}

fn gauss(rng: &mut impl Rng) -> f64 {
    StandardNormal.sample(rng)
}

impl Sensors {
    pub fn new(config: SensorConfig, faults: SensorFaults, rng: &RngStreams) -> Self {
        Self {
            config,
            faults,
            gnss_rng: rng.stream("gnss"),
            gyro_rng: rng.stream("imu.gyro"),
            accel_rng: rng.stream("imu.accel"),
            vibration_rng: rng.stream("imu.vibration"),
            vibration: [0.0; 3],
        }
    }

    pub fn config(&self) -> &SensorConfig {
        &self.config
    }

    pub fn faults(&self) -> &SensorFaults {
        &self.faults
    }

    /// A fix from the truth at `truth.time`, or `None` during a dropout.
    pub fn sample_gnss(&mut self, truth: &PlantState) -> Option<GnssFix> {
        let t = truth.time;
        if self.faults.dropout_at(t) {
            return None;
        }
        let status = self.faults.status_at(t);
        let sigma = self.config.sigma_for(status);
        let hs = self.config.heading_sigma_for(status);
        let (ox, oy) = self.faults.outlier_at(t);
        let r = &mut self.gnss_rng;
        let (nx, ny, nz, nh) = (gauss(r), gauss(r), gauss(r), gauss(r));
        let var = (sigma * sigma).max(MIN_VARIANCE);
        Some(GnssFix {
            stamp: t,
            x: truth.x + sigma * nx + ox,
            y: truth.y + sigma * ny + oy,
            z: sigma * nz,
            heading: super::wrap_angle(truth.yaw + hs * nh),
            variance: [var; 3],
            heading_variance: (hs * hs).max(MIN_VARIANCE),
            rtk_status: status,
        })
    }

    pub fn sample_imu(&mut self, truth: &PlantState) -> ImuSample {
        let c = &self.config;
        let gyro_sigma = c.gyro_noise_density * c.imu_rate.sqrt();
        // body rates of a level-pitch car rolled by the bank
        let (sr, cr) = truth.roll.sin_cos();
        let truth_rate = [truth.roll_rate, truth.yaw_rate * sr, truth.yaw_rate * cr];
        let mut gyro = [0.0; 3];
        for i in 0..3 {
            gyro[i] = truth_rate[i] + c.gyro_bias[i] + gyro_sigma * gauss(&mut self.gyro_rng);
        }
        let phi = c.vibration_pole;
        let drive = c.vibration_sigma * (1.0 - phi * phi).sqrt();
        let truth_acc = [truth.accel_x, truth.accel_y, truth.accel_z];
        let mut accel = [0.0; 3];
        for i in 0..3 {
            self.vibration[i] = phi * self.vibration[i] + drive * gauss(&mut self.vibration_rng);
            accel[i] = truth_acc[i] + c.accel_bias[i] + self.vibration[i] + c.accel_noise * gauss(&mut self.accel_rng);
        }
        ImuSample { stamp: truth.time, gyro, accel }
    }
}

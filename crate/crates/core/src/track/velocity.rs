//! Curvature-limited speed profile with longitudinal acceleration passes.

use serde::{Deserialize, Serialize};

use super::geom::{cumulative_length, polyline_curvature, V2};
use super::TrackError;

/// Curvature floor used when converting curvature to a speed limit.
pub const KAPPA_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VelocityProfileParams {
    pub a_lat_max: f64,
    pub a_lon_accel_max: f64,
    pub a_lon_brake_max: f64,
    pub v_cap: f64,
}

impl Default for VelocityProfileParams {
    fn default() -> Self {
        Self { a_lat_max: 18.0, a_lon_accel_max: 6.0, a_lon_brake_max: 10.0, v_cap: 75.0 }
    }
}

impl VelocityProfileParams {
    pub fn validate(&self) -> Result<(), TrackError> {
        for (name, v) in [
            ("a_lat_max", self.a_lat_max),
            ("a_lon_accel_max", self.a_lon_accel_max),
            ("a_lon_brake_max", self.a_lon_brake_max),
            ("v_cap", self.v_cap),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(TrackError::Constraint(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

/// Speed limit at every vertex of `path`.
pub fn compute_velocity_profile(path: &[V2], closed: bool, p: &VelocityProfileParams) -> Result<Vec<f64>, TrackError> {
    p.validate()?;
    if path.len() < 3 {
        return Err(TrackError::TooFewPoints { needed: 3, got: path.len() });
    }
    let kappa = polyline_curvature(path, closed);
    let cum = cumulative_length(path, closed);
    let ds: Vec<f64> = cum.windows(2).map(|w| w[1] - w[0]).collect();
    Ok(profile_from_curvature(&kappa, &ds, closed, p))
}

/// Same as [`compute_velocity_profile`] with explicit curvature and
/// segment lengths (`ds[i]` joins vertex `i` to `i + 1`, wrapping when closed).
pub fn profile_from_curvature(kappa: &[f64], ds: &[f64], closed: bool, p: &VelocityProfileParams) -> Vec<f64> {
    let n = kappa.len();
    let mut v: Vec<f64> = kappa.iter().map(|k| p.v_cap.min((p.a_lat_max / k.abs().max(KAPPA_EPS)).sqrt())).collect();
    let laps = if closed { 2 } else { 1 };
    let nseg = if closed { n } else { n - 1 };
    for _ in 0..laps {
        for i in 0..nseg {
            let j = (i + 1) % n;
            let lim = (v[i] * v[i] + 2.0 * p.a_lon_accel_max * ds[i]).sqrt();
            if v[j] > lim {
                v[j] = lim;
            }
        }
    }
    for _ in 0..laps {
        for i in (0..nseg).rev() {
            let j = (i + 1) % n;
            let lim = (v[j] * v[j] + 2.0 * p.a_lon_brake_max * ds[i]).sqrt();
            if v[i] > lim {
                v[i] = lim;
            }
        }
    }
    v
}

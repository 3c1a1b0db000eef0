//! Error-state Kalman filter: gyro-driven prediction, gated RTK-GNSS
//! position/heading/velocity updates with inverse-multiquadric weighting,
//! dead-reckoning timeout with re-initialization, and a banking
//! pseudo-measurement on roll and pitch.

use nalgebra::{DMatrix, DVector, SMatrix, SVector, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::plant::{wrap_angle, GnssFix, ImuSample, RtkStatus};

pub const N: usize = 12;
pub type Cov = SMatrix<f64, N, N>;
pub type Nominal = SVector<f64, N>;

// nominal / error-state layout
const P: usize = 0;
const V: usize = 3;
const TH: usize = 6;
const BG: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("non-finite IMU sample dropped")]
    NonFiniteImu,
    #[error("IMU step {0} s outside (0, 0.02]")]
    BadStep(f64),
    #[error("singular innovation covariance; update skipped")]
    SingularInnovation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    /// IMQ scale in Mahalanobis units.
    pub imq_c: f64,
    pub use_imq: bool,
    pub t_dr: f64,
    pub t_reinit: f64,
    /// Motion-prior and re-init jump bound `jump_gain·v·Δt + jump_slack`.
    pub jump_gain: f64,
    pub jump_slack: f64,
    pub gnss_period: f64,
    /// Largest accepted reported variance per status (m²).
    pub variance_fixed: f64,
    pub variance_float: f64,
    pub variance_single: f64,
    /// Velocity random walk (m/s²/√Hz) horizontal and vertical.
    pub accel_sigma: f64,
    pub vertical_accel_sigma: f64,
    pub gyro_noise_density: f64,
    pub gyro_bias_walk: f64,
    /// Height measurements get their variance scaled by this.
    pub vertical_inflation: f64,
    /// Finite-difference velocity shares its fixes with the position
    /// updates; its variance is scaled by this to offset the correlation.
    pub velocity_obs_inflation: f64,
    /// Both fixes of a velocity difference need at least this IMQ weight.
    pub velocity_min_weight: f64,
    pub banking_sigma_deg: f64,
    /// Banking is fused only within this lateral distance of the raceline.
    pub lane_bound: f64,
    /// EMA factor of the gate pass rate.
    pub trust_alpha: f64,
    pub l_f: f64,
    pub l_r: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            imq_c: 3.0,
            use_imq: true,
            t_dr: 0.5,
            t_reinit: 2.0,
            jump_gain: 2.0,
            jump_slack: 0.5,
            gnss_period: 0.05,
            variance_fixed: 0.01,
            variance_float: 0.25,
            variance_single: 4.0,
            accel_sigma: 2.0,
            vertical_accel_sigma: 2.0,
            gyro_noise_density: 0.005,
            gyro_bias_walk: 1e-5,
            vertical_inflation: 100.0,
            velocity_obs_inflation: 4.0,
            velocity_min_weight: 0.5,
            banking_sigma_deg: 0.3,
            lane_bound: 10.0,
            trust_alpha: 0.1,
            l_f: 1.60,
            l_r: 1.3718,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Tracking,
    DeadReckoning,
    Reinit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[repr(i8)]
pub enum Status {
    Ok = 0,
    DeadReckoning = 1,
    Reinitializing = 2,
    Failed = 3,
}

impl Status {
    pub fn code(self) -> i8 {
        self as i8
    }

    pub fn from_code(c: i8) -> Option<Self> {
        Some(match c {
            0 => Self::Ok,
            1 => Self::DeadReckoning,
            2 => Self::Reinitializing,
            3 => Self::Failed,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EskfState {
    /// Position, velocity (ENU), roll/pitch/yaw, gyro bias.
    pub nominal: Nominal,
    pub covariance: Cov,
    pub last_fix_time: f64,
    pub mode: Mode,
}

impl EskfState {
    pub fn position(&self) -> Vector3<f64> {
        self.nominal.fixed_rows::<3>(P).into()
    }

    pub fn velocity(&self) -> Vector3<f64> {
        self.nominal.fixed_rows::<3>(V).into()
    }

    pub fn rpy(&self) -> Vector3<f64> {
        self.nominal.fixed_rows::<3>(TH).into()
    }

    pub fn gyro_bias(&self) -> Vector3<f64> {
        self.nominal.fixed_rows::<3>(BG).into()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatedState {
    pub stamp: f64,
    pub position: [f64; 3],
    pub rpy: [f64; 3],
    pub velocity: [f64; 3],
    pub angular_velocity: [f64; 3],
    pub slip_angle_front: f64,
    pub slip_angle_rear: f64,
    pub trust: f64,
    pub status: Status,
}

impl EstimatedState {
    pub fn speed(&self) -> f64 {
        self.velocity[0].hypot(self.velocity[1])
    }

    pub fn yaw(&self) -> f64 {
        self.rpy[2]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateReport {
    pub variance_ok: bool,
    pub rtk_ok: bool,
    pub motion_prior_ok: bool,
    pub mahalanobis: f64,
    pub imq_weight: f64,
}

impl GateReport {
    pub fn accepted(&self) -> bool {
        self.variance_ok && self.rtk_ok && self.motion_prior_ok
    }
}

/// Inverse-multiquadric weight from a squared Mahalanobis distance.
pub fn imq_from_m2(m2: f64, c: f64) -> f64 {
    (1.0 + m2 / (c * c)).powf(-0.5)
}

/// IMQ weight of `residual` under innovation covariance `s`; `None` if
/// `s` is singular.
pub fn imq_weight(residual: &DVector<f64>, s: &DMatrix<f64>, c: f64) -> Option<f64> {
    let m2 = mahalanobis2(residual, s)?;
    Some(imq_from_m2(m2, c))
}

fn mahalanobis2(r: &DVector<f64>, s: &DMatrix<f64>) -> Option<f64> {
    let chol = s.clone().cholesky()?;
    Some(r.dot(&chol.solve(r)))
}

/// Euler-rate map: rpy_dot = W(roll, pitch) · body rate.
fn euler_rates(rpy: &Vector3<f64>, w: &Vector3<f64>) -> Vector3<f64> {
    let (sr, cr) = rpy.x.sin_cos();
    let (sp, cp) = rpy.y.sin_cos();
    let tp = sp / cp;
    Vector3::new(w.x + sr * tp * w.y + cr * tp * w.z, cr * w.y - sr * w.z, (sr * w.y + cr * w.z) / cp)
}

/// Nominal propagation: attitude from bias-corrected gyro; horizontal
/// velocity turns with the yaw increment (no accelerometer).
fn propagate(x: &Nominal, gyro: &Vector3<f64>, dt: f64) -> Nominal {
    let rpy = Vector3::new(x[TH], x[TH + 1], x[TH + 2]);
    let b = Vector3::new(x[BG], x[BG + 1], x[BG + 2]);
    let rates = euler_rates(&rpy, &(gyro - b));
    let dpsi = rates.z * dt;
    let (s, c) = dpsi.sin_cos();
    let mut y = *x;
    y[V] = c * x[V] - s * x[V + 1];
    y[V + 1] = s * x[V] + c * x[V + 1];
    for i in 0..3 {
        y[P + i] = x[P + i] + 0.5 * (x[V + i] + y[V + i]) * dt;
        y[TH + i] = x[TH + i] + rates[i] * dt;
    }
    y[TH + 2] = wrap_angle(y[TH + 2]);
    y
}

fn state_diff(a: &Nominal, b: &Nominal) -> Nominal {
    let mut d = a - b;
    d[TH + 2] = wrap_angle(d[TH + 2]);
    d
}

fn symmetrize(p: &mut Cov) {
    *p = (*p + p.transpose()) * 0.5;
}

#[derive(Debug, Clone)]
pub struct Estimator {
    cfg: EstimatorConfig,
    st: EskfState,
    initialized: bool,
    failed: bool,
    pass_rate: f64,
    last_fix: Option<(f64, Vector3<f64>, f64)>,
    last_fix_var: f64,
    last_fix_weight: f64,
    last_gyro: Vector3<f64>,
    time: f64,
}

impl Estimator {
    pub fn new(cfg: EstimatorConfig) -> Self {
        Self {
            cfg,
            st: EskfState {
                nominal: Nominal::zeros(),
                covariance: Self::initial_cov(),
                last_fix_time: f64::NEG_INFINITY,
                mode: Mode::Reinit,
            },
            initialized: false,
            failed: false,
            pass_rate: 1.0,
            last_fix: None,
            last_fix_var: 0.0,
            last_fix_weight: 1.0,
            last_gyro: Vector3::zeros(),
            time: 0.0,
        }
    }

    fn initial_cov() -> Cov {
        let mut d = Nominal::zeros();
        for i in 0..3 {
            d[P + i] = 1.0;
            d[V + i] = 100.0;
            d[TH + i] = 0.05f64.powi(2);
            d[BG + i] = 0.01f64.powi(2);
        }
        Cov::from_diagonal(&d)
    }

    /// Starts tracking from a known pose (flying start).
    pub fn initialize(&mut self, t: f64, position: [f64; 3], rpy: [f64; 3], velocity: [f64; 3]) {
        let mut x = Nominal::zeros();
        for i in 0..3 {
            x[P + i] = position[i];
            x[TH + i] = rpy[i];
            x[V + i] = velocity[i];
        }
        let mut d = Nominal::zeros();
        for i in 0..3 {
            d[P + i] = 0.01;
            d[V + i] = 0.25;
            d[TH + i] = 0.01f64.powi(2);
            d[BG + i] = 0.005f64.powi(2);
        }
        self.st = EskfState { nominal: x, covariance: Cov::from_diagonal(&d), last_fix_time: t, mode: Mode::Tracking };
        self.initialized = true;
        self.failed = false;
        self.time = t;
        self.last_fix = None;
    }

    pub fn config(&self) -> &EstimatorConfig {
        &self.cfg
    }

    pub fn state(&self) -> &EskfState {
        &self.st
    }

    pub fn is_initialized(&self) -> bool {
        self.initialized
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn predict(&mut self, imu: &ImuSample, dt: f64) -> Result<&EskfState, EstimatorError> {
        if imu.gyro.iter().chain(imu.accel.iter()).any(|v| !v.is_finite()) {
            return Err(EstimatorError::NonFiniteImu);
        }
        if !(dt > 0.0 && dt <= 0.02 + 1e-12) {
            return Err(EstimatorError::BadStep(dt));
        }
        let gyro = Vector3::from(imu.gyro);
        self.last_gyro = gyro;
        if !self.initialized {
            // keep the clock on the sensor stamps until the first fix
            self.time = imu.stamp;
            return Ok(&self.st);
        }
        self.time += dt;
        let x = self.st.nominal;
        let fx = propagate(&x, &gyro, dt);
        // error-state transition by central differences of the nominal map
        let mut f = Cov::zeros();
        for j in 0..N {
            let h = 1e-6 * (1.0 + x[j].abs());
            let mut xp = x;
            let mut xm = x;
            xp[j] += h;
            xm[j] -= h;
            let col = state_diff(&propagate(&xp, &gyro, dt), &propagate(&xm, &gyro, dt)) / (2.0 * h);
            f.set_column(j, &col);
        }
        let c = &self.cfg;
        let mut q = Nominal::zeros();
        for i in 0..2 {
            q[V + i] = c.accel_sigma.powi(2) * dt;
        }
        q[V + 2] = c.vertical_accel_sigma.powi(2) * dt;
        for i in 0..3 {
            q[P + i] = 1e-6 * dt;
            q[TH + i] = c.gyro_noise_density.powi(2) * dt;
            q[BG + i] = c.gyro_bias_walk.powi(2) * dt;
        }
        self.st.covariance = f * self.st.covariance * f.transpose() + Cov::from_diagonal(&q);
        symmetrize(&mut self.st.covariance);
        self.st.nominal = fx;
        Ok(&self.st)
    }

    /// Position predicted at `stamp` (constant velocity back-extrapolation).
    fn position_at(&self, stamp: f64) -> Vector3<f64> {
        self.st.position() - self.st.velocity() * (self.time - stamp)
    }

    fn variance_limit(&self, status: RtkStatus) -> f64 {
        match status {
            RtkStatus::RtkFixed => self.cfg.variance_fixed,
            RtkStatus::RtkFloat => self.cfg.variance_float,
            RtkStatus::Single => self.cfg.variance_single,
            RtkStatus::None => 0.0,
        }
    }

    fn jump_bound(&self, dt: f64) -> f64 {
        // speed plus three sigma of its uncertainty
        let pv = &self.st.covariance;
        let v = self.st.velocity().xy().norm() + 3.0 * (pv[(V, V)] + pv[(V + 1, V + 1)]).sqrt();
        self.cfg.jump_gain * v * dt + self.cfg.jump_slack
    }

    fn position_r(&self, fix: &GnssFix) -> SMatrix<f64, 3, 3> {
        SMatrix::<f64, 3, 3>::from_diagonal(&Vector3::new(
            fix.variance[0],
            fix.variance[1],
            fix.variance[2] * self.cfg.vertical_inflation,
        ))
    }

    /// Reliability classification of a fix; pure.
    pub fn gate(&self, fix: &GnssFix) -> GateReport {
        let variance_ok = fix.variance.iter().all(|v| *v > 0.0 && *v <= self.variance_limit(fix.rtk_status));
        let rtk_ok = matches!(fix.rtk_status, RtkStatus::RtkFixed | RtkStatus::RtkFloat);
        if !self.initialized {
            return GateReport { variance_ok, rtk_ok, motion_prior_ok: true, mahalanobis: 0.0, imq_weight: 1.0 };
        }
        let pred = self.position_at(fix.stamp);
        let z = Vector3::new(fix.x, fix.y, fix.z);
        let r = z - pred;
        let since = (fix.stamp - self.st.last_fix_time).max(self.cfg.gnss_period);
        let motion_prior_ok = r.xy().norm() <= self.jump_bound(since);
        let s = self.st.covariance.fixed_view::<3, 3>(P, P).into_owned() + self.position_r(fix);
        let m2 =
            mahalanobis2(&DVector::from_column_slice(r.as_slice()), &DMatrix::from_column_slice(3, 3, s.as_slice()));
        let (mahalanobis, imq_weight) = match m2 {
            Some(m2) => (m2.sqrt(), imq_from_m2(m2, self.cfg.imq_c)),
            None => (f64::INFINITY, 0.0),
        };
        GateReport { variance_ok, rtk_ok, motion_prior_ok, mahalanobis, imq_weight }
    }

    /// Weighted Kalman update of rows `h` with residual `r` and noise `rn`;
    /// returns the IMQ weight used.
    fn update(&mut self, h: &DMatrix<f64>, r: &DVector<f64>, rn: &DMatrix<f64>) -> Result<f64, EstimatorError> {
        let p = DMatrix::from_column_slice(N, N, self.st.covariance.as_slice());
        let s0 = h * &p * h.transpose() + rn;
        let m2 = mahalanobis2(r, &s0).ok_or(EstimatorError::SingularInnovation)?;
        let w = if self.cfg.use_imq { imq_from_m2(m2, self.cfg.imq_c) } else { 1.0 };
        let rw = rn / (w * w);
        let s = h * &p * h.transpose() + &rw;
        let chol = s.cholesky().ok_or(EstimatorError::SingularInnovation)?;
        let k = (chol.solve(&(h * &p))).transpose();
        let dx = &k * r;
        // Joseph form keeps P symmetric positive semi-definite
        let ikh = DMatrix::identity(N, N) - &k * h;
        let pn = &ikh * &p * ikh.transpose() + &k * &rw * k.transpose();
        self.st.covariance = Cov::from_column_slice(pn.as_slice());
        symmetrize(&mut self.st.covariance);
        for i in 0..N {
            self.st.nominal[i] += dx[i];
        }
        self.st.nominal[TH + 2] = wrap_angle(self.st.nominal[TH + 2]);
        Ok(w)
    }

    fn reset_to_fix(&mut self, fix: &GnssFix, keep_velocity: bool) {
        let v = self.st.velocity();
        let b = self.st.gyro_bias();
        let rpy = self.st.rpy();
        self.st.nominal[P] = fix.x;
        self.st.nominal[P + 1] = fix.y;
        self.st.nominal[P + 2] = fix.z;
        self.st.nominal[TH] = rpy.x;
        self.st.nominal[TH + 1] = rpy.y;
        self.st.nominal[TH + 2] = fix.heading;
        let mut cov = Self::initial_cov();
        for i in 0..3 {
            self.st.nominal[V + i] = if keep_velocity { v[i] } else { 0.0 };
            self.st.nominal[BG + i] = b[i];
            cov[(P + i, P + i)] = fix.variance[i].max(1e-4);
            if keep_velocity {
                cov[(V + i, V + i)] = 1.0;
            }
        }
        self.st.covariance = cov;
        // move the reset from the fix stamp to the filter time
        let lag = self.time - fix.stamp;
        for i in 0..3 {
            self.st.nominal[P + i] += self.st.nominal[V + i] * lag;
        }
    }

    /// Gates and fuses one fix. Rejected fixes leave the state untouched.
    pub fn update_gnss(&mut self, fix: &GnssFix) -> Result<GateReport, EstimatorError> {
        let mut report = self.gate(fix);
        let a = self.cfg.trust_alpha;
        self.pass_rate = (1.0 - a) * self.pass_rate + a * if report.accepted() { 1.0 } else { 0.0 };
        if self.failed || !report.variance_ok || !report.rtk_ok {
            return Ok(report);
        }
        if !self.initialized {
            self.initialized = true;
            self.time = self.time.max(fix.stamp);
            self.reset_to_fix(fix, false);
            self.accept(fix);
            self.last_fix_weight = 1.0;
            return Ok(report);
        }
        if self.st.mode == Mode::Reinit {
            let pred = self.position_at(fix.stamp);
            let jump = (Vector3::new(fix.x, fix.y, fix.z) - pred).xy().norm();
            if jump <= self.jump_bound(self.cfg.gnss_period) {
                self.reset_to_fix(fix, true);
                self.accept(fix);
                self.last_fix_weight = 1.0;
                report.motion_prior_ok = true;
            } else {
                self.failed = true;
                report.motion_prior_ok = false;
            }
            return Ok(report);
        }
        if !report.motion_prior_ok {
            return Ok(report);
        }

        let lag = self.time - fix.stamp;
        let x = self.st.nominal;
        // position, shifted from the fix stamp to the filter time
        let mut h = DMatrix::zeros(3, N);
        let mut r = DVector::zeros(3);
        for i in 0..3 {
            h[(i, P + i)] = 1.0;
            h[(i, V + i)] = -lag;
        }
        let z = [fix.x, fix.y, fix.z];
        let pred = self.position_at(fix.stamp);
        for i in 0..3 {
            r[i] = z[i] - pred[i];
        }
        let rn = DMatrix::from_column_slice(3, 3, self.position_r(fix).as_slice());
        let w = self.update(&h, &r, &rn)?;
        report.imq_weight = w;

        // heading from the dual-antenna solution
        let mut h = DMatrix::zeros(1, N);
        h[(0, TH + 2)] = 1.0;
        let yaw_at_fix = x[TH + 2] - self.yaw_rate_estimate() * lag;
        let r = DVector::from_element(1, wrap_angle(fix.heading - yaw_at_fix));
        self.update(&h, &r, &DMatrix::from_element(1, 1, fix.heading_variance))?;

        // horizontal velocity from the previous accepted fix
        if let Some((t0, p0, yaw0)) = self.last_fix {
            let dt = fix.stamp - t0;
            let trusted = w.min(self.last_fix_weight) >= self.cfg.velocity_min_weight;
            if trusted && dt > 1e-6 && dt <= 2.5 * self.cfg.gnss_period {
                let chord = (Vector3::new(fix.x, fix.y, fix.z) - p0) / dt;
                // the chord velocity belongs to the interval midpoint
                let half = 0.5 * wrap_angle(fix.heading - yaw0) + self.yaw_rate_estimate() * lag;
                let (s, c) = half.sin_cos();
                let v_meas = [c * chord.x - s * chord.y, s * chord.x + c * chord.y];
                let mut h = DMatrix::zeros(2, N);
                h[(0, V)] = 1.0;
                h[(1, V + 1)] = 1.0;
                let v = self.st.velocity();
                let r = DVector::from_column_slice(&[v_meas[0] - v.x, v_meas[1] - v.y]);
                let var = self.cfg.velocity_obs_inflation * (fix.variance[0] + self.last_fix_var) / (dt * dt);
                let rn = DMatrix::from_diagonal(&DVector::from_element(2, var.max(1e-8)));
                self.update(&h, &r, &rn)?;
            }
        }
        self.accept(fix);
        self.last_fix_weight = w;
        Ok(report)
    }

    fn accept(&mut self, fix: &GnssFix) {
        self.st.last_fix_time = fix.stamp;
        self.st.mode = Mode::Tracking;
        self.last_fix = Some((fix.stamp, Vector3::new(fix.x, fix.y, fix.z), fix.heading));
        self.last_fix_var = fix.variance[0];
    }

    fn yaw_rate_estimate(&self) -> f64 {
        let rpy = self.st.rpy();
        euler_rates(&rpy, &(self.last_gyro - self.st.gyro_bias())).z
    }

    /// Updates the mode from the time since the last accepted fix.
    pub fn check_deadreckoning(&mut self, now: f64) -> Mode {
        if !self.initialized {
            return self.st.mode;
        }
        let gap = now - self.st.last_fix_time;
        self.st.mode = if gap > self.cfg.t_reinit {
            Mode::Reinit
        } else if gap > self.cfg.t_dr {
            Mode::DeadReckoning
        } else {
            Mode::Tracking
        };
        self.st.mode
    }

    /// Fuses the track bank as a roll observation (level grade for pitch).
    /// No-op without banking data or when far from the raceline.
    pub fn correct_banking(&mut self, bank: Option<f64>, cross_track: f64) -> Result<(), EstimatorError> {
        let Some(bank) = bank else { return Ok(()) };
        if !self.initialized || cross_track.abs() > self.cfg.lane_bound {
            return Ok(());
        }
        let mut h = DMatrix::zeros(2, N);
        h[(0, TH)] = 1.0;
        h[(1, TH + 1)] = 1.0;
        let rpy = self.st.rpy();
        let r = DVector::from_column_slice(&[bank - rpy.x, -rpy.y]);
        let var = self.cfg.banking_sigma_deg.to_radians().powi(2);
        let saved = self.cfg.use_imq;
        // the track map is trusted; no robust down-weighting
        self.cfg.use_imq = false;
        let out = self.update(&h, &r, &DMatrix::from_diagonal(&DVector::from_element(2, var)));
        self.cfg.use_imq = saved;
        out.map(|_| ())
    }

    pub fn trust(&self, now: f64) -> f64 {
        if !self.initialized || self.failed {
            return 0.0;
        }
        let gap = now - self.st.last_fix_time;
        let decay = if gap <= self.cfg.t_dr {
            1.0
        } else {
            ((self.cfg.t_reinit - gap) / (self.cfg.t_reinit - self.cfg.t_dr)).clamp(0.0, 1.0)
        };
        (self.pass_rate * decay).clamp(0.0, 1.0)
    }

    pub fn status(&self) -> Status {
        if self.failed {
            return Status::Failed;
        }
        if !self.initialized {
            return Status::Reinitializing;
        }
        match self.st.mode {
            Mode::Tracking => Status::Ok,
            Mode::DeadReckoning => Status::DeadReckoning,
            Mode::Reinit => Status::Reinitializing,
        }
    }

    /// Output snapshot; `road_wheel` is the steering echo used for the
    /// front slip angle.
    pub fn estimate(&self, now: f64, road_wheel: f64) -> EstimatedState {
        let p = self.st.position();
        let v = self.st.velocity();
        let rpy = self.st.rpy();
        let w = self.last_gyro - self.st.gyro_bias();
        let yaw_rate = euler_rates(&rpy, &w).z;
        let (s, c) = rpy.z.sin_cos();
        let vx = c * v.x + s * v.y;
        let vy = -s * v.x + c * v.y;
        let (sf, sr) = if vx > 1.0 {
            (road_wheel - (vy + self.cfg.l_f * yaw_rate).atan2(vx), -(vy - self.cfg.l_r * yaw_rate).atan2(vx))
        } else {
            (0.0, 0.0)
        };
        EstimatedState {
            stamp: now,
            position: [p.x, p.y, p.z],
            rpy: [rpy.x, rpy.y, rpy.z],
            velocity: [v.x, v.y, v.z],
            angular_velocity: [w.x, w.y, w.z],
            slip_angle_front: sf,
            slip_angle_rear: sr,
            trust: self.trust(now),
            status: self.status(),
        }
    }
}

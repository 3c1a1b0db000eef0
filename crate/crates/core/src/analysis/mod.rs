//! Post-run analysis over a log: lap metrics, dynamics datasets, replay.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::controller::Source;
use crate::estimator::EstimatedState;
use crate::planner::FlagState;
use crate::plant::{wrap_angle, GnssFix, ImuSample, PlantState};
use crate::sim::record::*;
use crate::supervisor::{Action, SupervisorVerdict};
use crate::telemetry::log::{read_run, GapReport, LogError, Record};
use crate::telemetry::{BasestationFrame, DashboardFrame};
use crate::track::Raceline;

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Log(#[from] LogError),
    #[error("log has no run metadata record")]
    NoMeta,
    #[error("bad {topic} record at {stamp_ns} ns: {msg}")]
    Decode { topic: &'static str, stamp_ns: u64, msg: String },
    #[error("raceline in log: {0}")]
    Raceline(#[from] crate::track::TrackError),
}

/// Curvature below which the raceline counts as straight (1/m).
pub const STRAIGHT_CURVATURE: f64 = 1e-3;

fn secs(ns: u64) -> f64 {
    ns as f64 * 1e-9
}

/// Decoded topic streams of one run, stamped in seconds.
#[derive(Debug, Clone)]
pub struct RunData {
    pub meta: RunMeta,
    pub raceline: Raceline,
    pub truth: Vec<(f64, PlantState)>,
    pub imu: Vec<(f64, ImuSample)>,
    pub gnss: Vec<(f64, GnssFix)>,
    pub estimates: Vec<(f64, EstimatedState)>,
    pub plans: Vec<(f64, PlanRecord)>,
    pub controls: Vec<(f64, ControlRecord)>,
    pub flags: Vec<(f64, FlagState)>,
    pub verdicts: Vec<(f64, SupervisorVerdict)>,
    pub dashboards: Vec<(f64, DashboardFrame)>,
    pub basestation: Vec<(f64, BasestationFrame)>,
    pub events: Vec<(f64, Event)>,
    /// Binary frames in the log that failed to decode.
    pub bad_frames: u64,
}

fn dec<T: serde::de::DeserializeOwned>(r: &Record) -> Result<(f64, T), AnalysisError> {
    decode(&r.payload).map(|v| (secs(r.stamp_ns), v)).map_err(|msg| AnalysisError::Decode {
        topic: topic_name(r.topic),
        stamp_ns: r.stamp_ns,
        msg,
    })
}

impl RunData {
    pub fn from_records(records: &[Record]) -> Result<Self, AnalysisError> {
        let meta_rec = records.iter().find(|r| r.topic == TOPIC_META).ok_or(AnalysisError::NoMeta)?;
        let (_, meta): (f64, RunMeta) = dec(meta_rec)?;
        let raceline = meta.raceline.rebuild()?;
        let mut d = RunData {
            meta,
            raceline,
            truth: vec![],
            imu: vec![],
            gnss: vec![],
            estimates: vec![],
            plans: vec![],
            controls: vec![],
            flags: vec![],
            verdicts: vec![],
            dashboards: vec![],
            basestation: vec![],
            events: vec![],
            bad_frames: 0,
        };
        for r in records {
            match r.topic {
                TOPIC_TRUTH => d.truth.push(dec(r)?),
                TOPIC_IMU => d.imu.push(dec(r)?),
                TOPIC_GNSS => d.gnss.push(dec(r)?),
                TOPIC_ESTIMATE => d.estimates.push(dec(r)?),
                TOPIC_PLAN => d.plans.push(dec(r)?),
                TOPIC_CONTROL => d.controls.push(dec(r)?),
                TOPIC_FLAGS => d.flags.push(dec(r)?),
                TOPIC_VERDICT => d.verdicts.push(dec(r)?),
                TOPIC_EVENT => d.events.push(dec(r)?),
                TOPIC_DASHBOARD => match DashboardFrame::decode(&r.payload) {
                    Ok(f) => d.dashboards.push((secs(r.stamp_ns), f)),
                    Err(_) => d.bad_frames += 1,
                },
                TOPIC_BASESTATION => match BasestationFrame::decode(&r.payload) {
                    Ok(f) => d.basestation.push((secs(r.stamp_ns), f)),
                    Err(_) => d.bad_frames += 1,
                },
                _ => {}
            }
        }
        Ok(d)
    }
}

/// Nearest-point tracker along a raceline with a warm start.
pub struct Projector<'a> {
    rl: &'a Raceline,
    warm: Option<f64>,
}

impl<'a> Projector<'a> {
    pub fn new(rl: &'a Raceline) -> Self {
        Self { rl, warm: None }
    }

    /// `(s, cross_track)` of a point.
    pub fn project(&mut self, x: f64, y: f64) -> (f64, f64) {
        let q = Vector2::new(x, y);
        let coarse = |rl: &Raceline| rl.grid_nearest(&q, 0.0, rl.length(), 0.5).s;
        let warm = self.warm.unwrap_or_else(|| coarse(self.rl));
        let mut n = self.rl.newton_nearest(&q, warm, 30);
        if !n.converged {
            n = self.rl.newton_nearest(&q, coarse(self.rl), 30);
        }
        self.warm = Some(n.s);
        (n.s, self.rl.lateral_offset(n.s, &q))
    }
}

/// Start/finish crossings in a stream of arc-length positions. A crossing
/// counts only after the car has been in the middle half of the lap
/// since the previous one.
pub fn lap_crossings(stations: &[(f64, f64)], length: f64) -> Vec<usize> {
    let mut out = Vec::new();
    let mut armed = true;
    for i in 1..stations.len() {
        let (a, b) = (stations[i - 1].1, stations[i].1);
        if b > 0.25 * length && b < 0.75 * length {
            armed = true;
        }
        if armed && a > 0.75 * length && b < 0.25 * length {
            out.push(i);
            armed = false;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LapMetrics {
    pub lap: usize,
    pub t_start: f64,
    pub lap_time: f64,
    pub mean_speed: f64,
    pub cross_track_min: f64,
    pub cross_track_max: f64,
    pub cross_track_rms: f64,
    pub heading_error_min: f64,
    pub heading_error_max: f64,
    pub heading_error_rms: f64,
    /// `v_ref − v` over autonomous control cycles.
    pub velocity_error_mean: f64,
    pub velocity_error_max: f64,
    /// Mean velocity error where the raceline is straight.
    pub velocity_error_straight_mean: Option<f64>,
}

impl LapMetrics {
    pub fn max_abs_cross_track(&self) -> f64 {
        self.cross_track_min.abs().max(self.cross_track_max.abs())
    }
}

#[derive(Debug, Default)]
struct Stats {
    min: f64,
    max: f64,
    sum: f64,
    sq: f64,
    n: usize,
}

impl Stats {
    fn push(&mut self, v: f64) {
        if self.n == 0 {
            self.min = v;
            self.max = v;
        }
        self.min = self.min.min(v);
        self.max = self.max.max(v);
        self.sum += v;
        self.sq += v * v;
        self.n += 1;
    }
    fn mean(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            self.sum / self.n as f64
        }
    }
    fn rms(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.sq / self.n as f64).sqrt()
        }
    }
}

/// Per-lap tracking metrics from the estimated state. Cross-track and
/// heading error are recomputed against the raceline; heading error is
/// positive when the car points left of the tangent.
pub fn compute_lap_metrics(d: &RunData) -> Vec<LapMetrics> {
    let rl = &d.raceline;
    if !rl.is_closed() || d.estimates.is_empty() {
        return Vec::new();
    }
    let mut proj = Projector::new(rl);
    let samples: Vec<(f64, f64, f64, f64)> = d
        .estimates
        .iter()
        .map(|(t, e)| {
            let (s, ct) = proj.project(e.position[0], e.position[1]);
            let he = wrap_angle(e.yaw() - rl.eval(s).heading);
            (*t, s, ct, he)
        })
        .collect();
    let stations: Vec<(f64, f64)> = samples.iter().map(|x| (x.0, x.1)).collect();
    let cross = lap_crossings(&stations, rl.length());
    let mut laps = Vec::new();
    for (k, w) in cross.windows(2).enumerate() {
        let (i0, i1) = (w[0], w[1]);
        let (t0, t1) = (samples[i0].0, samples[i1].0);
        let (mut ct, mut he) = (Stats::default(), Stats::default());
        for x in &samples[i0..i1] {
            ct.push(x.2);
            he.push(x.3);
        }
        let (mut ve, mut ve_straight) = (Stats::default(), Stats::default());
        for (t, c) in d.controls.iter().filter(|(t, c)| *t >= t0 && *t < t1 && c.output.source == Source::Autonomy) {
            let e = c.output.v_ref - c.v_car;
            ve.push(e);
            let j = samples[i0..i1].partition_point(|x| x.0 <= *t);
            let s = samples[i0 + j.saturating_sub(1)].1;
            if rl.eval(s).curvature.abs() < STRAIGHT_CURVATURE {
                ve_straight.push(e);
            }
        }
        laps.push(LapMetrics {
            lap: k + 1,
            t_start: t0,
            lap_time: t1 - t0,
            mean_speed: rl.length() / (t1 - t0),
            cross_track_min: ct.min,
            cross_track_max: ct.max,
            cross_track_rms: ct.rms(),
            heading_error_min: he.min,
            heading_error_max: he.max,
            heading_error_rms: he.rms(),
            velocity_error_mean: ve.mean(),
            velocity_error_max: ve.max,
            velocity_error_straight_mean: (ve_straight.n > 0).then(|| ve_straight.mean()),
        });
    }
    laps
}

pub fn laps_csv(laps: &[LapMetrics]) -> String {
    let mut s = String::from(
        "lap,t_start,lap_time,mean_speed,cross_track_min,cross_track_max,cross_track_rms,heading_error_min,heading_error_max,heading_error_rms,velocity_error_mean,velocity_error_max,velocity_error_straight_mean\n",
    );
    for l in laps {
        let straight = l.velocity_error_straight_mean.map(|v| format!("{v:.6}")).unwrap_or_default();
        let _ = writeln!(
            s,
            "{},{:.3},{:.3},{:.4},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{}",
            l.lap,
            l.t_start,
            l.lap_time,
            l.mean_speed,
            l.cross_track_min,
            l.cross_track_max,
            l.cross_track_rms,
            l.heading_error_min,
            l.heading_error_max,
            l.heading_error_rms,
            l.velocity_error_mean,
            l.velocity_error_max,
            straight
        );
    }
    s
}

/// Whole-run summary written next to the log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMetrics {
    pub run_id: String,
    pub scenario: String,
    pub seed: u64,
    pub duration: f64,
    pub laps: Vec<LapMetrics>,
    pub verdicts: Vec<SupervisorVerdict>,
    pub emergency: bool,
    pub max_abs_cross_track: f64,
    pub dashboard_frames: usize,
    pub bad_frames: u64,
}

pub fn run_metrics(d: &RunData) -> RunMetrics {
    let laps = compute_lap_metrics(d);
    let verdicts: Vec<SupervisorVerdict> = d.verdicts.iter().map(|(_, v)| v.clone()).collect();
    let emergency = verdicts.iter().any(|v| v.action == Action::EmergencyStop)
        || d.events.iter().any(|(_, e)| e.source == "lowlevel" && e.message.ends_with("Emergency"));
    let duration = d.truth.last().map(|x| x.0).unwrap_or(0.0);
    RunMetrics {
        run_id: d.meta.run_id.clone(),
        scenario: d.meta.scenario.clone(),
        seed: d.meta.seed,
        duration,
        max_abs_cross_track: laps.iter().map(LapMetrics::max_abs_cross_track).fold(0.0, f64::max),
        laps,
        verdicts,
        emergency,
        dashboard_frames: d.dashboards.len(),
        bad_frames: d.bad_frames,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DynamicsSample {
    pub t: f64,
    pub a_lon: f64,
    pub a_lat: f64,
    pub v: f64,
    pub sigma_f: f64,
    pub sigma_r: f64,
    pub f_yf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DynamicsSource {
    /// IMU accelerations with slip angles from the estimator.
    Measured,
    /// Simulator ground truth.
    Truth,
}

/// G-G and front-tire datasets. The front lateral force is the steady
/// state front share `m a_lat l_r / L`. Samples below `v_min` are skipped
/// (slip angles are undefined near standstill).
pub fn export_dynamics(d: &RunData, source: DynamicsSource, v_min: f64) -> Vec<DynamicsSample> {
    let p = &d.meta.vehicle;
    let share = p.mass * p.l_r / p.wheelbase;
    let mut out = Vec::new();
    match source {
        DynamicsSource::Measured => {
            let mut j = 0;
            for (t, imu) in &d.imu {
                while j + 1 < d.estimates.len() && d.estimates[j + 1].0 <= *t {
                    j += 1;
                }
                let Some((te, e)) = d.estimates.get(j) else {
                    break;
                };
                if (te - t).abs() > 0.01 || e.speed() < v_min {
                    continue;
                }
                out.push(DynamicsSample {
                    t: *t,
                    a_lon: imu.accel[0],
                    a_lat: imu.accel[1],
                    v: e.speed(),
                    sigma_f: e.slip_angle_front,
                    sigma_r: e.slip_angle_rear,
                    f_yf: share * imu.accel[1],
                });
            }
        }
        DynamicsSource::Truth => {
            for (t, s) in &d.truth {
                if s.speed() < v_min {
                    continue;
                }
                out.push(DynamicsSample {
                    t: *t,
                    a_lon: s.accel_x,
                    a_lat: s.accel_y,
                    v: s.speed(),
                    sigma_f: s.slip_front(p),
                    sigma_r: s.slip_rear(p),
                    f_yf: share * s.accel_y,
                });
            }
        }
    }
    out
}

pub fn dynamics_csv(samples: &[DynamicsSample]) -> String {
    let mut s = String::from("t,a_lon,a_lat,v,sigma_f,sigma_r,f_yf\n");
    for x in samples {
        let _ = writeln!(
            s,
            "{:.3},{:.6},{:.6},{:.4},{:.8},{:.8},{:.3}",
            x.t, x.a_lon, x.a_lat, x.v, x.sigma_f, x.sigma_r, x.f_yf
        );
    }
    s
}

/// Least-squares slope through the origin.
pub fn slope_through_origin(points: impl IntoIterator<Item = (f64, f64)>) -> Option<f64> {
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in points {
        sxy += x * y;
        sxx += x * x;
    }
    (sxx > 0.0).then(|| sxy / sxx)
}

/// A run read back from disk.
#[derive(Debug, Clone)]
pub struct Replay {
    pub gaps: GapReport,
    pub records: Vec<Record>,
    pub data: RunData,
}

impl Replay {
    pub fn open(path: &Path) -> Result<Self, AnalysisError> {
        let run = read_run(path)?;
        let data = RunData::from_records(&run.records)?;
        Ok(Self { gaps: run.gaps, records: run.records, data })
    }

    /// Record count per topic name, in topic order.
    pub fn topic_counts(&self) -> Vec<(&'static str, usize)> {
        let mut counts = std::collections::BTreeMap::new();
        for r in &self.records {
            *counts.entry(r.topic).or_insert(0usize) += 1;
        }
        counts.into_iter().map(|(t, n)| (topic_name(t), n)).collect()
    }
}

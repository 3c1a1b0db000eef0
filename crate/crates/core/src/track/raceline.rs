//! The raceline served to the planner: samples `(x, y, v_ref)` carried by
//! quintic splines `x(s)`, `y(s)` over arc length.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::boundaries::{BankingMap, TrackBoundaries};
use super::geom::{v2, V2};
use super::mincurv::optimize_min_curvature;
use super::smooth::smooth_boundaries;
use super::spline::{eval_coeffs, QuinticSpline};
use super::velocity::{compute_velocity_profile, VelocityProfileParams};
use super::TrackError;

pub const MIN_SAMPLES: usize = 6;
const NEWTON_TOL: f64 = 1e-8;
const NEWTON_MAX_STEP: f64 = 10.0;

/// Result of a nearest-point search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Nearest {
    pub s: f64,
    pub distance_sq: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub x: f64,
    pub y: f64,
    pub v_ref: f64,
}

/// Raceline state at one arc length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RacelinePoint {
    pub s: f64,
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    pub curvature: f64,
    pub bank: f64,
    pub v_ref: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Raceline {
    samples: Vec<Sample>,
    stations: Vec<f64>,
    length: f64,
    closed: bool,
    sx: QuinticSpline,
    sy: QuinticSpline,
    banking: BankingMap,
}

/// Exact-reload metadata written next to the CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sidecar {
    pub closed: bool,
    pub stations: Vec<f64>,
    pub length: f64,
    pub banking: BankingMap,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RacelineOptions {
    pub margin: f64,
    /// Moving-average window applied to the boundaries first (1 = off).
    pub smoothing_window: usize,
    pub profile: VelocityProfileParams,
}

impl Default for RacelineOptions {
    fn default() -> Self {
        Self { margin: 1.5, smoothing_window: 1, profile: VelocityProfileParams::default() }
    }
}

fn validate_samples(samples: &[Sample]) -> Result<(), TrackError> {
    for (i, s) in samples.iter().enumerate() {
        if !(s.x.is_finite() && s.y.is_finite()) {
            return Err(TrackError::Validation { index: i, reason: "non-finite position".into() });
        }
        if !(s.v_ref > 0.0 && s.v_ref.is_finite()) {
            return Err(TrackError::Validation {
                index: i,
                reason: format!("v_ref must be positive, got {}", s.v_ref),
            });
        }
    }
    Ok(())
}

const GL_NODES: [f64; 5] =
    [-0.906_179_845_938_664, -0.538_469_310_105_683, 0.0, 0.538_469_310_105_683, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] =
    [0.236_926_885_056_189, 0.478_628_670_499_366, 0.568_888_888_888_889, 0.478_628_670_499_366, 0.236_926_885_056_189];

impl Raceline {
    /// Fits splines through `samples` on chord-length stations, then
    /// re-parameterises once by the integrated arc length of that fit.
    pub fn fit(samples: Vec<Sample>, closed: bool, banking: BankingMap) -> Result<Self, TrackError> {
        if samples.len() < MIN_SAMPLES {
            return Err(TrackError::TooFewPoints { needed: MIN_SAMPLES, got: samples.len() });
        }
        validate_samples(&samples)?;
        let n = samples.len();
        let mut st = Vec::with_capacity(n + 1);
        st.push(0.0);
        let pts: Vec<V2> = samples.iter().map(|s| v2(s.x, s.y)).collect();
        let segs = if closed { n } else { n - 1 };
        for i in 0..segs {
            let d = (pts[(i + 1) % n] - pts[i]).norm();
            if d <= 0.0 {
                return Err(TrackError::Parameterization { index: (i + 1) % n, reason: "duplicate sample".into() });
            }
            st.push(st[i] + d);
        }
        let first = Self::from_knots(samples.clone(), &st, closed, banking.clone())?;
        let mut arc = Vec::with_capacity(st.len());
        arc.push(0.0);
        for i in 0..segs {
            arc.push(arc[i] + first.segment_arc_length(i));
        }
        let banking = rescale_banking(&banking, &st, &arc);
        Self::from_knots(samples, &arc, closed, banking)
    }

    /// Fits on explicit stations (`n` entries, plus the loop length when
    /// closed), skipping the re-parameterisation.
    pub fn from_stations(
        samples: Vec<Sample>,
        stations: &[f64],
        length: f64,
        closed: bool,
        banking: BankingMap,
    ) -> Result<Self, TrackError> {
        validate_samples(&samples)?;
        let mut st = stations.to_vec();
        if closed {
            st.push(length);
        }
        Self::from_knots(samples, &st, closed, banking)
    }

    fn from_knots(samples: Vec<Sample>, st: &[f64], closed: bool, banking: BankingMap) -> Result<Self, TrackError> {
        let n = samples.len();
        if n < MIN_SAMPLES {
            return Err(TrackError::TooFewPoints { needed: MIN_SAMPLES, got: n });
        }
        let xs: Vec<f64> = samples.iter().map(|s| s.x).collect();
        let ys: Vec<f64> = samples.iter().map(|s| s.y).collect();
        let (sx, sy, length) = if closed {
            let period = st[n];
            (
                QuinticSpline::fit_periodic(&st[..n], &xs, period)?,
                QuinticSpline::fit_periodic(&st[..n], &ys, period)?,
                period,
            )
        } else {
            (QuinticSpline::fit_open(&st[..n], &xs)?, QuinticSpline::fit_open(&st[..n], &ys)?, st[n - 1])
        };
        let mut banking = banking;
        if closed {
            banking.period = Some(length);
        }
        Ok(Self { samples, stations: st[..n].to_vec(), length, closed, sx, sy, banking })
    }

    fn segment_arc_length(&self, i: usize) -> f64 {
        let k = self.sx.knots();
        let (a, b) = (k[i], k[i + 1]);
        let h = b - a;
        let cx = &self.sx.segments()[i];
        let cy = &self.sy.segments()[i];
        GL_NODES
            .iter()
            .zip(&GL_WEIGHTS)
            .map(|(x, w)| {
                let u = 0.5 * h * (x + 1.0);
                let dx = eval_coeffs(cx, u).d1;
                let dy = eval_coeffs(cy, u).d1;
                w * dx.hypot(dy)
            })
            .sum::<f64>()
            * 0.5
            * h
    }

    /// Full pipeline from boundaries: optional smoothing, minimum-curvature
    /// offsets, speed profile, spline fit, banking carried over.
    pub fn generate(b: &TrackBoundaries, opts: &RacelineOptions) -> Result<Self, TrackError> {
        let smoothed;
        let b = if opts.smoothing_window > 1 {
            smoothed = smooth_boundaries(b, opts.smoothing_window)?;
            &smoothed
        } else {
            b
        };
        let corr = b.corridor();
        let opt = optimize_min_curvature(b, opts.margin)?;
        let v = compute_velocity_profile(&opt.path, b.closed, &opts.profile)?;
        let samples: Vec<Sample> = opt.path.iter().zip(&v).map(|(p, v)| Sample { x: p.x, y: p.y, v_ref: *v }).collect();
        let banking = BankingMap {
            stations: vec![],
            bank: corr.station.iter().map(|s| b.banking.eval(*s)).collect(),
            period: None,
        };
        let mut rl = Self::fit(samples, b.closed, BankingMap::flat())?;
        let banking = if banking.bank.iter().all(|x| *x == 0.0) {
            BankingMap::flat()
        } else {
            BankingMap { stations: rl.stations.clone(), bank: banking.bank, period: b.closed.then_some(rl.length) }
        };
        rl.banking = banking;
        Ok(rl)
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn stations(&self) -> &[f64] {
        &self.stations
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn is_closed(&self) -> bool {
        self.closed
    }

    pub fn banking(&self) -> &BankingMap {
        &self.banking
    }

    pub fn spline_x(&self) -> &QuinticSpline {
        &self.sx
    }

    pub fn spline_y(&self) -> &QuinticSpline {
        &self.sy
    }

    /// Maps any arc length into the fitted range: wrapped on closed
    /// lines, clamped on open ones.
    pub fn param(&self, s: f64) -> f64 {
        if self.closed {
            let w = s.rem_euclid(self.length);
            if w >= self.length {
                0.0
            } else {
                w
            }
        } else {
            s.clamp(0.0, self.length)
        }
    }

    /// Position and its first two derivatives with respect to `s`.
    pub fn jet(&self, s: f64) -> (V2, V2, V2) {
        let s = self.param(s);
        let jx = self.sx.eval(s);
        let jy = self.sy.eval(s);
        (v2(jx.value, jy.value), v2(jx.d1, jy.d1), v2(jx.d2, jy.d2))
    }

    pub fn position(&self, s: f64) -> V2 {
        self.jet(s).0
    }

    pub fn v_ref_at(&self, s: f64) -> f64 {
        let s = self.param(s);
        let st = &self.stations;
        let n = st.len();
        let j = st.partition_point(|&x| x <= s).max(1) - 1;
        let (s0, v0) = (st[j], self.samples[j].v_ref);
        let (s1, v1) = if j + 1 < n {
            (st[j + 1], self.samples[j + 1].v_ref)
        } else if self.closed {
            (self.length, self.samples[0].v_ref)
        } else {
            return v0;
        };
        v0 + (s - s0) / (s1 - s0) * (v1 - v0)
    }

    pub fn eval(&self, s: f64) -> RacelinePoint {
        let s = self.param(s);
        let (p, d1, d2) = self.jet(s);
        let sp = d1.norm();
        let curvature = if sp > 0.0 { (d1.x * d2.y - d1.y * d2.x) / sp.powi(3) } else { 0.0 };
        RacelinePoint {
            s,
            x: p.x,
            y: p.y,
            heading: d1.y.atan2(d1.x),
            curvature,
            bank: self.banking.eval(s),
            v_ref: self.v_ref_at(s),
        }
    }

    pub fn max_abs_curvature(&self, step: f64) -> f64 {
        let n = (self.length / step).ceil() as usize;
        (0..=n).map(|i| self.eval((i as f64 * step).min(self.length)).curvature.abs()).fold(0.0, f64::max)
    }

    /// Signed lateral offset of `p` from the line at `s` (left positive).
    pub fn lateral_offset(&self, s: f64, p: &V2) -> f64 {
        let (q, d1, _) = self.jet(s);
        let t = d1.normalize();
        t.x * (p.y - q.y) - t.y * (p.x - q.x)
    }

    /// Newton iteration on `D(s) = |spline(s) - p|²` from `s_warm`, with
    /// step limiting and backtracking. Converged when
    /// `|D'| < 1e-8 (1 + D)`.
    pub fn newton_nearest(&self, p: &V2, s_warm: f64, max_iter: usize) -> Nearest {
        let mut s = self.param(s_warm);
        let eval = |s: f64| {
            let (q, d1, d2) = self.jet(s);
            let r = q - p;
            (r.norm_squared(), 2.0 * r.dot(&d1), 2.0 * (d1.norm_squared() + r.dot(&d2)))
        };
        let (mut d, mut dd, mut ddd) = eval(s);
        for it in 0..=max_iter {
            let at_end = !self.closed && ((s <= 0.0 && dd > 0.0) || (s >= self.length && dd < 0.0));
            if dd.abs() < NEWTON_TOL * (1.0 + d) || at_end {
                return Nearest { s, distance_sq: d, iterations: it, converged: true };
            }
            if it == max_iter {
                break;
            }
            let mut step = if ddd > 0.0 { -dd / ddd } else { -dd.signum() * NEWTON_MAX_STEP };
            step = step.clamp(-NEWTON_MAX_STEP, NEWTON_MAX_STEP);
            let full = step;
            let mut moved = false;
            for _ in 0..40 {
                let sn = self.param(s + step);
                let (dn, ddn, dddn) = eval(sn);
                // slack for rounding: near the minimum D is flat to ~1e-15
                if dn <= d + 1e-12 * (1.0 + d) {
                    s = sn;
                    d = dn;
                    dd = ddn;
                    ddd = dddn;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                // D is flat to rounding here; a sub-micron step is as good as it gets
                if full.abs() < 1e-6 {
                    return Nearest { s, distance_sq: d, iterations: it + 1, converged: true };
                }
                break;
            }
        }
        Nearest { s, distance_sq: d, iterations: max_iter, converged: false }
    }

    /// Brute-force nearest station on a uniform grid over
    /// `[center - half_window, center + half_window]`.
    pub fn grid_nearest(&self, p: &V2, center: f64, half_window: f64, step: f64) -> Nearest {
        let (a, b) = if self.closed {
            let hw = half_window.min(self.length / 2.0);
            (center - hw, center + hw)
        } else {
            ((center - half_window).max(0.0), (center + half_window).min(self.length))
        };
        let n = ((b - a) / step).ceil() as usize;
        let mut best = Nearest { s: self.param(a), distance_sq: f64::INFINITY, iterations: 0, converged: true };
        for i in 0..=n {
            let s = self.param((a + i as f64 * step).min(b));
            let d = (self.position(s) - p).norm_squared();
            if d < best.distance_sq {
                best.s = s;
                best.distance_sq = d;
            }
        }
        best
    }

    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            closed: self.closed,
            stations: self.stations.clone(),
            length: self.length,
            banking: self.banking.clone(),
        }
    }

    /// CSV text; closed lines repeat the first sample at the end.
    pub fn to_csv(&self) -> String {
        let mut s = self.samples.clone();
        if self.closed {
            s.push(s[0]);
        }
        samples_to_csv(&s)
    }

    /// Writes `path` (CSV) and `path.json` (sidecar).
    pub fn save(&self, path: &Path) -> Result<(), TrackError> {
        write(path, &self.to_csv())?;
        let json = serde_json::to_string_pretty(&self.sidecar()).map_err(|e| TrackError::Format(e.to_string()))?;
        write(&sidecar_path(path), &json)
    }

    /// Loads a raceline CSV, using the sidecar when present. Without one,
    /// a repeated first sample marks a closed line.
    pub fn load(path: &Path) -> Result<Self, TrackError> {
        let mut samples = load_samples(path)?;
        let side = sidecar_path(path);
        if side.exists() {
            let text = read(&side)?;
            let sc: Sidecar = serde_json::from_str(&text).map_err(|e| TrackError::Format(e.to_string()))?;
            if sc.closed && samples.len() == sc.stations.len() + 1 {
                samples.pop();
            }
            if samples.len() != sc.stations.len() {
                return Err(TrackError::Format(format!(
                    "sidecar lists {} stations for {} samples",
                    sc.stations.len(),
                    samples.len()
                )));
            }
            return Self::from_stations(samples, &sc.stations, sc.length, sc.closed, sc.banking);
        }
        let closed = samples.len() > 2 && samples[0] == samples[samples.len() - 1];
        if closed {
            samples.pop();
        }
        Self::fit(samples, closed, BankingMap::flat())
    }
}

fn rescale_banking(b: &BankingMap, from: &[f64], to: &[f64]) -> BankingMap {
    if b.stations.is_empty() {
        return b.clone();
    }
    let map = |s: f64| -> f64 {
        let j = from.partition_point(|&x| x <= s).clamp(1, from.len() - 1) - 1;
        let t = (s - from[j]) / (from[j + 1] - from[j]);
        to[j] + t * (to[j + 1] - to[j])
    };
    BankingMap {
        stations: b.stations.iter().map(|s| map(*s)).collect(),
        bank: b.bank.clone(),
        period: b.period.map(|_| *to.last().unwrap()),
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write(path: &Path, text: &str) -> Result<(), TrackError> {
    std::fs::write(path, text).map_err(|e| TrackError::Io { path: path.display().to_string(), message: e.to_string() })
}

fn read(path: &Path) -> Result<String, TrackError> {
    std::fs::read_to_string(path)
        .map_err(|e| TrackError::Io { path: path.display().to_string(), message: e.to_string() })
}

pub fn samples_to_csv(samples: &[Sample]) -> String {
    let mut out = String::from("x,y,v_ref\n");
    for s in samples {
        out.push_str(&format!("{},{},{}\n", s.x, s.y, s.v_ref));
    }
    out
}

pub fn save_samples(path: &Path, samples: &[Sample]) -> Result<(), TrackError> {
    write(path, &samples_to_csv(samples))
}

pub fn load_samples(path: &Path) -> Result<Vec<Sample>, TrackError> {
    parse_samples_csv(&read(path)?)
}

/// Parses `x,y,v_ref` rows (columns located by header name).
pub fn parse_samples_csv(text: &str) -> Result<Vec<Sample>, TrackError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(TrackError::EmptyRaceline)?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let idx = ["x", "y", "v_ref"]
        .iter()
        .map(|c| cols.iter().position(|h| h == c).ok_or_else(|| TrackError::Format(format!("missing column `{c}`"))))
        .collect::<Result<Vec<_>, _>>()?;
    let mut out = Vec::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64, TrackError> {
            f.get(i)
                .ok_or_else(|| TrackError::Parse { line: ln + 1, message: "too few fields".into() })?
                .parse()
                .map_err(|e: std::num::ParseFloatError| TrackError::Parse { line: ln + 1, message: e.to_string() })
        };
        out.push(Sample { x: get(idx[0])?, y: get(idx[1])?, v_ref: get(idx[2])? });
    }
    if out.is_empty() {
        return Err(TrackError::EmptyRaceline);
    }
    validate_samples(&out)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn circle(r: f64, n: usize) -> Vec<Sample> {
        (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * std::f64::consts::TAU;
                Sample { x: r * a.cos(), y: r * a.sin(), v_ref: 20.0 }
            })
            .collect()
    }

    #[test]
    fn straight_line_has_no_curvature() {
        let s: Vec<Sample> = (0..20).map(|i| Sample { x: 3.0 * i as f64, y: 1.5 * i as f64, v_ref: 10.0 }).collect();
        let rl = Raceline::fit(s, false, BankingMap::flat()).unwrap();
        for i in 0..200 {
            let p = rl.eval(i as f64 * rl.length() / 199.0);
            assert!(p.curvature.abs() < 1e-9);
            assert!((p.heading - 0.5f64.atan()).abs() < 1e-9);
        }
    }

    #[test]
    fn circle_curvature_and_periodicity() {
        let rl = Raceline::fit(circle(49.0, 120), true, BankingMap::flat()).unwrap();
        for i in 0..500 {
            let p = rl.eval(i as f64 * rl.length() / 500.0);
            assert!((p.curvature - 1.0 / 49.0).abs() < 1e-4);
        }
        let l = rl.length();
        assert_eq!(rl.eval(l + 1.0).x, rl.eval(1.0).x);
        assert!((l - std::f64::consts::TAU * 49.0).abs() < 0.01);
    }

    #[test]
    fn interpolates_samples() {
        let rl = Raceline::fit(circle(49.0, 60), true, BankingMap::flat()).unwrap();
        for (s, smp) in rl.stations().iter().zip(rl.samples()) {
            let p = rl.position(*s);
            assert!((p.x - smp.x).abs() < 1e-9 && (p.y - smp.y).abs() < 1e-9);
        }
    }

    #[test]
    fn duplicate_sample_is_parameterization_error() {
        let mut s = circle(49.0, 20);
        s[5] = s[4];
        assert!(matches!(
            Raceline::fit(s, true, BankingMap::flat()),
            Err(TrackError::Parameterization { index: 5, .. })
        ));
    }

    #[test]
    fn csv_errors() {
        assert_eq!(parse_samples_csv("x,y,v_ref\n"), Err(TrackError::EmptyRaceline));
        assert!(matches!(parse_samples_csv("x,y\n1,2\n"), Err(TrackError::Format(_))));
        assert!(matches!(parse_samples_csv("x,y,v_ref\n0,0,1\n1,0,0\n"), Err(TrackError::Validation { index: 1, .. })));
    }
}

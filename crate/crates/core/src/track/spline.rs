//! Interpolating quintic splines on an explicit station parameter.
//!
//! Each segment is a quintic Hermite polynomial fixed by value, first and
//! second derivative at both knots. The knot derivatives come from one
//! global banded solve that also makes the third and fourth derivatives
//! continuous (the smoothest interpolating quintic), with natural end
//! conditions on open curves. Closed curves are fitted on a wrap-padded
//! open problem; the padding's influence decays by roughly 0.43 per knot,
//! far below round-off after [`CLOSED_PADDING`] knots.

use serde::{Deserialize, Serialize};

use super::band::BandMatrix;
use super::TrackError;

/// Knots of wrap-around padding used when fitting closed curves.
pub const CLOSED_PADDING: usize = 48;

/// Polynomial coefficients of one segment in the local variable
/// `u = s - s_i`: `a0 + a1 u + ... + a5 u^5`.
pub type Coeffs = [f64; 6];

/// Value and first three derivatives of a scalar spline.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
    pub d3: f64,
}

/// Builds the quintic on `[0, h]` from Hermite data.
pub fn hermite_coeffs(h: f64, p0: f64, m0: f64, c0: f64, p1: f64, m1: f64, c1: f64) -> Coeffs {
    let dp = p1 - p0;
    let h2 = h * h;
    let h3 = h2 * h;
    let a3 = (20.0 * dp - (8.0 * m1 + 12.0 * m0) * h - (3.0 * c0 - c1) * h2) / (2.0 * h3);
    let a4 = (-30.0 * dp + (14.0 * m1 + 16.0 * m0) * h + (3.0 * c0 - 2.0 * c1) * h2) / (2.0 * h3 * h);
    let a5 = (12.0 * dp - 6.0 * (m1 + m0) * h - (c0 - c1) * h2) / (2.0 * h3 * h2);
    [p0, m0, 0.5 * c0, a3, a4, a5]
}

/// Evaluates a segment polynomial and its derivatives at local `u`.
pub fn eval_coeffs(c: &Coeffs, u: f64) -> Jet {
    let value = c[0] + u * (c[1] + u * (c[2] + u * (c[3] + u * (c[4] + u * c[5]))));
    let d1 = c[1] + u * (2.0 * c[2] + u * (3.0 * c[3] + u * (4.0 * c[4] + u * 5.0 * c[5])));
    let d2 = 2.0 * c[2] + u * (6.0 * c[3] + u * (12.0 * c[4] + u * 20.0 * c[5]));
    let d3 = 6.0 * c[3] + u * (24.0 * c[4] + u * 60.0 * c[5]);
    Jet { value, d1, d2, d3 }
}

/// Solves for the knot first and second derivatives of the natural
/// quintic spline through `(s[i], p[i])`.
fn solve_knot_derivatives(s: &[f64], p: &[f64]) -> Result<(Vec<f64>, Vec<f64>), TrackError> {
    let n = s.len();
    // unknown vector: [m0, c0, m1, c1, ...]
    let mut a = BandMatrix::zeros(2 * n, 4, 4);
    let mut rhs = vec![0.0; 2 * n];

    // Third/fourth derivative at the start and end of segment [i, i+1]
    // as linear forms: coefficients on (m_i, c_i, m_{i+1}, c_{i+1}) plus a
    // constant from the values.
    struct Form {
        mi: f64,
        ci: f64,
        mj: f64,
        cj: f64,
        k: f64,
    }
    let third_start = |h: f64, dp: f64| Form {
        mi: -36.0 / (h * h),
        ci: -9.0 / h,
        mj: -24.0 / (h * h),
        cj: 3.0 / h,
        k: 60.0 * dp / (h * h * h),
    };
    let third_end = |h: f64, dp: f64| Form {
        mi: -24.0 / (h * h),
        ci: -3.0 / h,
        mj: -36.0 / (h * h),
        cj: 9.0 / h,
        k: 60.0 * dp / (h * h * h),
    };
    let fourth_start = |h: f64, dp: f64| Form {
        mi: 192.0 / (h * h * h),
        ci: 36.0 / (h * h),
        mj: 168.0 / (h * h * h),
        cj: -24.0 / (h * h),
        k: -360.0 * dp / (h * h * h * h),
    };
    let fourth_end = |h: f64, dp: f64| Form {
        mi: -168.0 / (h * h * h),
        ci: -24.0 / (h * h),
        mj: -192.0 / (h * h * h),
        cj: 36.0 / (h * h),
        k: 360.0 * dp / (h * h * h * h),
    };

    // row r: sum(form on seg i) * sign = ...; we write `form_left - form_right = 0`
    let put = |a: &mut BandMatrix, rhs: &mut [f64], row: usize, seg: usize, f: &Form, sign: f64| {
        a.add(row, 2 * seg, sign * f.mi);
        a.add(row, 2 * seg + 1, sign * f.ci);
        a.add(row, 2 * seg + 2, sign * f.mj);
        a.add(row, 2 * seg + 3, sign * f.cj);
        rhs[row] -= sign * f.k;
    };

    let h0 = s[1] - s[0];
    let hn = s[n - 1] - s[n - 2];
    // natural ends: third and fourth derivative vanish
    put(&mut a, &mut rhs, 0, 0, &third_start(h0, p[1] - p[0]), 1.0);
    put(&mut a, &mut rhs, 1, 0, &fourth_start(h0, p[1] - p[0]), 1.0);
    for i in 1..n - 1 {
        let hl = s[i] - s[i - 1];
        let hr = s[i + 1] - s[i];
        let dpl = p[i] - p[i - 1];
        let dpr = p[i + 1] - p[i];
        put(&mut a, &mut rhs, 2 * i, i - 1, &third_end(hl, dpl), 1.0);
        put(&mut a, &mut rhs, 2 * i, i, &third_start(hr, dpr), -1.0);
        put(&mut a, &mut rhs, 2 * i + 1, i - 1, &fourth_end(hl, dpl), 1.0);
        put(&mut a, &mut rhs, 2 * i + 1, i, &fourth_start(hr, dpr), -1.0);
    }
    put(&mut a, &mut rhs, 2 * n - 2, n - 2, &third_end(hn, p[n - 1] - p[n - 2]), 1.0);
    put(&mut a, &mut rhs, 2 * n - 1, n - 2, &fourth_end(hn, p[n - 1] - p[n - 2]), 1.0);

    a.solve(&mut rhs).ok_or(TrackError::SingularSystem)?;
    let m = rhs.iter().step_by(2).copied().collect();
    let c = rhs.iter().skip(1).step_by(2).copied().collect();
    Ok((m, c))
}

/// Scalar piecewise quintic over strictly increasing knots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuinticSpline {
    knots: Vec<f64>,
    segments: Vec<Coeffs>,
}

impl QuinticSpline {
    /// Natural interpolating quintic spline through `(s, p)`.
    pub fn fit_open(s: &[f64], p: &[f64]) -> Result<Self, TrackError> {
        check_stations(s)?;
        assert_eq!(s.len(), p.len());
        let (m, c) = solve_knot_derivatives(s, p)?;
        Ok(Self::from_hermite(s, p, &m, &c))
    }

    /// Periodic interpolating quintic spline. `s` holds `n` strictly
    /// increasing stations and `period` the parameter length of the loop,
    /// so the closing segment runs from `s[n-1]` to `s[0] + period`.
    pub fn fit_periodic(s: &[f64], p: &[f64], period: f64) -> Result<Self, TrackError> {
        check_stations(s)?;
        let n = s.len();
        if period <= s[n - 1] - s[0] {
            return Err(TrackError::Parameterization {
                index: n - 1,
                reason: "period shorter than station span".into(),
            });
        }
        let pad = CLOSED_PADDING;
        let total = n + 1 + 2 * pad;
        let mut ss = Vec::with_capacity(total);
        let mut pp = Vec::with_capacity(total);
        for k in 0..total {
            let j = k as isize - pad as isize;
            let lap = j.div_euclid(n as isize);
            let idx = j.rem_euclid(n as isize) as usize;
            ss.push(s[idx] + lap as f64 * period);
            pp.push(p[idx]);
        }
        let (m, c) = solve_knot_derivatives(&ss, &pp)?;
        // keep knots pad..=pad+n; enforce exact periodic derivative data at
        // the seam by averaging the two copies
        let mut mk: Vec<f64> = m[pad..=pad + n].to_vec();
        let mut ck: Vec<f64> = c[pad..=pad + n].to_vec();
        let m_seam = 0.5 * (mk[0] + mk[n]);
        let c_seam = 0.5 * (ck[0] + ck[n]);
        mk[0] = m_seam;
        mk[n] = m_seam;
        ck[0] = c_seam;
        ck[n] = c_seam;
        Ok(Self::from_hermite(&ss[pad..=pad + n], &pp[pad..=pad + n], &mk, &ck))
    }

    fn from_hermite(s: &[f64], p: &[f64], m: &[f64], c: &[f64]) -> Self {
        let segments = (0..s.len() - 1)
            .map(|i| hermite_coeffs(s[i + 1] - s[i], p[i], m[i], c[i], p[i + 1], m[i + 1], c[i + 1]))
            .collect();
        Self { knots: s.to_vec(), segments }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn segments(&self) -> &[Coeffs] {
        &self.segments
    }

    /// Segment index containing `s` (clamped to the valid range).
    pub fn segment_of(&self, s: f64) -> usize {
        let k = &self.knots;
        if s <= k[0] {
            return 0;
        }
        let last = self.segments.len() - 1;
        if s >= k[last] {
            return last;
        }
        k.partition_point(|&x| x <= s) - 1
    }

    /// Evaluates at `s`; outside the knot span the end polynomials are
    /// extrapolated, so callers clamp or wrap first.
    pub fn eval(&self, s: f64) -> Jet {
        let i = self.segment_of(s);
        eval_coeffs(&self.segments[i], s - self.knots[i])
    }
}

fn check_stations(s: &[f64]) -> Result<(), TrackError> {
    if s.len() < 2 {
        return Err(TrackError::TooFewPoints { needed: 2, got: s.len() });
    }
    for i in 1..s.len() {
        if !(s[i] > s[i - 1]) {
            return Err(TrackError::Parameterization { index: i, reason: "stations must increase strictly".into() });
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hermite_reproduces_endpoint_data() {
        let h = 1.7;
        let c = hermite_coeffs(h, 0.3, -1.2, 0.8, 2.0, 0.5, -0.4);
        let a = eval_coeffs(&c, 0.0);
        let b = eval_coeffs(&c, h);
        assert!((a.value - 0.3).abs() < 1e-12 && (a.d1 + 1.2).abs() < 1e-12 && (a.d2 - 0.8).abs() < 1e-12);
        assert!((b.value - 2.0).abs() < 1e-12 && (b.d1 - 0.5).abs() < 1e-12 && (b.d2 + 0.4).abs() < 1e-12);
    }

    /// The fitted spline must be C4 at interior knots; derivatives are
    /// checked from the polynomial coefficients of both neighbours.
    #[test]
    fn open_fit_is_c4_and_interpolates() {
        let s: Vec<f64> = (0..15).map(|i| i as f64 * 1.3 + (i as f64 * 0.7).sin() * 0.2).collect();
        let p: Vec<f64> = s.iter().map(|x| (0.4 * x).sin() * 3.0 + 0.1 * x * x).collect();
        let sp = QuinticSpline::fit_open(&s, &p).unwrap();
        for i in 0..s.len() {
            assert!((sp.eval(s[i]).value - p[i]).abs() < 1e-9);
        }
        for i in 1..s.len() - 1 {
            let h = s[i] - s[i - 1];
            let l = &sp.segments()[i - 1];
            let r = &sp.segments()[i];
            let d4 = |c: &Coeffs, u: f64| 24.0 * c[4] + 120.0 * c[5] * u;
            let jl = eval_coeffs(l, h);
            let jr = eval_coeffs(r, 0.0);
            assert!((jl.d1 - jr.d1).abs() < 1e-8);
            assert!((jl.d2 - jr.d2).abs() < 1e-8);
            assert!((jl.d3 - jr.d3).abs() < 1e-7, "d3 at {i}: {} {}", jl.d3, jr.d3);
            assert!((d4(l, h) - d4(r, 0.0)).abs() < 1e-6);
        }
        // natural ends
        let first = &sp.segments()[0];
        assert!(eval_coeffs(first, 0.0).d3.abs() < 1e-8);
    }

    #[test]
    fn reproduces_low_degree_polynomials() {
        // a quadratic has zero third/fourth derivative, so it is the
        // natural quintic interpolant of its own samples
        let s: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let p: Vec<f64> = s.iter().map(|x| 2.0 - x + 0.25 * x * x).collect();
        let sp = QuinticSpline::fit_open(&s, &p).unwrap();
        for k in 0..90 {
            let x = k as f64 * 0.1;
            let j = sp.eval(x);
            assert!((j.value - (2.0 - x + 0.25 * x * x)).abs() < 1e-9);
            assert!((j.d2 - 0.5).abs() < 1e-8);
        }
    }

    #[test]
    fn periodic_fit_is_smooth_across_seam() {
        let n = 24;
        let period = 2.0 * std::f64::consts::PI;
        let s: Vec<f64> = (0..n).map(|i| i as f64 * period / n as f64).collect();
        let p: Vec<f64> = s.iter().map(|x| x.cos()).collect();
        let sp = QuinticSpline::fit_periodic(&s, &p, period).unwrap();
        let a = sp.eval(0.0);
        let b = sp.eval(period);
        assert!((a.value - b.value).abs() < 1e-12);
        assert!((a.d1 - b.d1).abs() < 1e-10);
        assert!((a.d2 - b.d2).abs() < 1e-10);
        for k in 0..200 {
            let x = k as f64 * period / 200.0;
            assert!((sp.eval(x).value - x.cos()).abs() < 1e-5);
        }
    }

    #[test]
    fn duplicate_station_rejected() {
        let s = [0.0, 1.0, 1.0, 2.0];
        let p = [0.0; 4];
        assert!(matches!(QuinticSpline::fit_open(&s, &p), Err(TrackError::Parameterization { index: 2, .. })));
    }
}

//! Boundary smoothing in the heading domain.
//!
//! Each edge is split into segment lengths and directions. A centred
//! moving average runs over the turning angles (closed edges) or the
//! unwrapped headings (open edges), the edge is rebuilt from the original
//! lengths and rigidly aligned back onto the input. Circles are fixed
//! points, and with uniform spacing no vertex ends up turning more sharply
//! than the sharpest input vertex.

use super::boundaries::TrackBoundaries;
use super::geom::{cross, v2, V2};
use super::TrackError;

/// Allowed relative change of the local track width.
pub const WIDTH_TOLERANCE: f64 = 0.05;

fn wrap(a: f64) -> f64 {
    let mut a = a.rem_euclid(std::f64::consts::TAU);
    if a > std::f64::consts::PI {
        a -= std::f64::consts::TAU;
    }
    a
}

/// Centred moving average; circular, or truncated to the available
/// neighbours near open ends.
fn moving_average(x: &[f64], window: usize, circular: bool) -> Vec<f64> {
    let n = x.len();
    let h = window / 2;
    (0..n)
        .map(|i| {
            if circular {
                let sum: f64 = (0..window).map(|k| x[(i + n * (h + 1) + k - h) % n]).sum();
                sum / window as f64
            } else {
                let (a, b) = (i.saturating_sub(h), (i + h).min(n - 1));
                x[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
            }
        })
        .collect()
}

/// Best rigid (rotation + translation) map of `src` onto `dst`.
fn procrustes(src: &[V2], dst: &[V2]) -> Vec<V2> {
    let n = src.len() as f64;
    let cs = src.iter().sum::<V2>() / n;
    let cd = dst.iter().sum::<V2>() / n;
    let (mut sc, mut ss) = (0.0, 0.0);
    for (a, b) in src.iter().zip(dst) {
        let a = a - cs;
        let b = b - cd;
        sc += a.dot(&b);
        ss += cross(&a, &b);
    }
    let th = ss.atan2(sc);
    let (s, c) = th.sin_cos();
    src.iter()
        .map(|p| {
            let d = p - cs;
            cd + v2(c * d.x - s * d.y, s * d.x + c * d.y)
        })
        .collect()
}

fn smooth_edge(pts: &[V2], closed: bool, window: usize) -> Vec<V2> {
    let n = pts.len();
    let nseg = if closed { n } else { n - 1 };
    let seg: Vec<V2> = (0..nseg).map(|i| pts[(i + 1) % n] - pts[i]).collect();
    let len: Vec<f64> = seg.iter().map(|e| e.norm()).collect();
    let head: Vec<f64> = seg.iter().map(|e| e.y.atan2(e.x)).collect();
    // closed loops average turning angles around the ring; open edges
    // average the unwrapped segment headings so nothing drifts at the ends
    let heading: Vec<f64> = if closed {
        let turns: Vec<f64> = (0..nseg).map(|i| wrap(head[i] - head[(i + nseg - 1) % nseg])).collect();
        let smoothed = moving_average(&turns, window, true);
        let mut th = head[0];
        (0..nseg)
            .map(|i| {
                if i > 0 {
                    th += smoothed[i];
                }
                th
            })
            .collect()
    } else {
        let mut th = head[0];
        let unwrapped: Vec<f64> = (0..nseg)
            .map(|i| {
                if i > 0 {
                    th += wrap(head[i] - head[i - 1]);
                }
                th
            })
            .collect();
        moving_average(&unwrapped, window, false)
    };
    let mut out = Vec::with_capacity(n);
    out.push(pts[0]);
    for i in 0..nseg {
        let last = out[out.len() - 1];
        out.push(last + v2(heading[i].cos(), heading[i].sin()) * len[i]);
    }
    if closed {
        let err = out[n] - out[0];
        out.pop();
        let total: f64 = len.iter().sum();
        let mut acc = 0.0;
        for i in 1..n {
            acc += len[i - 1];
            out[i] -= err * (acc / total);
        }
    }
    procrustes(&out, pts)
}

/// Smooths both edges independently with a moving average of `window`
/// (odd) vertices over their turning angles. Station correspondence is kept.
pub fn smooth_boundaries(b: &TrackBoundaries, window: usize) -> Result<TrackBoundaries, TrackError> {
    if window % 2 == 0 {
        return Err(TrackError::Constraint(format!("smoothing window {window} must be odd")));
    }
    if window == 1 {
        return Ok(b.clone());
    }
    let n = b.station_count();
    if window > n {
        return Err(TrackError::Constraint(format!("smoothing window {window} exceeds {n} stations")));
    }
    let left = smooth_edge(&b.left[..n], b.closed, window);
    let right = smooth_edge(&b.right[..n], b.closed, window);
    let before = b.widths();
    for i in 0..n {
        let w = (left[i] - right[i]).norm();
        if (w - before[i]).abs() > WIDTH_TOLERANCE * before[i] {
            return Err(TrackError::Geometry {
                station: i,
                reason: format!("smoothing changed width from {:.3} m to {w:.3} m", before[i]),
            });
        }
    }
    let mut out = TrackBoundaries { left, right, banking: b.banking.clone(), closed: b.closed };
    if b.closed {
        out.left.push(out.left[0]);
        out.right.push(out.right[0]);
    }
    // signed width must stay positive after smoothing
    out.validate(0.0).map(|_| out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::track::boundaries::BankingMap;
    use crate::track::geom::polyline_curvature;

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0, |m, x| m.max(x.abs()))
    }

    fn annulus() -> TrackBoundaries {
        crate::track::shapes::annulus(40.0, 50.0, 2.0).unwrap()
    }

    #[test]
    fn annulus_is_a_fixed_point() {
        let b = annulus();
        let s = smooth_boundaries(&b, 7).unwrap();
        for (p, q) in b.left.iter().zip(&s.left).chain(b.right.iter().zip(&s.right)) {
            assert!((p - q).norm() < 1e-3);
        }
    }

    #[test]
    fn window_one_is_identity() {
        let b = annulus();
        assert_eq!(smooth_boundaries(&b, 1).unwrap(), b);
        assert!(smooth_boundaries(&b, 4).is_err());
    }

    #[test]
    fn zigzag_curvature_drops_tenfold() {
        let n = 200;
        let l: Vec<V2> = (0..n).map(|i| v2(2.0 * i as f64, 6.0 + if i % 2 == 0 { 0.1 } else { -0.1 })).collect();
        let r: Vec<V2> = (0..n).map(|i| v2(2.0 * i as f64, -6.0 + if i % 2 == 0 { -0.1 } else { 0.1 })).collect();
        let b = TrackBoundaries { left: l, right: r, banking: BankingMap::flat(), closed: false };
        let s = smooth_boundaries(&b, 21).unwrap();
        for (a, c) in [(&b.left, &s.left), (&b.right, &s.right)] {
            let k0 = max_abs(&polyline_curvature(a, false));
            let k1 = max_abs(&polyline_curvature(c, false));
            assert!(k1 * 10.0 <= k0, "{k0} -> {k1}");
        }
    }
}

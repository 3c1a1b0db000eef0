//! Small planar polyline helpers.

use nalgebra::Vector2;

pub type V2 = Vector2<f64>;

pub fn v2(x: f64, y: f64) -> V2 {
    V2::new(x, y)
}

/// Counter-clockwise perpendicular.
pub fn perp(v: &V2) -> V2 {
    v2(-v.y, v.x)
}

pub fn cross(a: &V2, b: &V2) -> f64 {
    a.x * b.y - a.y * b.x
}

/// Cumulative arc length; for closed polylines the closing segment is
/// included as a final entry (length `n + 1`).
pub fn cumulative_length(pts: &[V2], closed: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(pts.len() + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for w in pts.windows(2) {
        acc += (w[1] - w[0]).norm();
        out.push(acc);
    }
    if closed && pts.len() > 1 {
        acc += (pts[0] - pts[pts.len() - 1]).norm();
        out.push(acc);
    }
    out
}

/// Resamples a polyline at uniform arc length. Open polylines keep both
/// end points; closed ones return `n` points around the loop without a
/// repeated first point.
pub fn resample(pts: &[V2], closed: bool, spacing: f64) -> Vec<V2> {
    let cum = cumulative_length(pts, closed);
    let total = *cum.last().unwrap();
    let segs = ((total / spacing).round() as usize).max(1);
    let step = total / segs as f64;
    let count = if closed { segs } else { segs + 1 };
    let at = |i: usize| -> V2 {
        if i < pts.len() {
            pts[i]
        } else {
            pts[0]
        }
    };
    let mut out = Vec::with_capacity(count);
    let mut j = 0;
    for k in 0..count {
        let s = (k as f64 * step).min(total);
        while j + 2 < cum.len() && cum[j + 1] < s {
            j += 1;
        }
        let seg = cum[j + 1] - cum[j];
        let t = if seg > 0.0 { (s - cum[j]) / seg } else { 0.0 };
        out.push(at(j) + (at(j + 1) - at(j)) * t);
    }
    out
}

/// Unit tangents by central differences (one-sided at open ends).
pub fn tangents(pts: &[V2], closed: bool) -> Vec<V2> {
    let n = pts.len();
    (0..n)
        .map(|i| {
            let (a, b) = if closed {
                (pts[(i + n - 1) % n], pts[(i + 1) % n])
            } else if i == 0 {
                (pts[0], pts[1])
            } else if i == n - 1 {
                (pts[n - 2], pts[n - 1])
            } else {
                (pts[i - 1], pts[i + 1])
            };
            let d = b - a;
            let len = d.norm();
            if len > 0.0 {
                d / len
            } else {
                v2(1.0, 0.0)
            }
        })
        .collect()
}

/// Signed curvature of the circle through three points (Menger).
pub fn menger_curvature(a: &V2, b: &V2, c: &V2) -> f64 {
    let ab = b - a;
    let bc = c - b;
    let ca = a - c;
    let den = ab.norm() * bc.norm() * ca.norm();
    if den == 0.0 {
        return 0.0;
    }
    2.0 * cross(&ab, &bc) / den
}

/// Pointwise curvature of a polyline; open ends copy their neighbour.
pub fn polyline_curvature(pts: &[V2], closed: bool) -> Vec<f64> {
    let n = pts.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let mut k: Vec<f64> = (0..n)
        .map(|i| {
            if closed {
                menger_curvature(&pts[(i + n - 1) % n], &pts[i], &pts[(i + 1) % n])
            } else if i == 0 || i == n - 1 {
                0.0
            } else {
                menger_curvature(&pts[i - 1], &pts[i], &pts[i + 1])
            }
        })
        .collect();
    if !closed {
        k[0] = k[1];
        k[n - 1] = k[n - 2];
    }
    k
}

/// Intersection of the ray `origin + t * dir` with segment `[a, b]`;
/// returns `t` (any sign) when the infinite line meets the segment.
pub fn line_segment_hit(origin: &V2, dir: &V2, a: &V2, b: &V2) -> Option<f64> {
    let e = b - a;
    let den = cross(dir, &e);
    if den.abs() < 1e-15 {
        return None;
    }
    let w = a - origin;
    let t = cross(&w, &e) / den;
    let u = cross(&w, dir) / den;
    if (-1e-9..=1.0 + 1e-9).contains(&u) {
        Some(t)
    } else {
        None
    }
}

/// Closest point on a polyline to `q`, searching segments around `hint`
/// (a window of `radius` segments, all segments when `None`). Returns
/// `(segment index, point, distance)`.
pub fn closest_on_polyline(pts: &[V2], closed: bool, q: &V2, hint: Option<(usize, usize)>) -> (usize, V2, f64) {
    let n = pts.len();
    let nseg = if closed { n } else { n - 1 };
    let idx: Box<dyn Iterator<Item = usize>> = match hint {
        Some((h, r)) if 2 * r + 1 < nseg => {
            if closed {
                Box::new((0..=2 * r).map(move |k| (h + nseg + k - r) % nseg))
            } else {
                Box::new(h.saturating_sub(r)..(h + r + 1).min(nseg))
            }
        }
        _ => Box::new(0..nseg),
    };
    let mut best = (0, pts[0], f64::INFINITY);
    for i in idx {
        let a = pts[i];
        let b = pts[(i + 1) % n];
        let e = b - a;
        let l2 = e.norm_squared();
        let t = if l2 > 0.0 { ((q - a).dot(&e) / l2).clamp(0.0, 1.0) } else { 0.0 };
        let p = a + e * t;
        let d = (q - p).norm();
        if d < best.2 {
            best = (i, p, d);
        }
    }
    best
}

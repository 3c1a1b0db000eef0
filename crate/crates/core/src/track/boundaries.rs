use std::path::Path;

use serde::{Deserialize, Serialize};

use super::geom::{closest_on_polyline, cross, cumulative_length, line_segment_hit, perp, resample, tangents, v2, V2};
use super::TrackError;

/// Minimum number of stations on each boundary.
pub const MIN_STATIONS: usize = 16;
/// Tolerance for the closed-loop coincidence of first and last points.
pub const CLOSURE_TOL: f64 = 1e-6;

/// Piecewise-linear bank angle over centerline arc length.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BankingMap {
    pub stations: Vec<f64>,
    pub bank: Vec<f64>,
    /// Loop length for wrap-around lookup; `None` for open tracks.
    pub period: Option<f64>,
}

impl BankingMap {
    pub fn flat() -> Self {
        Self::default()
    }

    pub fn is_flat(&self) -> bool {
        self.bank.iter().all(|b| *b == 0.0)
    }

    /// Bank angle (rad) at arc length `s`; zero when no data is present.
    pub fn eval(&self, s: f64) -> f64 {
        let n = self.stations.len();
        if n == 0 {
            return 0.0;
        }
        let st = &self.stations;
        let s = match self.period {
            Some(p) if p > 0.0 => s.rem_euclid(p),
            _ => s,
        };
        if n == 1 {
            return self.bank[0];
        }
        if s <= st[0] {
            if let Some(p) = self.period {
                // interpolate across the seam
                let (s0, b0) = (st[n - 1] - p, self.bank[n - 1]);
                let t = (s - s0) / (st[0] - s0);
                return b0 + t * (self.bank[0] - b0);
            }
            return self.bank[0];
        }
        if s >= st[n - 1] {
            if let Some(p) = self.period {
                let (s1, b1) = (st[0] + p, self.bank[0]);
                let t = (s - st[n - 1]) / (s1 - st[n - 1]);
                return self.bank[n - 1] + t * (b1 - self.bank[n - 1]);
            }
            return self.bank[n - 1];
        }
        let j = st.partition_point(|&x| x <= s) - 1;
        let t = (s - st[j]) / (st[j + 1] - st[j]);
        self.bank[j] + t * (self.bank[j + 1] - self.bank[j])
    }
}

/// Left and right track edges sampled at corresponding stations.
///
/// Closed tracks repeat their first point at the end of both polylines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackBoundaries {
    pub left: Vec<V2>,
    pub right: Vec<V2>,
    pub banking: BankingMap,
    pub closed: bool,
}

/// Centerline frame derived from a pair of boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Corridor {
    pub center: Vec<V2>,
    /// Unit normals pointing from the right edge to the left edge.
    pub normal: Vec<V2>,
    pub half_width: Vec<f64>,
    pub station: Vec<f64>,
    pub length: f64,
    pub closed: bool,
}

impl TrackBoundaries {
    /// Number of distinct stations (the closing duplicate excluded).
    pub fn station_count(&self) -> usize {
        if self.closed {
            self.left.len() - 1
        } else {
            self.left.len()
        }
    }

    pub fn corridor(&self) -> Corridor {
        let n = self.station_count();
        let center: Vec<V2> = (0..n).map(|i| (self.left[i] + self.right[i]) * 0.5).collect();
        let normal: Vec<V2> = (0..n)
            .map(|i| {
                let d = self.left[i] - self.right[i];
                let l = d.norm();
                if l > 0.0 {
                    d / l
                } else {
                    v2(0.0, 1.0)
                }
            })
            .collect();
        let half_width = (0..n).map(|i| 0.5 * (self.left[i] - self.right[i]).norm()).collect();
        let cum = cumulative_length(&center, self.closed);
        let length = *cum.last().unwrap();
        Corridor { station: cum[..n].to_vec(), center, normal, half_width, length, closed: self.closed }
    }

    /// Track width at every distinct station.
    pub fn widths(&self) -> Vec<f64> {
        (0..self.station_count()).map(|i| (self.left[i] - self.right[i]).norm()).collect()
    }

    /// Checks the structural invariants against a vehicle width.
    pub fn validate(&self, vehicle_width: f64) -> Result<(), TrackError> {
        if self.left.len() != self.right.len() {
            return Err(TrackError::Geometry {
                station: self.left.len().min(self.right.len()),
                reason: "left and right station counts differ".into(),
            });
        }
        if self.station_count() < MIN_STATIONS {
            return Err(TrackError::TooFewPoints { needed: MIN_STATIONS, got: self.station_count() });
        }
        if self.closed {
            let n = self.left.len() - 1;
            if (self.left[n] - self.left[0]).norm() > CLOSURE_TOL
                || (self.right[n] - self.right[0]).norm() > CLOSURE_TOL
            {
                return Err(TrackError::Geometry {
                    station: n,
                    reason: "closed track does not return to its first point".into(),
                });
            }
        }
        let center: Vec<V2> = (0..self.station_count()).map(|i| (self.left[i] + self.right[i]) * 0.5).collect();
        let tan = tangents(&center, self.closed);
        for (i, t) in tan.iter().enumerate() {
            let signed = cross(t, &(self.left[i] - self.right[i]));
            if signed <= vehicle_width {
                return Err(TrackError::Geometry {
                    station: i,
                    reason: format!("signed width {signed:.3} m not above vehicle width {vehicle_width} m"),
                });
            }
        }
        Ok(())
    }

    /// Builds corresponding, uniformly spaced boundaries from two raw
    /// edge polylines.
    ///
    /// A provisional centerline is taken from midpoints between the left
    /// edge and its closest right-edge points, resampled at `spacing`, and
    /// each station's normal is intersected with both edges.
    pub fn from_polylines(
        left: &[V2],
        right: &[V2],
        closed: bool,
        spacing: f64,
        banking: BankingMap,
        vehicle_width: f64,
    ) -> Result<Self, TrackError> {
        if left.len() < 2 || right.len() < 2 {
            return Err(TrackError::TooFewPoints { needed: 2, got: left.len().min(right.len()) });
        }
        if !(spacing > 0.0) {
            return Err(TrackError::Geometry { station: 0, reason: "spacing must be positive".into() });
        }
        let left = strip_closure(left, closed);
        let right = strip_closure(right, closed);

        let dense = resample(&left, closed, spacing * 0.5);
        let mut hint = None;
        let mut mids = Vec::with_capacity(dense.len());
        for q in &dense {
            let (seg, p, _) = closest_on_polyline(&right, closed, q, hint);
            hint = Some((seg, 40));
            mids.push((q + p) * 0.5);
        }
        let center = resample(&mids, closed, spacing);
        let tan = tangents(&center, closed);

        let mut out_l = Vec::with_capacity(center.len() + 1);
        let mut out_r = Vec::with_capacity(center.len() + 1);
        let (mut hl, mut hr) = (None, None);
        for (i, (c, t)) in center.iter().zip(&tan).enumerate() {
            let n = perp(t);
            let (tl, sl) = ray_hit(&left, closed, c, &n, hl).ok_or_else(|| TrackError::Geometry {
                station: i,
                reason: "normal does not meet the left edge".into(),
            })?;
            let (tr, sr) = ray_hit(&right, closed, c, &n, hr).ok_or_else(|| TrackError::Geometry {
                station: i,
                reason: "normal does not meet the right edge".into(),
            })?;
            hl = Some(sl);
            hr = Some(sr);
            if tl - tr <= vehicle_width {
                return Err(TrackError::Geometry {
                    station: i,
                    reason: format!("edges cross or are narrower than the vehicle ({:.3} m)", tl - tr),
                });
            }
            out_l.push(c + n * tl);
            out_r.push(c + n * tr);
        }
        if closed {
            out_l.push(out_l[0]);
            out_r.push(out_r[0]);
        }
        let b = Self { left: out_l, right: out_r, banking, closed };
        b.validate(vehicle_width)?;
        Ok(b)
    }
}

fn strip_closure(pts: &[V2], closed: bool) -> Vec<V2> {
    let mut v = pts.to_vec();
    if closed && v.len() > 2 && (v[0] - v[v.len() - 1]).norm() < 1e-3 {
        v.pop();
    }
    v
}

/// Closest-to-origin intersection of the line `c + t n` with a polyline.
/// Returns `(t, segment)`.
fn ray_hit(pts: &[V2], closed: bool, c: &V2, n: &V2, hint: Option<usize>) -> Option<(f64, usize)> {
    let count = pts.len();
    let nseg = if closed { count } else { count - 1 };
    let scan = |range: &mut dyn Iterator<Item = usize>| {
        let mut best: Option<(f64, usize)> = None;
        for i in range {
            let a = pts[i];
            let b = pts[(i + 1) % count];
            if let Some(t) = line_segment_hit(c, n, &a, &b) {
                if best.is_none_or(|(bt, _)| t.abs() < bt.abs()) {
                    best = Some((t, i));
                }
            }
        }
        best
    };
    if let Some(h) = hint {
        let r = 60usize;
        if 2 * r + 1 < nseg {
            let mut it: Box<dyn Iterator<Item = usize>> = if closed {
                Box::new((0..=2 * r).map(move |k| (h + nseg + k - r) % nseg))
            } else {
                Box::new(h.saturating_sub(r)..(h + r + 1).min(nseg))
            };
            if let Some(hit) = scan(&mut *it) {
                return Some(hit);
            }
        }
    }
    scan(&mut (0..nseg))
}

/// Input format of a boundary file.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BoundaryFormat {
    Kml,
    Csv,
}

/// Loads and resamples track boundaries from a KML or CSV file.
pub fn load_boundaries(
    path: &Path,
    format: BoundaryFormat,
    spacing: f64,
    vehicle_width: f64,
) -> Result<TrackBoundaries, TrackError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| TrackError::Io { path: path.display().to_string(), message: e.to_string() })?;
    let raw = match format {
        BoundaryFormat::Kml => super::kml::parse_kml(&text)?,
        BoundaryFormat::Csv => parse_boundary_csv(&text)?,
    };
    TrackBoundaries::from_polylines(&raw.left, &raw.right, raw.closed, spacing, raw.banking, vehicle_width)
}

/// Edges as read from a file, before resampling.
#[derive(Debug, Clone, PartialEq)]
pub struct RawBoundaries {
    pub left: Vec<V2>,
    pub right: Vec<V2>,
    pub closed: bool,
    pub banking: BankingMap,
}

/// Parses `left_x,left_y,right_x,right_y[,bank]` rows in local metres.
/// The optional `bank` column is in radians. A track is closed when the
/// last row repeats the first.
pub fn parse_boundary_csv(text: &str) -> Result<RawBoundaries, TrackError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'));
    let (hline, header) = lines.next().ok_or(TrackError::Parse { line: 1, message: "empty boundary file".into() })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    let find = |name: &str| cols.iter().position(|c| *c == name);
    let idx = ["left_x", "left_y", "right_x", "right_y"]
        .iter()
        .map(|n| find(n).ok_or_else(|| TrackError::Parse { line: hline + 1, message: format!("missing column `{n}`") }))
        .collect::<Result<Vec<_>, _>>()?;
    let bank_col = find("bank");
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut banks = Vec::new();
    for (ln, line) in lines {
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        let get = |i: usize| -> Result<f64, TrackError> {
            f.get(i)
                .ok_or_else(|| TrackError::Parse { line: ln + 1, message: "too few fields".into() })?
                .parse::<f64>()
                .map_err(|e| TrackError::Parse { line: ln + 1, message: e.to_string() })
        };
        left.push(v2(get(idx[0])?, get(idx[1])?));
        right.push(v2(get(idx[2])?, get(idx[3])?));
        if let Some(b) = bank_col {
            banks.push(get(b)?);
        }
    }
    let n = left.len();
    let closed =
        n > 2 && (left[0] - left[n - 1]).norm() <= CLOSURE_TOL && (right[0] - right[n - 1]).norm() <= CLOSURE_TOL;
    let banking = if banks.is_empty() {
        BankingMap::flat()
    } else {
        let center: Vec<V2> = left.iter().zip(&right).map(|(l, r)| (l + r) * 0.5).collect();
        let mut cum = cumulative_length(&center, false);
        cum.truncate(n);
        let (st, bk, period) = if closed {
            let p = cum[n - 1];
            (cum[..n - 1].to_vec(), banks[..n - 1].to_vec(), Some(p))
        } else {
            (cum, banks, None)
        };
        BankingMap { stations: st, bank: bk, period }
    };
    Ok(RawBoundaries { left, right, closed, banking })
}

/// Writes boundaries in the CSV layout read by [`parse_boundary_csv`].
pub fn boundaries_to_csv(b: &TrackBoundaries) -> String {
    let corr = b.corridor();
    let mut s = String::from("left_x,left_y,right_x,right_y,bank\n");
    for i in 0..b.left.len() {
        let st = corr.station.get(i).copied().unwrap_or(corr.length);
        s.push_str(&format!(
            "{},{},{},{},{}\n",
            b.left[i].x,
            b.left[i].y,
            b.right[i].x,
            b.right[i].y,
            b.banking.eval(st)
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn straight(n: usize, width: f64) -> (Vec<V2>, Vec<V2>) {
        let l = (0..n).map(|i| v2(i as f64, width / 2.0)).collect();
        let r = (0..n).map(|i| v2(i as f64, -width / 2.0)).collect();
        (l, r)
    }

    #[test]
    fn parallel_lines_give_constant_width() {
        let (l, r) = straight(100, 12.0);
        let b = TrackBoundaries::from_polylines(&l, &r, false, 2.0, BankingMap::flat(), 2.0).unwrap();
        for w in b.widths() {
            assert!((w - 12.0).abs() < 1e-9);
        }
    }

    #[test]
    fn annulus_has_width_ten() {
        let n = 400;
        let ring = |r: f64| -> Vec<V2> {
            (0..n)
                .map(|i| {
                    let a = i as f64 / n as f64 * std::f64::consts::TAU;
                    v2(r * a.cos(), r * a.sin())
                })
                .collect()
        };
        let b = TrackBoundaries::from_polylines(&ring(40.0), &ring(50.0), true, 2.0, BankingMap::flat(), 2.0).unwrap();
        assert!(b.closed);
        assert_eq!(b.left.first(), b.left.last());
        for w in b.widths() {
            assert!((w - 10.0).abs() < 0.01, "{w}");
        }
    }

    #[test]
    fn crossing_edges_are_reported_with_station() {
        let l: Vec<V2> = (0..60).map(|i| v2(i as f64, 6.0 - 0.2 * i as f64)).collect();
        let r: Vec<V2> = (0..60).map(|i| v2(i as f64, -6.0 + 0.2 * i as f64)).collect();
        let err = TrackBoundaries::from_polylines(&l, &r, false, 2.0, BankingMap::flat(), 2.0).unwrap_err();
        match err {
            TrackError::Geometry { station, .. } => {
                assert!(station > 5 && station < 25, "{station}")
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn csv_missing_column() {
        let err = parse_boundary_csv("left_x,left_y,right_x\n1,2,3\n").unwrap_err();
        assert!(matches!(err, TrackError::Parse { line: 1, .. }));
    }

    #[test]
    fn csv_bad_number_reports_line() {
        let err = parse_boundary_csv("left_x,left_y,right_x,right_y\n0,1,0,-1\n1,x,1,-1\n").unwrap_err();
        assert!(matches!(err, TrackError::Parse { line: 3, .. }));
    }

    #[test]
    fn banking_wraps_on_closed_tracks() {
        let m = BankingMap { stations: vec![0.0, 50.0], bank: vec![0.0, 1.0], period: Some(100.0) };
        assert!((m.eval(25.0) - 0.5).abs() < 1e-12);
        assert!((m.eval(75.0) - 0.5).abs() < 1e-12);
        assert!((m.eval(125.0) - 0.5).abs() < 1e-12);
        assert_eq!(BankingMap::flat().eval(3.0), 0.0);
    }
}

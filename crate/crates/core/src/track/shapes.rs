//! Synthetic tracks used by scenarios and tests.

use std::f64::consts::{FRAC_PI_2, TAU};

use super::boundaries::{BankingMap, TrackBoundaries};
use super::geom::{v2, V2};
use super::TrackError;

/// Vehicle width assumed when validating synthetic tracks.
pub const TEST_VEHICLE_WIDTH: f64 = 2.0;

/// A centerline piece: straight of given length, or an arc of given
/// length and signed radius (positive turns left).
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Piece {
    Straight(f64),
    Arc { length: f64, radius: f64 },
}

/// Dense centerline points and left normals traced from `pieces`.
pub fn trace(start: V2, heading: f64, pieces: &[Piece], step: f64) -> (Vec<V2>, Vec<V2>) {
    let mut pts = vec![start];
    let mut nrm = vec![v2(-heading.sin(), heading.cos())];
    let (mut p, mut h) = (start, heading);
    for piece in pieces {
        let (len, curv) = match *piece {
            Piece::Straight(l) => (l, 0.0),
            Piece::Arc { length, radius } => (length, 1.0 / radius),
        };
        let k = (len / step).ceil().max(1.0) as usize;
        let ds = len / k as f64;
        for _ in 0..k {
            if curv == 0.0 {
                p += v2(h.cos(), h.sin()) * ds;
            } else {
                let r = 1.0 / curv;
                let h1 = h + ds * curv;
                p += v2(h1.sin() - h.sin(), h.cos() - h1.cos()) * r;
                h = h1;
            }
            pts.push(p);
            nrm.push(v2(-h.sin(), h.cos()));
        }
    }
    (pts, nrm)
}

fn edges(center: &[V2], normal: &[V2], half_width: f64) -> (Vec<V2>, Vec<V2>) {
    let l = center.iter().zip(normal).map(|(c, n)| c + n * half_width).collect();
    let r = center.iter().zip(normal).map(|(c, n)| c - n * half_width).collect();
    (l, r)
}

pub fn straight(length: f64, width: f64, spacing: f64) -> Result<TrackBoundaries, TrackError> {
    let (c, n) = trace(v2(0.0, 0.0), 0.0, &[Piece::Straight(length)], 0.5);
    let (l, r) = edges(&c, &n, width / 2.0);
    TrackBoundaries::from_polylines(&l, &r, false, spacing, BankingMap::flat(), TEST_VEHICLE_WIDTH)
}

/// Counter-clockwise ring between two concentric circles; the inner
/// circle is the left edge.
pub fn annulus(r_in: f64, r_out: f64, spacing: f64) -> Result<TrackBoundaries, TrackError> {
    let n = 2000;
    let ring = |r: f64| -> Vec<V2> {
        (0..n)
            .map(|i| {
                let a = i as f64 / n as f64 * TAU;
                v2(r * a.cos(), r * a.sin())
            })
            .collect()
    };
    TrackBoundaries::from_polylines(&ring(r_in), &ring(r_out), true, spacing, BankingMap::flat(), TEST_VEHICLE_WIDTH)
}

/// Left-hand 90° corner of centerline radius `radius` between two
/// straights of length `leg`.
pub fn corner90(leg: f64, radius: f64, width: f64, spacing: f64) -> Result<TrackBoundaries, TrackError> {
    let pieces = [Piece::Straight(leg), Piece::Arc { length: radius * FRAC_PI_2, radius }, Piece::Straight(leg)];
    let (c, n) = trace(v2(0.0, 0.0), 0.0, &pieces, 0.25);
    let (l, r) = edges(&c, &n, width / 2.0);
    TrackBoundaries::from_polylines(&l, &r, false, spacing, BankingMap::flat(), TEST_VEHICLE_WIDTH)
}

/// Layout of a rounded-rectangle speedway.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvalLayout {
    pub straight: f64,
    pub chute: f64,
    pub turn: f64,
    pub width: f64,
    /// Bank in the turns (rad).
    pub bank: f64,
    /// Length over which the bank ramps in and out around each turn end.
    pub bank_ramp: f64,
}

impl Default for OvalLayout {
    /// Proportions of a 2.5-mile speedway: two 1006 m straights, two
    /// 201 m chutes and four 402 m quarter turns.
    fn default() -> Self {
        Self { straight: 1006.0, chute: 201.0, turn: 402.0, width: 15.0, bank: 9.2f64.to_radians(), bank_ramp: 60.0 }
    }
}

impl OvalLayout {
    pub fn radius(&self) -> f64 {
        self.turn / FRAC_PI_2
    }

    pub fn length(&self) -> f64 {
        2.0 * self.straight + 2.0 * self.chute + 4.0 * self.turn
    }

    /// Counter-clockwise pieces starting half way down the front straight.
    pub fn pieces(&self) -> Vec<Piece> {
        let arc = Piece::Arc { length: self.turn, radius: self.radius() };
        vec![
            Piece::Straight(self.straight / 2.0),
            arc,
            Piece::Straight(self.chute),
            arc,
            Piece::Straight(self.straight),
            arc,
            Piece::Straight(self.chute),
            arc,
            Piece::Straight(self.straight / 2.0),
        ]
    }

    /// Bank over centerline arc length.
    pub fn banking(&self) -> BankingMap {
        let mut stations = Vec::new();
        let mut bank = Vec::new();
        let mut s = self.straight / 2.0;
        let half = self.bank_ramp / 2.0;
        for k in 0..4 {
            stations.extend([s - half, s + half, s + self.turn - half, s + self.turn + half]);
            bank.extend([0.0, self.bank, self.bank, 0.0]);
            s += self.turn + if k % 2 == 0 { self.chute } else { self.straight };
        }
        BankingMap { stations, bank, period: Some(self.length()) }
    }

    pub fn boundaries(&self, spacing: f64) -> Result<TrackBoundaries, TrackError> {
        let (mut c, mut n) = trace(v2(0.0, 0.0), 0.0, &self.pieces(), 0.5);
        c.pop();
        n.pop();
        let (l, r) = edges(&c, &n, self.width / 2.0);
        TrackBoundaries::from_polylines(&l, &r, true, spacing, self.banking(), TEST_VEHICLE_WIDTH)
    }
}

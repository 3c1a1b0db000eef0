use std::f64::consts::PI;
use std::sync::OnceLock;

use proptest::prelude::*;

use racestack::analysis::lap_crossings;
use racestack::controller::{gear_logic, pursuit_road_wheel, ControlParams};
use racestack::estimator::{Estimator, EstimatorConfig};
use racestack::plant::{GnssFix, ImuSample, RtkStatus};
use racestack::telemetry::{BasestationFrame, DashboardFrame, BASESTATION_SIZE, DASHBOARD_SIZE};
use racestack::track::geom::v2;
use racestack::track::shapes::OvalLayout;
use racestack::track::{BankingMap, Raceline, RacelineOptions, TrackBoundaries};

fn oval() -> &'static Raceline {
    static RL: OnceLock<Raceline> = OnceLock::new();
    RL.get_or_init(|| Raceline::generate(&OvalLayout::default().boundaries(2.0).unwrap(), &Default::default()).unwrap())
}

fn with_crc(mut payload: Vec<u8>) -> Vec<u8> {
    let crc = crc32fast::hash(&payload);
    payload.extend_from_slice(&crc.to_le_bytes());
    payload
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn dashboard_bytes_survive_decode(payload in proptest::collection::vec(any::<u8>(), DASHBOARD_SIZE - 4)) {
        let bytes = with_crc(payload);
        let f = DashboardFrame::decode(&bytes).unwrap();
        prop_assert_eq!(f.encode(), bytes);
    }

    #[test]
    fn basestation_decode_is_exact_or_refuses(payload in proptest::collection::vec(any::<u8>(), BASESTATION_SIZE - 4)) {
        let bytes = with_crc(payload);
        if let Ok(f) = BasestationFrame::decode(&bytes) {
            prop_assert_eq!(f.encode(), bytes);
            prop_assert!(f.target_velocity.is_finite() && f.v_max >= 0.0 && f.raceline_index >= 0);
        }
    }

    #[test]
    fn flipped_bit_is_caught(payload in proptest::collection::vec(any::<u8>(), DASHBOARD_SIZE - 4), bit in 0..8 * DASHBOARD_SIZE) {
        let mut bytes = with_crc(payload);
        bytes[bit / 8] ^= 1 << (bit % 8);
        prop_assert!(DashboardFrame::decode(&bytes).is_err());
    }

    #[test]
    fn newton_lands_on_the_grid_minimum(s in 0.0..1.0f64, offset in -6.0..6.0f64, warm in -5.0..5.0f64) {
        let rl = oval();
        let s = s * rl.length();
        let p = rl.eval(s);
        let q = v2(p.x - offset * p.heading.sin(), p.y + offset * p.heading.cos());
        let n = rl.newton_nearest(&q, s + warm, 20);
        let g = rl.grid_nearest(&q, s, 30.0, 0.05);
        prop_assert!(n.converged);
        let ds = (n.s - g.s).rem_euclid(rl.length());
        prop_assert!(ds.min(rl.length() - ds) < 0.05, "newton {} grid {}", n.s, g.s);
        prop_assert!(n.distance_sq <= g.distance_sq + 1e-9);
        prop_assert!((n.distance_sq.sqrt() - offset.abs()).abs() < 0.05);
    }

    #[test]
    fn pursuit_is_odd_and_bounded(alpha in -PI..PI, ld in 1.0..100.0f64) {
        let p = ControlParams::default();
        let d = pursuit_road_wheel(alpha, ld, &p);
        prop_assert_eq!(d, -pursuit_road_wheel(-alpha, ld, &p));
        prop_assert!(d.abs() <= p.max_road_wheel());
        prop_assert!(d == 0.0 || d.signum() == alpha.sin().signum());
    }

    #[test]
    fn gears_move_one_step_at_most(rpm in 0.0..12000.0f64, gear in 0u8..9) {
        let g = gear_logic(rpm, gear, &ControlParams::default());
        let from = gear.clamp(1, 6);
        prop_assert!((1..=6).contains(&g));
        prop_assert!(g.abs_diff(from) <= 1);
    }

    #[test]
    fn dithering_on_the_line_counts_once(
        steps in proptest::collection::vec(1.0..50.0f64, 200..800),
        dither in proptest::collection::vec(1.0..20.0f64, 0..6),
    ) {
        let length = 400.0;
        let mut s = 0.0;
        let mut stream = vec![(0.0, 0.0)];
        for (k, step) in steps.iter().enumerate() {
            let before = s;
            s += step;
            stream.push((k as f64, s.rem_euclid(length)));
            if (before / length).floor() != (s / length).floor() {
                // roll back over the line and forward again
                for d in &dither {
                    stream.push((k as f64, (s - s.rem_euclid(length) - d).rem_euclid(length)));
                    stream.push((k as f64, s.rem_euclid(length)));
                }
            }
        }
        let laps = (s / length).floor() as usize;
        prop_assert_eq!(lap_crossings(&stream, length).len(), laps);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn filter_covariance_stays_symmetric_psd(
        imu in proptest::collection::vec((-0.5..0.5f64, -0.5..0.5f64, -0.5..0.5f64, -8.0..8.0f64, -8.0..8.0f64), 100..400),
        fixes in proptest::collection::vec((-3.0..3.0f64, -3.0..3.0f64, 1e-4..4.0f64, any::<bool>()), 1..40),
    ) {
        let mut est = Estimator::new(EstimatorConfig::default());
        est.initialize(0.0, [0.0; 3], [0.0; 3], [20.0, 0.0, 0.0]);
        let per_fix = imu.len() / fixes.len() + 1;
        for (k, (gx, gy, gz, ax, ay)) in imu.iter().enumerate() {
            let t = (k + 1) as f64 * 0.008;
            let s = ImuSample { stamp: t, gyro: [*gx, *gy, *gz], accel: [*ax, *ay, 9.81] };
            est.predict(&s, 0.008).unwrap();
            if k % per_fix == 0 {
                let (dx, dy, var, float) = fixes[k / per_fix];
                let p = est.state().position();
                let fix = GnssFix {
                    stamp: t,
                    x: p.x + dx,
                    y: p.y + dy,
                    z: p.z,
                    heading: est.state().rpy().z,
                    variance: [var; 3],
                    heading_variance: 1e-4,
                    rtk_status: if float { RtkStatus::RtkFloat } else { RtkStatus::RtkFixed },
                };
                let _ = est.update_gnss(&fix);
            }
            let c = est.state().covariance;
            let asym = (c - c.transpose()).abs().max();
            prop_assert!(asym <= 1e-12 * c.abs().max().max(1.0));
            let min_eig = c.symmetric_eigenvalues().min();
            prop_assert!(min_eig >= -1e-9 * c.abs().max(), "eigenvalue {}", min_eig);
        }
    }

    #[test]
    fn raceline_stays_in_the_corridor_and_under_the_caps(
        a in 150.0..300.0f64,
        b in 80.0..150.0f64,
        width in 10.0..16.0f64,
        v_cap in 20.0..80.0f64,
    ) {
        let n = 360;
        let mut left = Vec::new();
        let mut right = Vec::new();
        for i in 0..n {
            let t = i as f64 / n as f64 * 2.0 * PI;
            let (x, y) = (a * t.cos(), b * t.sin());
            let (tx, ty) = (-a * t.sin(), b * t.cos());
            let h = tx.hypot(ty);
            let (nx, ny) = (-ty / h * width / 2.0, tx / h * width / 2.0);
            left.push(v2(x + nx, y + ny));
            right.push(v2(x - nx, y - ny));
        }
        let tb = TrackBoundaries::from_polylines(&left, &right, true, 2.0, BankingMap::flat(), 2.0).unwrap();
        let mut opts = RacelineOptions::default();
        opts.profile.v_cap = v_cap;
        let rl = Raceline::generate(&tb, &opts).unwrap();
        prop_assert!(rl.is_closed());
        for smp in rl.samples() {
            // inside the ellipse band, judged against the centreline
            let mut best = f64::INFINITY;
            for k in 0..3600 {
                let t = k as f64 / 3600.0 * 2.0 * PI;
                let d = (smp.x - a * t.cos()).hypot(smp.y - b * t.sin());
                best = best.min(d);
            }
            prop_assert!(best <= width / 2.0 - opts.margin + 0.05, "{} m off centre", best);
            prop_assert!(smp.v_ref > 0.0 && smp.v_ref <= v_cap + 1e-9);
        }
        let lim = opts.profile.a_lat_max;
        let step = 1.0;
        let mut s = 0.0;
        while s < rl.length() {
            let p = rl.eval(s);
            prop_assert!(p.v_ref * p.v_ref * p.curvature.abs() <= lim * 1.02 + 1e-6, "at {s}: {}", p.v_ref * p.v_ref * p.curvature.abs());
            s += step;
        }
    }
}

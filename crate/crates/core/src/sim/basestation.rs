//! Scripted operator at the far end of the radio link.

use crate::telemetry::{BasestationFrame, DashboardFrame, Link, Stamp};

use super::scenario::BaseStationConfig;

/// Start/finish line: a point and the direction of travel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StartLine {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
    /// Crossings farther than this from the point do not count (m).
    pub half_width: f64,
}

impl StartLine {
    /// Signed distance ahead of the line and lateral offset along it.
    pub fn coords(&self, x: f64, y: f64) -> (f64, f64) {
        let (s, c) = self.heading.sin_cos();
        let (dx, dy) = (x - self.x, y - self.y);
        (c * dx + s * dy, -s * dx + c * dy)
    }

    /// Whether moving from `a` to `b` crosses the line forwards.
    pub fn crossed(&self, a: (f64, f64), b: (f64, f64)) -> bool {
        let (da, _) = self.coords(a.0, a.1);
        let (db, lat) = self.coords(b.0, b.1);
        da < 0.0 && db >= 0.0 && lat.abs() <= self.half_width && db - da < 200.0
    }
}

pub struct ScriptedBaseStation {
    cfg: BaseStationConfig,
    link: Box<dyn Link>,
    line: StartLine,
    crossings: u32,
    last_pos: Option<(f64, f64)>,
    latest: Option<DashboardFrame>,
    pub received: u64,
    pub dropped: u64,
    pub sent: u64,
    pub send_errors: u64,
}

impl ScriptedBaseStation {
    pub fn new(cfg: BaseStationConfig, link: Box<dyn Link>, line: StartLine) -> Self {
        Self {
            cfg,
            link,
            line,
            crossings: 0,
            last_pos: None,
            latest: None,
            received: 0,
            dropped: 0,
            sent: 0,
            send_errors: 0,
        }
    }

    /// Start-line crossings seen in the dashboard stream.
    pub fn crossings(&self) -> u32 {
        self.crossings
    }

    pub fn latest_dashboard(&self) -> Option<&DashboardFrame> {
        self.latest.as_ref()
    }

    /// Cap for the lap the car is on according to the dashboard.
    pub fn lap_cap(&self) -> f64 {
        let caps = &self.cfg.lap_caps;
        if caps.is_empty() {
            return 0.0;
        }
        caps[(self.crossings.max(1) as usize - 1).min(caps.len() - 1)]
    }

    fn drain(&mut self) {
        while let Ok(Some(bytes)) = self.link.recv() {
            match DashboardFrame::decode(&bytes) {
                Ok(f) => {
                    self.received += 1;
                    let p = (f.position_x as f64, f.position_y as f64);
                    if let Some(q) = self.last_pos {
                        if self.line.crossed(q, p) {
                            self.crossings += 1;
                        }
                    }
                    self.last_pos = Some(p);
                    self.latest = Some(f);
                }
                Err(_) => self.dropped += 1,
            }
        }
    }

    /// The frame the script wants on the air at `now`.
    pub fn frame(&self, now: f64) -> (BasestationFrame, bool) {
        let mut f = BasestationFrame {
            stamp: Stamp::from_secs(now),
            v_max: self.lap_cap() as f32,
            raceline_index: self.cfg.raceline_index,
            veh_flag: 0,
            track_flag: 0,
            enable_engine: true,
            enable_driving: true,
            enable_joystick_control: false,
            target_velocity: 0.0,
            steering_cmd: 0.0,
            brake_amount: 0.0,
            throttle_lockout: false,
        };
        let mut silent = false;
        for e in self.cfg.events.iter().filter(|e| e.t <= now) {
            if let Some(v) = e.v_max {
                f.v_max = v as f32;
            }
            if let Some(v) = e.track_flag {
                f.track_flag = v;
            }
            if let Some(v) = e.veh_flag {
                f.veh_flag = v;
            }
            if let Some(v) = e.raceline_index {
                f.raceline_index = v;
            }
            if let Some(v) = e.enable_joystick_control {
                f.enable_joystick_control = v;
            }
            if let Some(v) = e.steering_cmd {
                f.steering_cmd = v as f32;
            }
            if let Some(v) = e.brake_amount {
                f.brake_amount = v as f32;
            }
            if let Some(v) = e.throttle_lockout {
                f.throttle_lockout = v;
            }
            if let Some(v) = e.silent {
                silent = v;
            }
        }
        f.target_velocity = f.v_max;
        (f, silent)
    }

    /// Reads the dashboard stream, then transmits the scripted command.
    pub fn tick(&mut self, now: f64) -> Option<BasestationFrame> {
        self.drain();
        let (f, silent) = self.frame(now);
        if silent {
            return None;
        }
        match self.link.send(&f.encode()) {
            Ok(()) => {
                self.sent += 1;
                Some(f)
            }
            Err(_) => {
                self.send_errors += 1;
                None
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::scenario::BaseStationEvent;
    use crate::telemetry::loopback_pair;

    fn dash(x: f64, y: f64) -> Vec<u8> {
        DashboardFrame { position_x: x as f32, position_y: y as f32, ..Default::default() }.encode()
    }

    #[test]
    fn caps_follow_crossings() {
        let (mut car, base) = loopback_pair();
        let line = StartLine { x: 0.0, y: 0.0, heading: 0.0, half_width: 20.0 };
        let mut bs = ScriptedBaseStation::new(BaseStationConfig::default(), Box::new(base), line);
        assert_eq!(bs.frame(0.0).0.v_max, 50.0);
        for (x, y) in [(-5.0, 0.0), (1.0, 0.0), (500.0, 0.0), (-3.0, 0.5), (2.0, 0.5), (-1.0, 300.0), (1.0, 300.0)] {
            car.send(&dash(x, y)).unwrap();
        }
        car.send(&[1, 2, 3]).unwrap();
        let f = bs.tick(1.0).unwrap();
        // the far-side pass at y = 300 is outside the line
        assert_eq!(bs.crossings(), 2);
        assert_eq!(f.v_max, 53.0);
        assert_eq!(bs.dropped, 1);
        assert_eq!(BasestationFrame::decode(&car.recv().unwrap().unwrap()).unwrap(), f);
    }

    #[test]
    fn events_override_and_silence() {
        let (_car, base) = loopback_pair();
        let cfg = BaseStationConfig {
            events: vec![
                BaseStationEvent { t: 2.0, track_flag: Some(1), ..Default::default() },
                BaseStationEvent { t: 3.0, silent: Some(true), ..Default::default() },
            ],
            ..Default::default()
        };
        let line = StartLine { x: 0.0, y: 0.0, heading: 0.0, half_width: 20.0 };
        let mut bs = ScriptedBaseStation::new(cfg, Box::new(base), line);
        assert_eq!(bs.tick(1.0).unwrap().track_flag, 0);
        assert_eq!(bs.tick(2.5).unwrap().track_flag, 1);
        assert!(bs.tick(3.0).is_none());
    }
}

use serde::{Deserialize, Serialize};

/// Integer tick count on the simulation time base.
pub type Tick = u64;

/// Virtual clock counting integer ticks of a fixed base period.
///
/// Time never goes backwards and every period used by the scheduler is an
/// integer multiple of the base tick, so rate arithmetic is exact.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimClock {
    now: Tick,
    base_tick_us: u64,
}

impl Default for SimClock {
    fn default() -> Self {
        Self::new(1_000)
    }
}

impl SimClock {
    /// Creates a clock with the given base period in microseconds.
    pub fn new(base_tick_us: u64) -> Self {
        assert!(base_tick_us > 0, "base tick must be positive");
        Self { now: 0, base_tick_us }
    }

    pub fn now(&self) -> Tick {
        self.now
    }

    pub fn base_tick_us(&self) -> u64 {
        self.base_tick_us
    }

    pub fn base_tick_secs(&self) -> f64 {
        self.base_tick_us as f64 * 1e-6
    }

    pub fn now_secs(&self) -> f64 {
        self.ticks_to_secs(self.now)
    }

    pub fn ticks_to_secs(&self, ticks: Tick) -> f64 {
        // integer microseconds first so repeated conversions agree bit for bit
        (ticks * self.base_tick_us) as f64 * 1e-6
    }

    /// Converts seconds to ticks, returning `None` unless the value is an
    /// exact multiple of the base tick (to within a nanosecond).
    pub fn secs_to_ticks(&self, secs: f64) -> Option<Tick> {
        if !secs.is_finite() || secs < 0.0 {
            return None;
        }
        let us = secs * 1e6;
        let ticks = (us / self.base_tick_us as f64).round();
        let back = ticks * self.base_tick_us as f64;
        if (back - us).abs() > 1e-3 {
            return None;
        }
        Some(ticks as Tick)
    }

    /// Rounds seconds to the nearest tick.
    pub fn secs_to_ticks_rounded(&self, secs: f64) -> Tick {
        (secs.max(0.0) * 1e6 / self.base_tick_us as f64).round() as Tick
    }

    pub(crate) fn set(&mut self, tick: Tick) {
        debug_assert!(tick >= self.now);
        self.now = tick;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_periods() {
        let c = SimClock::default();
        assert_eq!(c.secs_to_ticks(0.02), Some(20));
        assert_eq!(c.secs_to_ticks(0.008), Some(8));
        assert_eq!(c.secs_to_ticks(0.1), Some(100));
        assert_eq!(c.secs_to_ticks(0.0015), None);
        assert_eq!(c.ticks_to_secs(1000), 1.0);
    }
}

use serde::{Deserialize, Serialize};

/// Actuated channels of the drive-by-wire interface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Steering,
    Throttle,
    Brake,
}

impl Channel {
    pub fn name(self) -> &'static str {
        match self {
            Channel::Steering => "steering",
            Channel::Throttle => "throttle",
            Channel::Brake => "brake",
        }
    }
}

impl std::str::FromStr for Channel {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "steering" => Ok(Channel::Steering),
            "throttle" => Ok(Channel::Throttle),
            "brake" => Ok(Channel::Brake),
            other => Err(format!("unknown channel `{other}`")),
        }
    }
}

/// Injected actuator misbehaviour.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ActuatorFault {
    /// Output frozen at its value when the fault starts.
    Stuck,
    /// Output forced to a constant.
    StuckAt(f64),
    /// Much slower response.
    Lag(f64),
}

/// Rate-limited first-order lag; `tau == 0` gives a pure slew limiter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Actuator {
    pub value: f64,
    pub tau: f64,
    pub rate: f64,
    pub fault: Option<ActuatorFault>,
}

impl Actuator {
    pub fn new(tau: f64, rate: f64) -> Self {
        Self { value: 0.0, tau, rate, fault: None }
    }

    pub fn step(&mut self, target: f64, dt: f64) -> f64 {
        let tau = match self.fault {
            Some(ActuatorFault::Stuck) => return self.value,
            Some(ActuatorFault::StuckAt(v)) => {
                self.value = v;
                return v;
            }
            Some(ActuatorFault::Lag(t)) => t,
            None => self.tau,
        };
        let err = target - self.value;
        let max_step = self.rate * dt;
        let delta = if tau > 0.0 {
            (err * (dt / tau).min(1.0)).clamp(-max_step, max_step)
        } else {
            err.clamp(-max_step, max_step)
        };
        self.value += delta;
        self.value
    }
}

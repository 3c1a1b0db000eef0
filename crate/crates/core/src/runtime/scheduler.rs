use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::clock::{SimClock, Tick};
use super::topic::{Topic, WriterToken};
use super::RuntimeError;

/// Callback signature for a scheduled task.
pub type TaskFn<C> = Box<dyn FnMut(&mut C, &SimClock) -> Result<(), String>>;

/// Static description of a periodic task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaskSpec {
    pub name: String,
    pub period: Tick,
    pub phase: Tick,
    /// Lower runs first at coincident ticks; ties broken by name.
    pub priority: i32,
}

impl TaskSpec {
    pub fn new(name: impl Into<String>, period: Tick) -> Self {
        Self { name: name.into(), period, phase: 0, priority: 0 }
    }

    pub fn with_phase(mut self, phase: Tick) -> Self {
        self.phase = phase;
        self
    }

    pub fn with_priority(mut self, priority: i32) -> Self {
        self.priority = priority;
        self
    }
}

/// One task execution, as returned by [`Scheduler::advance`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Execution {
    pub task: String,
    pub tick: Tick,
}

/// A task callback that returned an error.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaultEvent {
    pub task: String,
    pub tick: Tick,
    pub message: String,
}

struct Task<C> {
    spec: TaskSpec,
    next: Tick,
    fired: u64,
    callback: TaskFn<C>,
}

/// Execution mode of [`Scheduler::run`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunMode {
    /// Run as fast as possible.
    Lockstep,
    /// Pace execution against the wall clock; `speed` 1.0 is real time.
    WallClock { speed: f64 },
}

/// Rate scheduler over a context `C`.
///
/// A task with period `p` and phase `q` fires at ticks `q + k*p` for
/// `k >= 1`. Tasks due at the same tick run in `(priority, name)` order.
/// Callback failures are published on the fault topic and never stop the
/// loop.
pub struct Scheduler<C> {
    clock: SimClock,
    tasks: Vec<Task<C>>,
    faults: Topic<FaultEvent>,
    fault_writer: WriterToken,
}

impl<C> Scheduler<C> {
    pub fn new(clock: SimClock) -> Self {
        let mut faults = Topic::new("faults", 1024);
        let fault_writer = faults.register_writer("scheduler").expect("fresh topic has no writer");
        Self { clock, tasks: Vec::new(), faults, fault_writer }
    }

    pub fn clock(&self) -> &SimClock {
        &self.clock
    }

    pub fn faults(&self) -> &Topic<FaultEvent> {
        &self.faults
    }

    pub fn add_task(&mut self, spec: TaskSpec, callback: TaskFn<C>) -> Result<(), RuntimeError> {
        if spec.period == 0 {
            return Err(RuntimeError::BadPeriod { task: spec.name });
        }
        if self.tasks.iter().any(|t| t.spec.name == spec.name) {
            return Err(RuntimeError::DuplicateTask { task: spec.name });
        }
        // first firing strictly after the current time
        let now = self.clock.now();
        let mut next = spec.phase + spec.period;
        if next <= now {
            let k = (now - spec.phase) / spec.period + 1;
            next = spec.phase + k * spec.period;
        }
        self.tasks.push(Task { spec, next, fired: 0, callback });
        self.tasks.sort_by(|a, b| (a.spec.priority, &a.spec.name).cmp(&(b.spec.priority, &b.spec.name)));
        Ok(())
    }

    pub fn fired(&self, name: &str) -> Option<u64> {
        self.tasks.iter().find(|t| t.spec.name == name).map(|t| t.fired)
    }

    /// Runs every task due in `(now, until]` and returns the executions in
    /// order. The clock ends at `until`.
    pub fn advance(&mut self, ctx: &mut C, until: Tick) -> Result<Vec<Execution>, RuntimeError> {
        let mut out = Vec::new();
        self.step_until(ctx, until, None, |name, tick| out.push(Execution { task: name.to_string(), tick }))?;
        Ok(out)
    }

    /// Like [`advance`](Self::advance) but only counts executions.
    pub fn run(&mut self, ctx: &mut C, until: Tick, mode: RunMode) -> Result<u64, RuntimeError> {
        let mut n = 0u64;
        let pace = match mode {
            RunMode::Lockstep => None,
            RunMode::WallClock { speed } => Some((Instant::now(), self.clock.now(), speed.max(1e-6))),
        };
        self.step_until(ctx, until, pace, |_, _| n += 1)?;
        Ok(n)
    }

    fn step_until(
        &mut self,
        ctx: &mut C,
        until: Tick,
        pace: Option<(Instant, Tick, f64)>,
        mut on_exec: impl FnMut(&str, Tick),
    ) -> Result<(), RuntimeError> {
        if until < self.clock.now() {
            return Err(RuntimeError::TimeReversal { now: self.clock.now(), until });
        }
        loop {
            let Some(tick) = self.tasks.iter().map(|t| t.next).min() else {
                break;
            };
            if tick > until {
                break;
            }
            if let Some((start, t0, speed)) = pace {
                let sim = self.clock.ticks_to_secs(tick - t0) / speed;
                let target = start + Duration::from_secs_f64(sim);
                let now = Instant::now();
                if target > now {
                    std::thread::sleep(target - now);
                }
            }
            self.clock.set(tick);
            // tasks are kept sorted by (priority, name)
            for task in self.tasks.iter_mut() {
                if task.next != tick {
                    continue;
                }
                task.next += task.spec.period;
                task.fired += 1;
                on_exec(&task.spec.name, tick);
                if let Err(message) = (task.callback)(ctx, &self.clock) {
                    let ev = FaultEvent { task: task.spec.name.clone(), tick, message };
                    self.faults.publish(&self.fault_writer, tick, ev)?;
                }
            }
        }
        self.clock.set(until);
        Ok(())
    }
}

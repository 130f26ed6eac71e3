//! Time sources for event timestamps.

use std::fmt::Debug;
use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, TimeZone, Utc};

pub trait Clock: Send + Sync + Debug {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Deterministic clock: starts at a fixed instant and advances a fixed number
/// of seconds on every reading. Used for batch runs and reproducible tests.
#[derive(Debug)]
pub struct StepClock {
    next: AtomicI64,
    step: i64,
}

impl StepClock {
    pub fn new(start: DateTime<Utc>, step_seconds: i64) -> Self {
        Self {
            next: AtomicI64::new(start.timestamp()),
            step: step_seconds,
        }
    }

    /// 2020-02-21T00:00:00Z, one second per reading.
    pub fn fixed() -> Self {
        Self::new(Utc.with_ymd_and_hms(2020, 2, 21, 0, 0, 0).unwrap(), 1)
    }
}

impl Clock for StepClock {
    fn now(&self) -> DateTime<Utc> {
        let secs = self.next.fetch_add(self.step, Ordering::SeqCst);
        Utc.timestamp_opt(secs, 0).unwrap()
    }
}

//! Integer nanosecond time base shared by every module.
//!
//! Durations are plain `i64` nanoseconds. Two newtypes keep the two time
//! axes apart: [`SimTime`] is the simulator's ground-truth clock, while
//! [`Timestamp`] is a reading taken from some node's [`LocalClock`].
//! Differences of timestamps are only meaningful when both come from the
//! same clock.
//!
//! [`LocalClock`]: crate::engine::LocalClock

use std::fmt;
use std::ops::{Add, Sub};

use serde::{Deserialize, Serialize};

pub const NANOS_PER_MICRO: i64 = 1_000;
pub const NANOS_PER_MILLI: i64 = 1_000_000;
pub const NANOS_PER_SEC: i64 = 1_000_000_000;

/// Microseconds to nanoseconds.
pub const fn micros(us: i64) -> i64 {
    us * NANOS_PER_MICRO
}

/// Seconds to nanoseconds.
pub const fn secs(s: i64) -> i64 {
    s * NANOS_PER_SEC
}

/// Converts a decimal microsecond value from a config file, rounding to the
/// nearest nanosecond.
pub fn nanos_from_micros_f64(us: f64) -> i64 {
    (us * NANOS_PER_MICRO as f64).round() as i64
}

/// Converts a decimal second value from a config file, rounding to the
/// nearest nanosecond.
pub fn nanos_from_secs_f64(s: f64) -> i64 {
    (s * NANOS_PER_SEC as f64).round() as i64
}

/// Formats nanoseconds as decimal microseconds with exactly three fractional
/// digits (`-250.000`). Exact, no floating point involved.
pub fn format_micros(ns: i64) -> String {
    format_fixed(ns, NANOS_PER_MICRO, 3)
}

/// Formats nanoseconds as decimal seconds with six fractional digits.
/// Sub-microsecond remainders are truncated.
pub fn format_secs(ns: i64) -> String {
    format_fixed(ns / NANOS_PER_MICRO, 1_000_000, 6)
}

fn format_fixed(value: i64, unit: i64, digits: usize) -> String {
    let sign = if value < 0 { "-" } else { "" };
    let abs = value.unsigned_abs();
    let unit = unit as u64;
    format!("{sign}{}.{:0digits$}", abs / unit, abs % unit)
}

/// A point on the simulator's true time axis, in nanoseconds since the epoch
/// of the run.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SimTime(pub i64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_secs(s: i64) -> Self {
        SimTime(secs(s))
    }

    pub const fn as_nanos(self) -> i64 {
        self.0
    }
}

impl Add<i64> for SimTime {
    type Output = SimTime;

    fn add(self, rhs: i64) -> SimTime {
        SimTime(self.0 + rhs)
    }
}

impl Sub for SimTime {
    type Output = i64;

    fn sub(self, rhs: SimTime) -> i64 {
        self.0 - rhs.0
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}s", format_secs(self.0))
    }
}

/// A reading of a node's local clock, in nanoseconds.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Timestamp(pub i64);

impl Sub for Timestamp {
    type Output = i64;

    fn sub(self, rhs: Timestamp) -> i64 {
        self.0 - rhs.0
    }
}

impl Add<i64> for Timestamp {
    type Output = Timestamp;

    fn add(self, rhs: i64) -> Timestamp {
        Timestamp(self.0 + rhs)
    }
}
